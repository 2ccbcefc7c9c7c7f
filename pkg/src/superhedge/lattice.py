"""Finite product path space, its filtration nodes and measures on it.

Paths are enumerated lexicographically over the coordinates
``(t=1, n=1), (t=1, n=2), ..., (t=T, n=d)``, so the paths passing through one
node at date ``t`` form a contiguous block and the node index at date ``t`` is
``path_index // (number of completions after t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .market import MERGE_TOL, MarginalDistribution, MarketModel

DEFAULT_MAX_PATHS = 100_000


class LatticeSizeError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    """A date ``t`` (0..T-1) and the price history ``x_0..x_t`` as a ``(t+1, d)`` array."""

    t: int
    index: int
    history: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.history[-1]

    def key(self) -> tuple:
        """Path levels after the spot, ``((x_1^1..x_1^d), ..., (x_t^1..x_t^d))``."""
        return tuple(tuple(float(v) for v in row) for row in self.history[1:])

    def __str__(self) -> str:
        if self.t == 0:
            return "node(t=0)"
        return f"node(t={self.t}, path={self.key()})"


class PathLattice:
    def __init__(self, d: int, T: int, x0, grids: Mapping[tuple[int, int], np.ndarray],
                 max_paths: int = DEFAULT_MAX_PATHS):
        self.d, self.T = int(d), int(T)
        self.x0 = np.asarray(x0, dtype=float).reshape(self.d)
        g = {}
        for t in range(1, T + 1):
            for n in range(1, d + 1):
                lv = np.asarray(grids[(t, n)], dtype=float)
                if lv.size == 0 or np.any(np.diff(lv) <= 0) or np.any(lv < 0):
                    raise ValueError(f"grid ({t},{n}) must be nonempty, nonnegative, increasing")
                lv = lv.copy()
                lv.setflags(write=False)
                g[(t, n)] = lv
        self.grids = g
        self.sizes = [[g[(t, n)].size for n in range(1, d + 1)] for t in range(1, T + 1)]
        count = math.prod(math.prod(row) for row in self.sizes)
        if count > max_paths:
            raise LatticeSizeError(f"lattice has {count} paths, above the cap of {max_paths}")
        self.n_paths = count
        # nodes at date t (t = 0..T) and completions after t
        per_date = [math.prod(row) for row in self.sizes]
        self.n_nodes = [math.prod(per_date[:t]) for t in range(T + 1)]
        self.completions = [count // self.n_nodes[t] for t in range(T + 1)]
        self._paths = self._enumerate()
        self._paths.setflags(write=False)

    def _enumerate(self) -> np.ndarray:
        axes = [self.grids[(t, n)] for t in range(1, self.T + 1) for n in range(1, self.d + 1)]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.reshape(-1) for m in mesh], axis=1)
        return flat.reshape(self.n_paths, self.T, self.d)

    @property
    def paths(self) -> np.ndarray:
        """Array ``(P, T, d)`` of lattice paths, ``x_1..x_T``."""
        return self._paths

    def full_paths(self) -> np.ndarray:
        """Paths with the spot prepended, shape ``(P, T+1, d)``."""
        x0 = np.broadcast_to(self.x0, (self.n_paths, 1, self.d))
        return np.concatenate([x0, self._paths], axis=1)

    def increments(self, t: int) -> np.ndarray:
        """``x_{t+1} - x_t`` per path, shape ``(P, d)``, for t = 0..T-1."""
        nxt = self._paths[:, t]
        cur = self.x0[None, :] if t == 0 else self._paths[:, t - 1]
        return nxt - cur

    def node_of_path(self, t: int) -> np.ndarray:
        return np.arange(self.n_paths) // self.completions[t]

    def node_slice(self, t: int, j: int) -> slice:
        c = self.completions[t]
        return slice(j * c, (j + 1) * c)

    def node(self, t: int, j: int) -> Node:
        p = j * self.completions[t]
        hist = np.vstack([self.x0[None, :], self._paths[p, :t]])
        hist.setflags(write=False)
        return Node(t, j, hist)

    def nodes(self, t: int):
        for j in range(self.n_nodes[t]):
            yield self.node(t, j)

    def trading_nodes(self):
        """All nodes at dates 0..T-1, where positions are chosen."""
        for t in range(self.T):
            yield from self.nodes(t)

    def path_index(self, path) -> int:
        """Index of a path given as a ``(T, d)`` array of grid levels."""
        path = np.asarray(path, dtype=float).reshape(self.T, self.d)
        idx = 0
        for t in range(1, self.T + 1):
            for n in range(1, self.d + 1):
                g = self.grids[(t, n)]
                k = int(np.argmin(np.abs(g - path[t - 1, n - 1])))
                if abs(g[k] - path[t - 1, n - 1]) > MERGE_TOL:
                    raise KeyError(f"level {path[t - 1, n - 1]} not on grid ({t},{n})")
                idx = idx * g.size + k
        return idx


def build(model: MarketModel, extra_levels: Mapping[tuple[int, int], list] | None = None,
          max_paths: int = DEFAULT_MAX_PATHS) -> PathLattice:
    """Grid per (t, n) is the union of the marginal atoms and any extra levels."""
    extra = dict(extra_levels or {})
    for key in extra:
        if (key[1], key[0]) not in model.marginals:
            raise ValueError(f"extra levels given for unknown coordinate (t, n) = {key}")
    grids = {}
    for t in range(1, model.T + 1):
        for n in range(1, model.d + 1):
            lv = np.concatenate([model.marginal(n, t).levels,
                                 np.asarray(extra.get((t, n), []), dtype=float)])
            lv = np.sort(lv)
            keep = np.concatenate([[True], np.diff(lv) >= MERGE_TOL])
            grids[(t, n)] = lv[keep]
    count = math.prod(g.size for g in grids.values())
    if count > max_paths:
        raise LatticeSizeError(f"lattice has {count} paths, above the cap of {max_paths}")
    return PathLattice(model.d, model.T, model.x0, grids, max_paths)


class LatticeMeasure:
    """Nonnegative path weights summing to one within 1e-10."""

    def __init__(self, lattice: PathLattice, weights, tol: float = 1e-10):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size != lattice.n_paths:
            raise ValueError(f"expected {lattice.n_paths} weights, got {w.size}")
        if np.any(w < -tol):
            raise ValueError("measure has negative weights")
        if abs(w.sum() - 1.0) > tol:
            raise ValueError(f"measure has total mass {w.sum():.12g}")
        w = np.maximum(w, 0.0)
        w.setflags(write=False)
        self.lattice = lattice
        self.weights = w

    def expectation(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def support(self, tol: float = 0.0) -> np.ndarray:
        return np.flatnonzero(self.weights > tol)

    def as_dict(self, tol: float = 0.0) -> dict[str, float]:
        out = {}
        for p in self.support(tol):
            path = self.lattice.paths[p]
            key = ";".join(",".join(f"{v:.12g}" for v in row) for row in path)
            out[key] = float(self.weights[p])
        return out


def product_measure(lattice: PathLattice, model: MarketModel) -> LatticeMeasure:
    """Independent coupling of all model marginals; lies in the marginal-consistent set."""
    w = np.ones(lattice.n_paths)
    paths = lattice.paths
    for t in range(1, lattice.T + 1):
        for n in range(1, lattice.d + 1):
            m = model.marginal(n, t)
            lv = paths[:, t - 1, n - 1]
            k = np.searchsorted(m.levels, lv - MERGE_TOL)
            k = np.minimum(k, m.size - 1)
            hit = np.abs(m.levels[k] - lv) <= MERGE_TOL
            w *= np.where(hit, m.weights[k], 0.0)
    return LatticeMeasure(lattice, w / w.sum())


def marginal_of(q: LatticeMeasure, n: int, t: int) -> MarginalDistribution:
    """Law of ``x_t^n`` under ``q`` (zero-mass levels dropped, mass renormalized)."""
    lat = q.lattice
    g = lat.grids[(t, n)]
    lv = lat.paths[:, t - 1, n - 1]
    k = np.searchsorted(g, lv)
    mass = np.bincount(k, weights=q.weights, minlength=g.size)
    keep = mass > 0
    return MarginalDistribution(n, t, g[keep], mass[keep] / mass.sum())


def marginal_masses(q: LatticeMeasure | np.ndarray, lattice: PathLattice, n: int, t: int) -> np.ndarray:
    """Mass of ``q`` on each grid level of coordinate (t, n), unnormalized."""
    w = q.weights if isinstance(q, LatticeMeasure) else np.asarray(q, dtype=float)
    g = lattice.grids[(t, n)]
    k = np.searchsorted(g, lattice.paths[:, t - 1, n - 1])
    return np.bincount(k, weights=w, minlength=g.size)


def drift_mass(q: LatticeMeasure | np.ndarray, lattice: PathLattice, t: int) -> np.ndarray:
    """``sum_{paths through node} q(path) (x_{t+1} - x_t)`` for every date-t node, shape ``(N_t, d)``."""
    w = q.weights if isinstance(q, LatticeMeasure) else np.asarray(q, dtype=float)
    inc = lattice.increments(t) * w[:, None]
    return inc.reshape(lattice.n_nodes[t], lattice.completions[t], lattice.d).sum(axis=1)
