"""Trading constraints: per-node convex sets in vertex/ray form, and increment bounds.

A position chosen at a date-``t`` node is a vector ``delta`` in ``R^d``. Per-node
families attach a closed convex set ``conv(vertices) + cone(rays)`` containing 0
to every node; the ``Gamma`` family bounds ``|delta_t - delta_{t-1}|``
componentwise with ``delta_{-1} = 0``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import lp as _lp
from .lattice import Node, PathLattice
from .payoff import Payoff, bind, evaluate

RAY_TOL = 1e-12
MEMBER_TOL = 1e-9


class ConstraintError(ValueError):
    pass


class NonApproximableWarning(UserWarning):
    """The family is accepted, but lattice prices may differ from continuum ones."""


def _membership_residual(vertices: np.ndarray, rays: np.ndarray, delta: np.ndarray) -> float:
    """Smallest L1 distance between ``delta`` and the represented set, by LP."""
    kv, d = vertices.shape
    kr = rays.shape[0]
    b = _lp.LpBuilder("min")
    lam = b.add_vars([f"lam{j}" for j in range(kv)])
    rho = b.add_vars([f"rho{j}" for j in range(kr)])
    sp = b.add_vars([f"sp{i}" for i in range(d)], cost=1.0)
    sm = b.add_vars([f"sm{i}" for i in range(d)], cost=1.0)
    b.add_row(lam, np.ones(kv), "=", 1.0, "convex")
    for i in range(d):
        idx = np.concatenate([lam, rho, [sp[i], sm[i]]])
        vals = np.concatenate([vertices[:, i], rays[:, i], [1.0, -1.0]])
        b.add_row(idx, vals, "=", float(delta[i]), f"coord{i}")
    sol = _lp.solve(b.build())
    return sol.objective if sol.optimal else math.inf


@dataclass(frozen=True, eq=False)
class NodeSet:
    """``conv(vertices) + cone(rays)`` in ``R^d``; must contain the origin."""

    vertices: np.ndarray
    rays: np.ndarray = None

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if V.size == 0:
            raise ConstraintError("a node set needs at least one vertex")
        d = V.shape[1]
        R = np.zeros((0, d)) if self.rays is None or len(self.rays) == 0 else \
            np.atleast_2d(np.asarray(self.rays, dtype=float))
        if R.shape[1] != d:
            raise ConstraintError("vertices and rays differ in dimension")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(R))):
            raise ConstraintError("vertices and rays must be finite")
        R = R[np.any(R != 0.0, axis=1)]
        V.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "rays", R)
        if not np.any(np.all(V == 0.0, axis=1)):
            if _membership_residual(V, R, np.zeros(d)) > MEMBER_TOL:
                raise ConstraintError("the node set does not contain 0")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def support(self, m) -> float:
        return support_function(self, m)

    def contains(self, delta, tol: float = MEMBER_TOL) -> bool:
        return membership(self, delta, tol)

    def sample(self, rng: np.random.Generator, k: int, ray_scale: float = 1.0) -> np.ndarray:
        """``k`` random points of the set (convex weights plus bounded ray multiples)."""
        lam = rng.dirichlet(np.ones(self.vertices.shape[0]), size=k)
        pts = lam @ self.vertices
        if self.rays.shape[0]:
            pts = pts + rng.random((k, self.rays.shape[0])) * ray_scale @ self.rays
        return pts


def support_function(k: NodeSet, m) -> float:
    """``sup_{delta in k} delta . m``; +inf when a ray has positive slope."""
    m = np.asarray(m, dtype=float).reshape(k.dim)
    if k.rays.shape[0] and np.any(k.rays @ m > RAY_TOL):
        return math.inf
    return max(0.0, float(np.max(k.vertices @ m)))


def membership(k: NodeSet, delta, tol: float = MEMBER_TOL) -> bool:
    delta = np.asarray(delta, dtype=float).reshape(k.dim)
    return _membership_residual(k.vertices, k.rays, delta) <= tol


def box(lo, hi) -> NodeSet:
    """Axis-aligned box with ``lo <= 0 <= hi``; infinite sides become rays."""
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    if np.any(lo > 0) or np.any(hi < 0):
        raise ConstraintError("box must contain 0")
    d = lo.size
    fin_lo = np.where(np.isfinite(lo), lo, 0.0)
    fin_hi = np.where(np.isfinite(hi), hi, 0.0)
    corners = [[]]
    for i in range(d):
        opts = sorted({fin_lo[i], fin_hi[i]})
        corners = [c + [v] for c in corners for v in opts]
    rays = []
    eye = np.eye(d)
    for i in range(d):
        if not np.isfinite(hi[i]):
            rays.append(eye[i])
        if not np.isfinite(lo[i]):
            rays.append(-eye[i])
    return NodeSet(np.array(corners, dtype=float), np.array(rays) if rays else None)


def inscribed_polygon(n_sides: int, center=(0.0, 0.0), radius: float = 1.0,
                      phase: float = 0.0) -> NodeSet:
    """Regular polygon inscribed in a disk, vertex ``k`` at angle ``phase + 2 pi k / n``."""
    th = phase + 2 * np.pi * np.arange(n_sides) / n_sides
    V = np.stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)], axis=1)
    return NodeSet(V)


def disk_polygon(k: int = 5) -> NodeSet:
    """``2^k``-gon inside the disk of radius 1 centred at (0, 1), with the origin as a vertex."""
    n = 2 ** k
    th = 2 * np.pi * np.arange(n) / n
    V = np.stack([np.sin(th), 1.0 - np.cos(th)], axis=1)
    V[0] = 0.0
    return NodeSet(V)


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True, eq=False)
class PerNode:
    """A rule mapping every trading node to a :class:`NodeSet`."""

    rule: Callable[[Node], NodeSet]
    d: int
    name: str = "per_node"
    non_approximable: bool = False

    def node_set(self, node: Node) -> NodeSet:
        k = self.rule(node)
        if k.dim != self.d:
            raise ConstraintError(f"{node}: node set has dimension {k.dim}, expected {self.d}")
        return k

    def validate(self, lattice: PathLattice) -> None:
        for node in lattice.trading_nodes():
            self.node_set(node)


@dataclass(frozen=True, eq=False)
class Gamma:
    gamma: np.ndarray
    name: str = "gamma"
    non_approximable: bool = False

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float).reshape(-1)
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ConstraintError("Gamma bounds must be finite and nonnegative")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def d(self) -> int:
        return self.gamma.size

    def validate(self, lattice: PathLattice) -> None:
        if lattice.d != self.d:
            raise ConstraintError(f"Gamma has {self.d} bounds for {lattice.d} assets")


ConstraintSpec = PerNode | Gamma


def _constant(k: NodeSet, name: str, **kw) -> PerNode:
    return PerNode(lambda node, _k=k: _k, k.dim, name, **kw)


def unconstrained(d: int) -> PerNode:
    eye = np.eye(d)
    return _constant(NodeSet(np.zeros((1, d)), np.vstack([eye, -eye])), "unconstrained")


def is_unconstrained(spec) -> bool:
    return isinstance(spec, PerNode) and spec.name == "unconstrained"


def shortselling(c) -> PerNode:
    """``delta^n >= -c^n``: one vertex ``-c`` and the rays ``+e_n``.

    ``c`` is a length-d vector, or a ``(T, d)`` table with one row per trading date.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ConstraintError("shortselling bounds must be finite and nonnegative")
    if c.ndim <= 1:
        c = c.reshape(-1)
        return _constant(NodeSet(-c[None, :], np.eye(c.size)), "shortselling")
    sets = [NodeSet(-row[None, :], np.eye(c.shape[1])) for row in c]

    def rule(node: Node):
        if node.t >= len(sets):
            raise ConstraintError(f"{node}: no shortselling row for date {node.t}")
        return sets[node.t]

    return PerNode(rule, c.shape[1], "shortselling")


def non_tradable(d: int, d_prime: int) -> PerNode:
    """Assets ``1..d'`` cannot be traded; the others are unconstrained."""
    if not 0 <= d_prime <= d:
        raise ConstraintError(f"d' = {d_prime} outside 0..{d}")
    if d_prime == 0:
        return unconstrained(d)
    eye = np.eye(d)
    rays = np.vstack([eye[d_prime:], -eye[d_prime:]]) if d_prime < d else None
    return _constant(NodeSet(np.zeros((1, d)), rays), "non_tradable")


def relative_drawdown(node: Node) -> np.ndarray:
    """``x_t / max(x_0, ..., x_t)`` per asset."""
    return node.x / node.history.max(axis=0)


def drawdown(a_exprs, b_exprs, d: int) -> PerNode:
    """Box ``[a(xr), b(xr)]`` per node, ``xr`` the relative drawdown.

    Expressions use ``x[1][n]`` for component ``n`` of the relative drawdown.
    """
    a_exprs = [a_exprs] * d if isinstance(a_exprs, (str, int, float)) else list(a_exprs)
    b_exprs = [b_exprs] * d if isinstance(b_exprs, (str, int, float)) else list(b_exprs)
    if len(a_exprs) != d or len(b_exprs) != d:
        raise ConstraintError("drawdown needs one lower and one upper expression per asset")
    fa = [bind(str(e), d, 1) for e in a_exprs]
    fb = [bind(str(e), d, 1) for e in b_exprs]

    def rule(node: Node):
        xr = relative_drawdown(node)[None, :]
        lo = np.array([evaluate(f, xr) for f in fa])
        hi = np.array([evaluate(f, xr) for f in fb])
        if np.any(lo > 0) or np.any(hi < 0):
            raise ConstraintError(f"{node}: drawdown bounds [{lo}, {hi}] do not contain 0")
        return box(lo, hi)

    return PerNode(rule, d, "drawdown")


def node_table(table: Mapping, d: int, default: NodeSet | None = None,
               non_approximable: bool = False) -> PerNode:
    """Sets keyed by node path ``()`` for date 0, ``((x_1..),)`` for date 1, and so on."""
    norm = {}
    for key, k in table.items():
        norm[tuple(tuple(round(float(v), 10) for v in row) for row in key)] = k

    def rule(node: Node):
        key = tuple(tuple(round(v, 10) for v in row) for row in node.key())
        if key in norm:
            return norm[key]
        if default is None:
            raise ConstraintError(f"{node}: no set listed and no default")
        return default

    spec = PerNode(rule, d, "per_node", non_approximable)
    if non_approximable:
        warnings.warn("per-node constraint flagged non_approximable: lattice values may differ "
                      "from continuum ones", NonApproximableWarning, stacklevel=2)
    return spec


def _set_from_json(obj, d: int) -> NodeSet:
    V = np.asarray(obj["vertices"], dtype=float).reshape(-1, d)
    R = obj.get("rays") or None
    return NodeSet(V, None if R is None else np.asarray(R, dtype=float).reshape(-1, d))


def node_table_from_json(path, d: int) -> PerNode:
    """Load ``{"d":..,"non_approximable":..,"default":{..},"nodes":[{"path":..,"vertices":..,"rays":..}]}``.

    A ``"polygon": {"disk_k": k}`` entry in place of vertices takes the disk polygon.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if int(doc.get("d", d)) != d:
        raise ConstraintError(f"{path}: table is for d = {doc['d']}, model has d = {d}")

    def read(obj):
        if "polygon" in obj:
            return disk_polygon(int(obj["polygon"].get("disk_k", 5)))
        return _set_from_json(obj, d)

    table = {tuple(tuple(row) for row in entry["path"]): read(entry) for entry in doc.get("nodes", [])}
    default = read(doc["default"]) if "default" in doc else None
    return node_table(table, d, default, bool(doc.get("non_approximable", False)))


# ---------------------------------------------------------------------------
# primal encoding


@dataclass
class NodeBlock:
    """Position at one node as ``offset + M @ x[idx]`` in LP variables ``x``."""

    offset: np.ndarray
    M: np.ndarray
    idx: np.ndarray
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    rho: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    free: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class StrategyEncoding:
    blocks: list[list[NodeBlock]]  # blocks[t][j]
    d: int

    def positions(self, x: np.ndarray) -> list[np.ndarray]:
        """Positions per date as arrays ``(N_t, d)``."""
        out = []
        for row in self.blocks:
            out.append(np.array([b.offset + b.M @ x[b.idx] for b in row]).reshape(len(row), self.d))
        return out

    def decomposition(self, x: np.ndarray, t: int, j: int) -> dict:
        b = self.blocks[t][j]
        return {"lambda": x[b.lam].tolist(), "rho": x[b.rho].tolist(), "free": x[b.free].tolist()}


def _per_node_block(builder: _lp.LpBuilder, k: NodeSet, tag: str) -> NodeBlock:
    V, R = k.vertices, k.rays
    d = k.dim
    # opposite ray pairs collapse into one free coefficient
    used = np.zeros(R.shape[0], dtype=bool)
    free_dirs, cone_dirs = [], []
    for i in range(R.shape[0]):
        if used[i]:
            continue
        used[i] = True
        partner = -1
        for j in range(i + 1, R.shape[0]):
            if not used[j] and np.allclose(R[j], -R[i], atol=0.0, rtol=0.0):
                partner = j
                break
        if partner >= 0:
            used[partner] = True
            free_dirs.append(R[i])
        else:
            cone_dirs.append(R[i])
    cols, ids = [], []
    lam = rho = free = np.zeros(0, dtype=np.int64)
    if V.shape[0] == 1:
        offset = V[0].copy()
    else:
        offset = np.zeros(d)
        lam = builder.add_vars([f"{tag}.lam{j}" for j in range(V.shape[0])])
        builder.add_row(lam, np.ones(V.shape[0]), "=", 1.0, f"{tag}.convex")
        cols.append(V.T)
        ids.append(lam)
    if cone_dirs:
        rho = builder.add_vars([f"{tag}.rho{j}" for j in range(len(cone_dirs))])
        cols.append(np.array(cone_dirs).T)
        ids.append(rho)
    if free_dirs:
        free = builder.add_vars([f"{tag}.free{j}" for j in range(len(free_dirs))], lb=-math.inf)
        cols.append(np.array(free_dirs).T)
        ids.append(free)
    M = np.hstack(cols) if cols else np.zeros((d, 0))
    idx = np.concatenate(ids) if ids else np.zeros(0, dtype=np.int64)
    return NodeBlock(offset, M, idx.astype(np.int64), lam, rho, free)


def emit_primal_constraints(spec, lattice: PathLattice, builder: _lp.LpBuilder) -> StrategyEncoding:
    """Add position variables (and their rows) for every trading node to ``builder``."""
    spec.validate(lattice)
    d = lattice.d
    blocks: list[list[NodeBlock]] = []
    if isinstance(spec, PerNode):
        for t in range(lattice.T):
            row = []
            for node in lattice.nodes(t):
                row.append(_per_node_block(builder, spec.node_set(node), f"D{t}.{node.index}"))
            blocks.append(row)
        return StrategyEncoding(blocks, d)
    g = spec.gamma
    eye = np.eye(d)
    for t in range(lattice.T):
        row = []
        for j in range(lattice.n_nodes[t]):
            bound = (t + 1) * g
            idx = builder.add_vars([f"D{t}.{j}.{n}" for n in range(d)], lb=-bound, ub=bound)
            row.append(NodeBlock(np.zeros(d), eye.copy(), idx, free=idx))
            if t == 0:
                continue
            parent = blocks[t - 1][j // (lattice.n_nodes[t] // lattice.n_nodes[t - 1])]
            for n in range(d):
                pair = [idx[n], parent.idx[n]]
                builder.add_row(pair, [1.0, -1.0], "<=", g[n], f"G{t}.{j}.{n}.up")
                builder.add_row(pair, [1.0, -1.0], ">=", -g[n], f"G{t}.{j}.{n}.dn")
        blocks.append(row)
    return StrategyEncoding(blocks, d)


def gain_matrix(enc: StrategyEncoding, lattice: PathLattice, n_vars: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``(P, n_vars)`` coefficients and ``(P,)`` constants of ``(delta . x)_T`` per path."""
    G = np.zeros((lattice.n_paths, n_vars))
    const = np.zeros(lattice.n_paths)
    for t in range(lattice.T):
        inc = lattice.increments(t)
        for j, b in enumerate(enc.blocks[t]):
            sl = lattice.node_slice(t, j)
            if b.idx.size:
                G[sl, b.idx] += inc[sl] @ b.M
            const[sl] += inc[sl] @ b.offset
    return G, const


def gamma_supremum(spec: Gamma, lattice: PathLattice, drift: list[np.ndarray]) -> tuple[float, np.ndarray | None]:
    """``sup`` of ``sum_t sum_nodes delta . drift`` over Gamma-feasible positions, by LP.

    ``drift[t]`` is the ``(N_t, d)`` drift mass at date ``t``. Returns the value and
    the maximizing positions flattened in encoding order.
    """
    b = _lp.LpBuilder("max")
    enc = emit_primal_constraints(spec, lattice, b)
    for t in range(lattice.T):
        for j, blk in enumerate(enc.blocks[t]):
            for n in range(lattice.d):
                b.set_cost(int(blk.idx[n]), float(drift[t][j, n]))
    sol = _lp.solve(b.build(), _lp.FAST)
    if not sol.optimal:
        return math.inf, None
    return sol.objective, sol.x
