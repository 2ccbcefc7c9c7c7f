"""Marginal laws, call-price curves and the market model they assemble into."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import lp as _lp

MERGE_TOL = 1e-10
WEIGHT_TOL = 1e-12
CURVE_TOL = 1e-12
MEAN_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when market data break a structural invariant."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MarginalDistribution:
    """Discrete law of one asset at one date.

    Levels closer than ``MERGE_TOL`` are merged (weights add). Weights must be
    positive and sum to one within ``WEIGHT_TOL``.
    """

    asset_index: int
    time_index: int
    levels: np.ndarray
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        x = np.asarray(self.levels, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        name = self.label or f"marginal(asset={self.asset_index}, t={self.time_index})"
        if x.size == 0 or x.size != w.size:
            raise ValidationError(f"{name}: need the same nonzero number of levels and weights")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ValidationError(f"{name}: levels and weights must be finite")
        if np.any(x < 0):
            raise ValidationError(f"{name}: negative level {x[x < 0].min():g}")
        if np.any(w <= 0):
            raise ValidationError(f"{name}: weights must be positive")
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        keep_x, keep_w = [x[0]], [w[0]]
        for xi, wi in zip(x[1:], w[1:]):
            if xi - keep_x[-1] < MERGE_TOL:
                keep_w[-1] += wi
            else:
                keep_x.append(xi)
                keep_w.append(wi)
        total = math.fsum(keep_w)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"{name}: weights sum to {total:.12g}, not 1")
        if self.asset_index < 1 or self.time_index < 1:
            raise ValidationError(f"{name}: indices are 1-based")
        object.__setattr__(self, "levels", _frozen(keep_x))
        object.__setattr__(self, "weights", _frozen(keep_w))

    @classmethod
    def dirac(cls, asset_index: int, time_index: int, x: float) -> "MarginalDistribution":
        return cls(asset_index, time_index, [x], [1.0])

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.levels.tolist(), self.weights.tolist()))

    @property
    def size(self) -> int:
        return self.levels.size

    @property
    def mean(self) -> float:
        return float(self.weights @ self.levels)

    def call_price(self, strike) -> np.ndarray | float:
        k = np.asarray(strike, dtype=float)
        val = np.maximum(self.levels[None, :] - k.reshape(-1, 1), 0.0) @ self.weights
        return float(val[0]) if k.ndim == 0 else val

    def expectation(self, values: np.ndarray) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def same_as(self, other: "MarginalDistribution", tol: float = 0.0) -> bool:
        return (self.size == other.size
                and np.all(np.abs(self.levels - other.levels) <= tol)
                and np.all(np.abs(self.weights - other.weights) <= tol))

    def __repr__(self) -> str:
        return (f"MarginalDistribution(asset={self.asset_index}, t={self.time_index}, "
                f"atoms={self.size}, mean={self.mean:.6g})")


@dataclass(frozen=True, eq=False)
class CallCurve:
    """Sampled call prices ``K -> C(K)`` of one asset at one date.

    Interpreted as piecewise linear between the samples and equal to zero beyond
    the last strike, so the last sampled price has to be zero.
    """

    asset_index: int
    time_index: int
    strikes: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.strikes, dtype=float).reshape(-1)
        c = np.asarray(self.prices, dtype=float).reshape(-1)
        name = f"call curve(asset={self.asset_index}, t={self.time_index})"
        # a single sample (0, 0) is the point mass at zero
        if k.size < 1 or k.size != c.size:
            raise ValidationError(f"{name}: need matching, nonempty strike and price lists")
        if k[0] != 0.0:
            raise ValidationError(f"{name}: first strike must be 0, got {k[0]:g}")
        if np.any(np.diff(k) <= 0):
            raise ValidationError(f"{name}: strikes must be strictly increasing")
        if np.any(c < -CURVE_TOL):
            raise ValidationError(f"{name}: negative call price")
        slopes = np.diff(c) / np.diff(k)
        if slopes.size and slopes[0] < -1.0 - CURVE_TOL:
            raise ValidationError(
                f"{name}: slope {slopes[0]:.6g} below -1 on strikes ({k[0]:g}, {k[1]:g})")
        if np.any(slopes > CURVE_TOL):
            j = int(np.argmax(slopes > CURVE_TOL))
            raise ValidationError(f"{name}: price increases between strikes {k[j]:g} and {k[j + 1]:g}")
        # convexity in slope form; the final triple uses the zero slope beyond the last strike
        ext = np.append(slopes, 0.0)
        kk = np.append(k, k[-1] + 1.0)
        for j in range(ext.size - 1):
            if ext[j + 1] - ext[j] < -CURVE_TOL:
                raise ValidationError(
                    f"{name}: not convex at strikes ({kk[j]:g}, {kk[j + 1]:g}, {kk[j + 2]:g})")
        if abs(c[-1]) > CURVE_TOL:
            raise ValidationError(
                f"{name}: price {c[-1]:g} at the last strike {k[-1]:g}; the curve must reach 0 "
                "because it is extrapolated flat at zero")
        object.__setattr__(self, "strikes", _frozen(k))
        object.__setattr__(self, "prices", _frozen(c))

    def price_at(self, strike) -> np.ndarray | float:
        return np.interp(strike, self.strikes, self.prices, right=0.0)


def marginal_from_calls(curve: CallCurve, strike_grid: Iterable[float]) -> MarginalDistribution:
    """Law implied by the piecewise-linear call curve, with atoms on ``strike_grid``.

    Weights are the slope jumps of the interpolant: left of zero the slope is -1
    (``C(K) = E[S] - K``) and beyond the last strike it is 0.
    """
    grid = np.unique(np.concatenate([[0.0], np.asarray(list(strike_grid), dtype=float)]))
    if np.any(grid < 0):
        raise ValidationError("strike grid must be nonnegative")
    missing = [k for k in curve.strikes if not np.any(np.abs(grid - k) <= MERGE_TOL)]
    if missing:
        raise ValidationError(f"strike grid misses sample strikes {missing}")
    prices = curve.price_at(grid)
    slopes = np.diff(prices) / np.diff(grid)
    slopes = np.concatenate([[-1.0], slopes, [0.0]])
    w = np.diff(slopes)
    keep = w > WEIGHT_TOL
    return MarginalDistribution(curve.asset_index, curve.time_index, grid[keep], w[keep])


def calls_from_marginal(m: MarginalDistribution, strikes: Iterable[float]) -> CallCurve:
    """Call prices of ``m`` at ``strikes``; strike 0 is always included."""
    k = np.unique(np.concatenate([[0.0], np.asarray(list(strikes), dtype=float)]))
    c = np.asarray(m.call_price(k), dtype=float)
    c[k >= m.levels[-1]] = 0.0
    if k[-1] < m.levels[-1]:
        k = np.append(k, m.levels[-1])
        c = np.append(c, 0.0)
    return CallCurve(m.asset_index, m.time_index, k, c)


def read_call_csv(path) -> dict[tuple[int, int], CallCurve]:
    """Read ``asset,time,strike,price`` quotes into one curve per (asset, time)."""
    rows: dict[tuple[int, int], list[tuple[float, float]]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"asset", "time", "strike", "price"}
        if reader.fieldnames is None or not need <= {f.strip() for f in reader.fieldnames}:
            raise ValidationError(f"{path}: header must be asset,time,strike,price")
        for lineno, rec in enumerate(reader, start=2):
            rec = {k.strip(): v for k, v in rec.items()}
            try:
                key = (int(rec["asset"]), int(rec["time"]))
                rows[key].append((float(rec["strike"]), float(rec["price"])))
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad quote row ({exc})") from None
    out = {}
    for key, quotes in sorted(rows.items()):
        quotes.sort()
        out[key] = CallCurve(key[0], key[1], [q[0] for q in quotes], [q[1] for q in quotes])
    return out


# ---------------------------------------------------------------------------
# convex order


@dataclass(frozen=True)
class ConvexOrderResult:
    holds: bool
    kernel: np.ndarray | None = None
    reason: str = ""


def check_convex_order(m1: MarginalDistribution, m2: MarginalDistribution) -> ConvexOrderResult:
    """Decide whether a one-step martingale coupling of ``m1`` and ``m2`` exists."""
    if m1.asset_index != m2.asset_index:
        raise ValidationError("convex order compares the same asset at two dates")
    if not m1.time_index < m2.time_index:
        raise ValidationError("the first marginal must come strictly earlier")
    if abs(m1.mean - m2.mean) > MEAN_TOL:
        return ConvexOrderResult(False, None, "mean mismatch")
    x, y = m1.levels, m2.levels
    n1, n2 = x.size, y.size
    rows = []
    rhs = []
    for i in range(n1):
        r = np.zeros((n1, n2))
        r[i, :] = 1.0
        rows.append(r.ravel())
        rhs.append(m1.weights[i])
    for j in range(n2):
        r = np.zeros((n1, n2))
        r[:, j] = 1.0
        rows.append(r.ravel())
        rhs.append(m2.weights[j])
    for i in range(n1):
        r = np.zeros((n1, n2))
        r[i, :] = y - x[i]
        rows.append(r.ravel())
        rhs.append(0.0)
    prog = _lp.LinearProgram(np.zeros(n1 * n2), np.array(rows), [_lp.EQ] * len(rows),
                             np.array(rhs), np.zeros(n1 * n2), np.full(n1 * n2, np.inf))
    sol = _lp.solve(prog, _lp.FAST)
    if not sol.optimal:
        return ConvexOrderResult(False, None, "no martingale coupling")
    pi = np.maximum(sol.x.reshape(n1, n2), 0.0)
    kernel = pi / pi.sum(axis=1, keepdims=True)
    return ConvexOrderResult(True, kernel, "")


# ---------------------------------------------------------------------------
# density presets


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and 0 <= self.lo < self.hi):
            raise ValidationError(f"uniform({self.lo}, {self.hi}) needs 0 <= lo < hi")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Tent:
    """Trapezoidal density ``x/3`` on [0,1], ``1/3`` on [1,3], ``(4-x)/3`` on [3,4]."""

    def quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo = np.sqrt(6.0 * u)
        mid = 1.0 + 3.0 * (u - 1.0 / 6.0)
        hi = 4.0 - np.sqrt(6.0 * (1.0 - u))
        return np.where(u <= 1.0 / 6.0, lo, np.where(u <= 5.0 / 6.0, mid, hi))

    @property
    def mean(self) -> float:
        return 2.0


@dataclass(frozen=True)
class Dirac:
    x: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and self.x >= 0):
            raise ValidationError(f"dirac({self.x}) needs a finite nonnegative level")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), float(self.x))

    @property
    def mean(self) -> float:
        return float(self.x)


def parse_preset(text: str):
    """``"uniform(1,3)"``, ``"tent"`` or ``"dirac(2)"`` to a preset object."""
    import ast

    node = ast.parse(text.strip(), mode="eval").body
    if isinstance(node, ast.Name):
        name, args = node.id, []
    elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        try:
            args = [float(ast.literal_eval(a)) for a in node.args]
        except ValueError:
            raise ValidationError(f"preset arguments must be numbers: {text!r}") from None
    else:
        raise ValidationError(f"cannot read density preset {text!r}")
    table = {"uniform": (Uniform, 2), "tent": (Tent, 0), "dirac": (Dirac, 1)}
    if name not in table:
        raise ValidationError(f"unknown density preset {name!r}")
    ctor, nargs = table[name]
    if len(args) != nargs:
        raise ValidationError(f"{name} takes {nargs} argument(s)")
    return ctor(*args)


def discretize_density(preset, n_atoms: int, asset_index: int = 1,
                       time_index: int = 1) -> MarginalDistribution:
    """Equal-weight quantile atoms, shifted so the discrete mean is exact."""
    if isinstance(preset, str):
        preset = parse_preset(preset)
    if int(n_atoms) != n_atoms or n_atoms < 1:
        raise ValidationError(f"n_atoms must be a positive integer, got {n_atoms}")
    n = int(n_atoms)
    if isinstance(preset, Dirac):
        return MarginalDistribution.dirac(asset_index, time_index, preset.x)
    u = (np.arange(n) + 0.5) / n
    x = preset.quantile(u)
    x = x + (preset.mean - x.mean())
    if np.any(x < 0):
        raise ValidationError("mean correction pushed an atom below zero")
    return MarginalDistribution(asset_index, time_index, x, np.full(n, 1.0 / n))


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True, eq=False)
class MarketModel:
    """``d`` assets over ``T`` dates, spot ``x0`` and one marginal per (asset, date)."""

    d: int
    T: int
    x0: np.ndarray
    marginals: Mapping[tuple[int, int], MarginalDistribution] = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1 or self.T < 1:
            raise ValidationError("need at least one asset and one period")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.size != self.d or np.any(x0 <= 0) or not np.all(np.isfinite(x0)):
            raise ValidationError(f"x0 must be {self.d} strictly positive prices")
        object.__setattr__(self, "x0", _frozen(x0))
        table = dict(self.marginals)
        for (n, t), m in table.items():
            if (m.asset_index, m.time_index) != (n, t):
                raise ValidationError(f"marginal stored under {(n, t)} is indexed "
                                      f"{(m.asset_index, m.time_index)}")
        expected = {(n, t) for n in range(1, self.d + 1) for t in range(1, self.T + 1)}
        if set(table) != expected:
            missing = sorted(expected - set(table))
            extra = sorted(set(table) - expected)
            raise ValidationError(f"marginals missing {missing} / unexpected {extra}")
        object.__setattr__(self, "marginals", table)

    @classmethod
    def from_list(cls, x0, marginals: Iterable[MarginalDistribution]) -> "MarketModel":
        ms = list(marginals)
        d = max(m.asset_index for m in ms)
        T = max(m.time_index for m in ms)
        return cls(d, T, x0, {(m.asset_index, m.time_index): m for m in ms})

    def marginal(self, n: int, t: int) -> MarginalDistribution:
        return self.marginals[(n, t)]

    def mean_consistent(self, tol: float = MEAN_TOL) -> bool:
        """Whether every asset keeps the same mean across dates."""
        for n in range(1, self.d + 1):
            means = [self.marginal(n, t).mean for t in range(1, self.T + 1)]
            if max(means) - min(means) > tol:
                return False
        return True
