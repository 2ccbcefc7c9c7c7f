"""Dense linear programming: model, two-phase bounded revised simplex, certificates.

Every LP in the package goes through :func:`solve`. The solver works on

    min/max  c @ x   s.t.  A[i] @ x  (<=, =, >=)  b[i],   lb <= x <= ub

and returns primal values, row multipliers and reduced costs. Row multipliers
are reported as sensitivities of the optimal objective with respect to the
right-hand side, so for a ``min`` problem a ``>=`` row has a nonnegative
multiplier and for a ``max`` problem a ``<=`` row has a nonnegative one.

Infeasible problems come back with a Farkas multiplier vector, unbounded ones
with an improving ray; both are checked by :func:`verify_farkas` and
:func:`verify_ray`, which only look at the ``LinearProgram`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

LE, EQ, GE = -1, 0, 1
_REL = {"<=": LE, "=": EQ, "==": EQ, ">=": GE, LE: LE, EQ: EQ, GE: GE}
_REL_TEXT = {LE: "<=", EQ: "=", GE: ">="}


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-9
    optimality: float = 1e-9
    pivot: float = 1e-9
    report_gap: float = 1e-7


TOL = Tolerances()


@dataclass(frozen=True)
class SolverOptions:
    rule: str = "bland"  # or "dantzig"
    max_iter: int = 1_000_000
    refactor_every: int = 64
    # dantzig falls back to bland after this many degenerate pivots in a row
    stall_limit: int = 50
    # "auto" solves tall problems (rows > 2 * columns) through their explicit dual
    dualize: str = "auto"  # "auto" | "never" | "always"
    tol: Tolerances = TOL


# Dantzig pricing with the Bland fallback on degenerate stalls, still cycle-free;
# the finance layers use it because Bland alone needs ~40x more pivots there.
FAST = SolverOptions(rule="dantzig")


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    rel: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    sense: str = "min"
    var_names: tuple[str, ...] = ()
    row_names: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n) if n else np.zeros((len(self.b), 0))
        m = A.shape[0]
        rel = np.array([_REL[r] for r in self.rel], dtype=np.int8).reshape(m)
        b = np.asarray(self.b, dtype=float).reshape(m)
        lb = np.asarray(self.lb, dtype=float).reshape(n)
        ub = np.asarray(self.ub, dtype=float).reshape(n)
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("objective, matrix and rhs must be finite")
        if np.any(lb > ub):
            j = int(np.argmax(lb > ub))
            raise ValueError(f"variable {j} has lb > ub")
        if np.any(lb == np.inf) or np.any(ub == -np.inf):
            raise ValueError("lower bounds must be < +inf and upper bounds > -inf")
        for arr in (c, A, rel, b, lb, ub):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rel", rel)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        vn = tuple(self.var_names) or tuple(f"x{j}" for j in range(n))
        rn = tuple(self.row_names) or tuple(f"r{i}" for i in range(m))
        if len(vn) != n or len(rn) != m:
            raise ValueError("name lists do not match the problem dimensions")
        object.__setattr__(self, "var_names", vn)
        object.__setattr__(self, "row_names", rn)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b.size

    def scaled(self, factor: float) -> "LinearProgram":
        """Same feasible set, objective multiplied by ``factor``."""
        return LinearProgram(self.c * factor, self.A, self.rel, self.b, self.lb, self.ub,
                             self.sense, self.var_names, self.row_names)


class LpBuilder:
    """Incremental construction of a :class:`LinearProgram` with named columns."""

    def __init__(self, sense: str = "min"):
        self.sense = sense
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._names: list[str] = []
        self._rows: list[tuple[np.ndarray, np.ndarray]] = []
        self._rel: list[int] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self._dense: list[tuple[int, np.ndarray]] = []

    @property
    def n_vars(self) -> int:
        return len(self._c)

    @property
    def n_rows(self) -> int:
        return len(self._rhs)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, cost: float = 0.0) -> int:
        self._c.append(float(cost))
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._names.append(name)
        return len(self._c) - 1

    def add_vars(self, names: Sequence[str], lb=0.0, ub=math.inf, cost=0.0) -> np.ndarray:
        k = len(names)
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (k,))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (k,))
        cost = np.broadcast_to(np.asarray(cost, dtype=float), (k,))
        start = len(self._c)
        self._c.extend(cost.tolist())
        self._lb.extend(lb.tolist())
        self._ub.extend(ub.tolist())
        self._names.extend(names)
        return np.arange(start, start + k)

    def set_cost(self, j: int, cost: float) -> None:
        self._c[j] = float(cost)

    def add_row(self, idx, vals, rel, rhs: float, name: str | None = None) -> int:
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        vals = np.asarray(vals, dtype=float).reshape(-1)
        if idx.size != vals.size:
            raise ValueError("index and value arrays differ in length")
        self._rows.append((idx, vals))
        self._rel.append(_REL[rel])
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"r{len(self._rhs) - 1}")
        return len(self._rhs) - 1

    def add_dense_rows(self, block, rel, rhs, names: Sequence[str] | None = None) -> np.ndarray:
        """Append rows given as a dense ``(k, n_cols)`` block over the first columns."""
        block = np.atleast_2d(np.asarray(block, dtype=float))
        k = block.shape[0]
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (k,))
        start = len(self._rhs)
        for i in range(k):
            self._rows.append((np.zeros(0, dtype=np.int64), np.zeros(0)))
            self._rel.append(_REL[rel])
            self._rhs.append(float(rhs[i]))
            self._row_names.append(names[i] if names is not None else f"r{start + i}")
        self._dense.append((start, block))
        return np.arange(start, start + k)

    def build(self) -> LinearProgram:
        n, m = len(self._c), len(self._rhs)
        A = np.zeros((m, n))
        for i, (idx, vals) in enumerate(self._rows):
            if idx.size:
                np.add.at(A[i], idx, vals)
        for start, block in self._dense:
            A[start:start + block.shape[0], :block.shape[1]] += block
        return LinearProgram(np.array(self._c), A, self._rel, np.array(self._rhs),
                             np.array(self._lb), np.array(self._ub), self.sense,
                             tuple(self._names), tuple(self._row_names))


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    objective: float = math.nan
    farkas: np.ndarray | None = None
    ray: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class VerifyReport:
    ok: bool
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    complementarity: float = 0.0
    gap: float = 0.0
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------------------
# solver


class _Simplex:
    """Bounded-variable revised simplex on ``A x - r = 0`` with logical ``r``.

    Column layout: structurals ``0..n-1``, logicals ``n..n+m-1`` (column ``-e_i``),
    artificials ``n+m..`` (column ``s_k e_{row_k}``). The basis inverse is kept
    explicitly and refreshed every ``refactor_every`` pivots.
    """

    def __init__(self, A, lo, hi, opts: SolverOptions):
        self.A = A
        self.m, self.n = A.shape
        self.opts = opts
        self.tol = opts.tol
        self.lo = lo
        self.hi = hi
        self.art_row = np.zeros(0, dtype=np.int64)
        self.art_sign = np.zeros(0)

    # column access -------------------------------------------------------
    def column(self, j: int) -> np.ndarray:
        n, m = self.n, self.m
        if j < n:
            return self.A[:, j]
        col = np.zeros(m)
        if j < n + m:
            col[j - n] = -1.0
        else:
            k = j - n - m
            col[self.art_row[k]] = self.art_sign[k]
        return col

    def basis_matrix(self) -> np.ndarray:
        return np.column_stack([self.column(j) for j in self.basis])

    def reduced_costs(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        n, m = self.n, self.m
        d = np.empty(cost.size)
        d[:n] = cost[:n] - y @ self.A
        d[n:n + m] = cost[n:n + m] + y
        if cost.size > n + m:
            d[n + m:] = cost[n + m:] - self.art_sign * y[self.art_row]
        return d

    # setup ---------------------------------------------------------------
    def start(self):
        n, m = self.n, self.m
        lo, hi = self.lo, self.hi
        x = np.where(np.isfinite(lo[:n]), lo[:n], np.where(np.isfinite(hi[:n]), hi[:n], 0.0))
        r = self.A @ x
        rlo, rhi = lo[n:], hi[n:]
        ftol = self.tol.feasibility
        basis = np.empty(m, dtype=np.int64)
        value = np.concatenate([x, r])
        art_rows, art_sign, art_val = [], [], []
        for i in range(m):
            if rlo[i] - ftol <= r[i] <= rhi[i] + ftol:
                basis[i] = n + i
            else:
                beta = rlo[i] if r[i] < rlo[i] else rhi[i]
                value[n + i] = beta
                s = 1.0 if beta - r[i] > 0 else -1.0
                art_rows.append(i)
                art_sign.append(s)
                art_val.append(abs(beta - r[i]))
                basis[i] = n + m + len(art_rows) - 1
        self.art_row = np.array(art_rows, dtype=np.int64)
        self.art_sign = np.array(art_sign, dtype=float)
        k = len(art_rows)
        self.lo = np.concatenate([lo, np.zeros(k)])
        self.hi = np.concatenate([hi, np.full(k, np.inf)])
        self.value = np.concatenate([value, np.array(art_val)])
        self.basis = basis
        self.is_basic = np.zeros(n + m + k, dtype=bool)
        self.is_basic[basis] = True
        self.refactor()

    def refactor(self):
        B = self.basis_matrix()
        self.Binv = np.linalg.inv(B)
        nb = ~self.is_basic
        nb_idx = np.flatnonzero(nb)
        rhs = np.zeros(self.m)
        for j in nb_idx:
            v = self.value[j]
            if v != 0.0:
                rhs -= self.column(j) * v
        self.value[self.basis] = self.Binv @ rhs
        self.since_refactor = 0

    # main loop -----------------------------------------------------------
    def run(self, cost: np.ndarray, max_iter: int) -> str:
        tol = self.tol
        lo, hi, value = self.lo, self.hi, self.value
        rule = self.opts.rule
        degenerate_streak = 0
        fixed = (hi - lo) <= 0.0
        while True:
            if self.iterations >= max_iter:
                return "iteration_limit"
            y = cost[self.basis] @ self.Binv
            d = self.reduced_costs(cost, y)
            nb = ~self.is_basic & ~fixed
            at_lo = value <= lo + tol.feasibility
            at_hi = value >= hi - tol.feasibility
            can_up = nb & ~at_hi & (d < -tol.optimality)
            can_dn = nb & ~at_lo & (d > tol.optimality)
            eligible = can_up | can_dn
            if not eligible.any():
                self.y = y
                self.d = d
                return "optimal"
            use_bland = rule == "bland" or degenerate_streak >= self.opts.stall_limit
            if use_bland:
                j = int(np.argmax(eligible))
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                j = int(np.argmax(score))
            direction = 1.0 if can_up[j] else -1.0
            alpha = self.Binv @ self.column(j)
            # basic i moves by -direction * theta * alpha[i]
            rate = direction * alpha
            xb = value[self.basis]
            lb_b = lo[self.basis]
            ub_b = hi[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = rate > tol.pivot
                inc = rate < -tol.pivot
                ratio = np.full(self.m, np.inf)
                ratio[dec] = (xb[dec] - lb_b[dec]) / rate[dec]
                ratio[inc] = (ub_b[inc] - xb[inc]) / -rate[inc]
            ratio = np.maximum(ratio, 0.0)
            span = hi[j] - lo[j]
            theta = float(ratio.min()) if self.m else np.inf
            if span <= theta:
                # bound flip of the entering variable
                if not np.isfinite(span):
                    self.ray_col = j
                    self.ray_dir = direction
                    self.ray_alpha = alpha
                    return "unbounded"
                value[j] += direction * span
                value[self.basis] = xb - span * rate
                self.iterations += 1
                degenerate_streak = 0
                continue
            if not np.isfinite(theta):
                self.ray_col = j
                self.ray_dir = direction
                self.ray_alpha = alpha
                return "unbounded"
            ties = np.flatnonzero(ratio <= theta + 1e-12 * max(1.0, theta))
            if use_bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(rate[ties]))])
            leaving = self.basis[r]
            value[self.basis] = xb - theta * rate
            value[j] += direction * theta
            value[leaving] = lo[leaving] if rate[r] > 0 else hi[leaving]
            # pivot
            piv = alpha[r]
            row_r = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row_r)
            self.Binv[r] = row_r
            self.basis[r] = j
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self.iterations += 1
            degenerate_streak = degenerate_streak + 1 if theta <= tol.feasibility else 0
            self.since_refactor += 1
            if self.since_refactor >= self.opts.refactor_every:
                self.refactor()


def solve(lp: LinearProgram, options: SolverOptions | None = None) -> LpSolution:
    """Solve ``lp`` with the two-phase revised simplex.

    Status codes are returned, never raised: ``optimal``, ``infeasible``
    (with ``farkas``), ``unbounded`` (with ``ray``) or ``iteration_limit``.
    """
    opts = options or SolverOptions()
    tall = lp.n_rows > 2 * max(lp.n_vars, 1)
    if opts.dualize == "always" or (opts.dualize == "auto" and tall):
        sol = _solve_via_dual(lp, opts)
        if sol is not None:
            return sol
    return _solve_direct(lp, opts)


def dual_program(lp: LinearProgram) -> tuple[LinearProgram, np.ndarray, np.ndarray]:
    """Explicit LP dual of ``lp`` with every finite bound turned into a row.

    For ``min c x`` over rows ``G x rel h`` (structural rows first, then bound rows)
    with ``x`` free, the dual is ``max h y`` s.t. ``G^T y = c`` with sign-constrained
    ``y``. Returns the dual and the indices of the lower and upper bound rows.
    """
    n = lp.n_vars
    c = lp.c if lp.sense == "min" else -lp.c
    lo_idx = np.flatnonzero(np.isfinite(lp.lb))
    up_idx = np.flatnonzero(np.isfinite(lp.ub))
    eye = np.eye(n)
    G = np.vstack([lp.A, eye[lo_idx], eye[up_idx]])
    h = np.concatenate([lp.b, lp.lb[lo_idx], lp.ub[up_idx]])
    rel = np.concatenate([lp.rel, np.full(lo_idx.size, GE), np.full(up_idx.size, LE)])
    ylo = np.where(rel == GE, 0.0, -np.inf)
    yhi = np.where(rel == LE, 0.0, np.inf)
    dual = LinearProgram(h, G.T, np.full(n, EQ), c, ylo, yhi, "max")
    return dual, lo_idx, up_idx


def _solve_via_dual(lp: LinearProgram, opts: SolverOptions) -> LpSolution | None:
    """Optimal and infeasible outcomes are read off the dual; other cases return None."""
    dual, _, _ = dual_program(lp)
    inner = SolverOptions(opts.rule, opts.max_iter, opts.refactor_every, opts.stall_limit,
                          "never", opts.tol)
    ds = _solve_direct(dual, inner)
    m = lp.n_rows
    if ds.status == "optimal":
        x = np.clip(ds.duals, lp.lb, lp.ub)
        y = ds.x[:m]
        duals = y if lp.sense == "min" else -y
        reduced = lp.c - duals @ lp.A
        return LpSolution("optimal", x=x, duals=duals, reduced_costs=reduced,
                          objective=float(lp.c @ x), iterations=ds.iterations)
    if ds.status == "unbounded":
        # an improving dual ray is a Farkas certificate, bound parts fold into the box
        y = ds.ray[:m].copy()
        if verify_farkas(lp, y, tol=opts.tol.feasibility):
            return LpSolution("infeasible", farkas=y, iterations=ds.iterations)
    return None


def _solve_direct(lp: LinearProgram, opts: SolverOptions) -> LpSolution:
    tol = opts.tol
    n, m = lp.n_vars, lp.n_rows
    c = lp.c if lp.sense == "min" else -lp.c

    # empty rows are decided on the spot and dropped
    empty = ~np.any(lp.A != 0.0, axis=1) if n else np.ones(m, dtype=bool)
    for i in np.flatnonzero(empty):
        rel, b = lp.rel[i], lp.b[i]
        bad = (rel == GE and b > tol.feasibility) or (rel == LE and b < -tol.feasibility) \
            or (rel == EQ and abs(b) > tol.feasibility)
        if bad:
            y = np.zeros(m)
            y[i] = 1.0 if rel == GE or (rel == EQ and b > 0) else -1.0
            return LpSolution("infeasible", farkas=y)
    keep = np.flatnonzero(~empty)
    A = lp.A[keep]
    rel = lp.rel[keep]
    b = lp.b[keep]
    mk = keep.size

    rlo = np.where(rel == LE, -np.inf, b)
    rhi = np.where(rel == GE, np.inf, b)
    lo = np.concatenate([lp.lb, rlo])
    hi = np.concatenate([lp.ub, rhi])

    sx = _Simplex(A, lo, hi, opts)
    sx.iterations = 0
    sx.start()
    k = sx.art_row.size
    if k:
        cost1 = np.zeros(n + mk + k)
        cost1[n + mk:] = 1.0
        status = sx.run(cost1, opts.max_iter)
        if status == "iteration_limit":
            return LpSolution(status, iterations=sx.iterations)
        infeas = float(sx.value[n + mk:].sum())
        scale = 1.0 + float(np.abs(b).max(initial=0.0))
        if infeas > tol.feasibility * scale:
            y = np.zeros(m)
            y[keep] = sx.y
            return LpSolution("infeasible", farkas=y, iterations=sx.iterations)
        # artificials are frozen at zero for phase two
        sx.hi[n + mk:] = 0.0
        sx.value[n + mk:] = np.clip(sx.value[n + mk:], 0.0, 0.0)
        sx.refactor()
    cost2 = np.concatenate([c, np.zeros(mk + k)])
    status = sx.run(cost2, opts.max_iter)
    if status == "iteration_limit":
        return LpSolution(status, iterations=sx.iterations)
    if status == "unbounded":
        ray_full = np.zeros(n + mk + k)
        ray_full[sx.ray_col] = sx.ray_dir
        ray_full[sx.basis] = -sx.ray_dir * sx.ray_alpha
        return LpSolution("unbounded", ray=ray_full[:n].copy(), iterations=sx.iterations)
    x = sx.value[:n].copy()
    y_int = np.zeros(m)
    y_int[keep] = sx.y
    duals = y_int if lp.sense == "min" else -y_int
    reduced = lp.c - duals @ lp.A
    return LpSolution("optimal", x=x, duals=duals, reduced_costs=reduced,
                      objective=float(lp.c @ x), iterations=sx.iterations)


# ---------------------------------------------------------------------------
# independent checks


def _as_min(lp: LinearProgram, duals: np.ndarray):
    """Objective and multipliers translated to the ``min`` convention."""
    if lp.sense == "min":
        return lp.c, duals
    return -lp.c, -duals


def verify(lp: LinearProgram, sol: LpSolution, tol: float = 1e-8) -> VerifyReport:
    """Recompute KKT conditions of an optimal ``sol`` from the raw problem data.

    Checks primal feasibility, row-multiplier signs, reduced-cost signs against the
    active bounds, complementary slackness and the primal/dual objective gap.
    """
    if sol.status != "optimal":
        return VerifyReport(False, violations=[f"status {sol.status}"])
    x, y = np.asarray(sol.x, float), np.asarray(sol.duals, float)
    viol: list[str] = []
    scale = 1.0 + np.abs(lp.A).sum(axis=1) * (1.0 + np.abs(x).max(initial=0.0))
    ax = lp.A @ x
    res = np.zeros(lp.n_rows)
    res = np.where(lp.rel == GE, np.maximum(lp.b - ax, 0.0), res)
    res = np.where(lp.rel == LE, np.maximum(ax - lp.b, 0.0), res)
    res = np.where(lp.rel == EQ, np.abs(ax - lp.b), res)
    bres = np.maximum(lp.lb - x, 0.0) + np.maximum(x - lp.ub, 0.0)
    primal = float(max(np.max(res / scale, initial=0.0), np.max(bres, initial=0.0)))
    for i in np.flatnonzero(res > tol * scale):
        viol.append(f"row {lp.row_names[i]} violated by {res[i]:.3g}")
    for j in np.flatnonzero(bres > tol):
        viol.append(f"variable {lp.var_names[j]} outside bounds by {bres[j]:.3g}")

    c, ym = _as_min(lp, y)
    # multiplier signs for the min form
    sign_bad = np.where(lp.rel == GE, np.maximum(-ym, 0.0),
                        np.where(lp.rel == LE, np.maximum(ym, 0.0), 0.0))
    d = c - ym @ lp.A
    dpos, dneg = np.maximum(d, 0.0), np.maximum(-d, 0.0)
    # positive reduced cost needs a finite lower bound, negative needs a finite upper
    dual_bad = np.where(np.isfinite(lp.lb), 0.0, dpos) + np.where(np.isfinite(lp.ub), 0.0, dneg)
    dual = float(max(np.max(sign_bad, initial=0.0), np.max(dual_bad, initial=0.0)))
    for i in np.flatnonzero(sign_bad > tol):
        viol.append(f"multiplier of row {lp.row_names[i]} has wrong sign ({ym[i]:.3g})")
    for j in np.flatnonzero(dual_bad > tol):
        viol.append(f"reduced cost of {lp.var_names[j]} infeasible ({d[j]:.3g})")

    slack = np.abs(ax - lp.b)
    cs_rows = np.abs(ym) * slack
    lbf = np.where(np.isfinite(lp.lb), lp.lb, 0.0)
    ubf = np.where(np.isfinite(lp.ub), lp.ub, 0.0)
    cs_vars = dpos * np.where(np.isfinite(lp.lb), np.abs(x - lbf), 0.0) \
        + dneg * np.where(np.isfinite(lp.ub), np.abs(ubf - x), 0.0)
    comp = float(max(np.max(cs_rows, initial=0.0), np.max(cs_vars, initial=0.0)))
    for i in np.flatnonzero(cs_rows > tol * (1 + np.abs(ym))):
        viol.append(f"complementary slackness fails on row {lp.row_names[i]}")
    for j in np.flatnonzero(cs_vars > tol * (1 + np.abs(d))):
        viol.append(f"complementary slackness fails on variable {lp.var_names[j]}")

    primal_obj = float(c @ x)
    dual_obj = float(ym @ lp.b + dpos @ lbf - dneg @ ubf)
    gap = abs(primal_obj - dual_obj)
    if gap > tol * (1 + abs(primal_obj)):
        viol.append(f"duality gap {gap:.3g}")
    if abs(float(lp.c @ x) - sol.objective) > tol * (1 + abs(sol.objective)):
        viol.append("reported objective does not match c @ x")
    return VerifyReport(not viol, primal, dual, comp, gap, viol)


def verify_farkas(lp: LinearProgram, y: np.ndarray, tol: float = 1e-9) -> VerifyReport:
    """Check that ``y`` proves infeasibility of the rows together with the bounds.

    Valid rows give ``y @ A @ x >= y @ b`` when ``y >= 0`` on ``>=`` rows and
    ``y <= 0`` on ``<=`` rows; the certificate holds when the maximum of the left
    side over the variable box is still below ``y @ b``.
    """
    y = np.asarray(y, dtype=float)
    viol = []
    sign_bad = np.where(lp.rel == GE, np.maximum(-y, 0.0),
                        np.where(lp.rel == LE, np.maximum(y, 0.0), 0.0))
    if np.any(sign_bad > tol):
        viol.append("multiplier signs inconsistent with row relations")
    g = y @ lp.A
    big = max(1.0, float(np.abs(y).max(initial=0.0)))
    g = np.where(np.abs(g) <= tol * big * (1 + np.abs(lp.A).max(initial=0.0)), 0.0, g)
    up = np.where(g > 0, lp.ub, np.where(g < 0, lp.lb, 0.0))
    if np.any(~np.isfinite(up) & (g != 0)):
        viol.append("combined row is unbounded over the variable box")
        return VerifyReport(False, violations=viol)
    best = float(np.sum(np.where(g != 0, g * up, 0.0)))
    margin = float(y @ lp.b) - best
    if margin <= tol * big:
        viol.append(f"no contradiction: margin {margin:.3g}")
    return VerifyReport(not viol, gap=margin, violations=viol)


def verify_ray(lp: LinearProgram, ray: np.ndarray, x: np.ndarray | None = None,
               tol: float = 1e-9) -> VerifyReport:
    """Check a recession direction that improves the objective without bound."""
    ray = np.asarray(ray, dtype=float)
    viol = []
    ar = lp.A @ ray
    scale = 1 + np.abs(ray).max(initial=0.0)
    if np.any((lp.rel == GE) & (ar < -tol * scale)) or np.any((lp.rel == LE) & (ar > tol * scale)) \
            or np.any((lp.rel == EQ) & (np.abs(ar) > tol * scale)):
        viol.append("ray leaves the row constraints")
    if np.any(np.isfinite(lp.lb) & (ray < -tol)) or np.any(np.isfinite(lp.ub) & (ray > tol)):
        viol.append("ray leaves the variable bounds")
    slope = float(lp.c @ ray)
    improving = slope < -tol if lp.sense == "min" else slope > tol
    if not improving:
        viol.append(f"ray does not improve the objective (slope {slope:.3g})")
    return VerifyReport(not viol, gap=slope, violations=viol)


# ---------------------------------------------------------------------------
# export


def write_mps(lp: LinearProgram, path, name: str = "SUPERHDG") -> None:
    """Write ``lp`` in fixed-format MPS.

    Columns are named ``C0000000..`` in variable order and rows ``R0000000..`` in row
    order; the objective row is ``OBJ``. A ``max`` problem is written with negated
    costs (MPS minimizes), which the ``*`` comment heading records.
    """
    c = lp.c if lp.sense == "min" else -lp.c
    kinds = {LE: "L", EQ: "E", GE: "G"}
    lines = [f"* sense {lp.sense}; costs negated for max", f"NAME          {name}", "ROWS", " N  OBJ"]
    rows = [f"R{i:07d}" for i in range(lp.n_rows)]
    cols = [f"C{j:07d}" for j in range(lp.n_vars)]
    for i, r in enumerate(rows):
        lines.append(f" {kinds[int(lp.rel[i])]}  {r}")
    lines.append("COLUMNS")
    for j, cn in enumerate(cols):
        entries = []
        if c[j] != 0.0:
            entries.append(("OBJ", c[j]))
        for i in np.flatnonzero(lp.A[:, j]):
            entries.append((rows[i], lp.A[i, j]))
        if not entries:
            entries.append(("OBJ", 0.0))
        for rn, v in entries:
            lines.append(f"    {cn:<8}  {rn:<8}  {_mps_num(v)}")
    lines.append("RHS")
    for i in np.flatnonzero(lp.b):
        lines.append(f"    RHS       {rows[i]:<8}  {_mps_num(lp.b[i])}")
    lines.append("BOUNDS")
    for j, cn in enumerate(cols):
        lo, hi = lp.lb[j], lp.ub[j]
        if lo == -np.inf and hi == np.inf:
            lines.append(f" FR BND       {cn}")
            continue
        if lo == hi:
            lines.append(f" FX BND       {cn:<8}  {_mps_num(lo)}")
            continue
        if lo == -np.inf:
            lines.append(f" MI BND       {cn}")
        elif lo != 0.0:
            lines.append(f" LO BND       {cn:<8}  {_mps_num(lo)}")
        if hi != np.inf:
            lines.append(f" UP BND       {cn:<8}  {_mps_num(hi)}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _mps_num(v: float) -> str:
    s = repr(float(v))
    return s if len(s) <= 12 else f"{v:.6e}"


def describe_rows(lp: LinearProgram, idx: Iterable[int]) -> list[str]:
    return [f"{lp.row_names[i]}: {_REL_TEXT[int(lp.rel[i])]} {lp.b[i]:g}" for i in idx]


def name_lookup(names: Sequence[str]) -> Mapping[str, int]:
    return {nm: i for i, nm in enumerate(names)}
