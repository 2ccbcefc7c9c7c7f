"""Superhedging prices on a path lattice: primal LP, dual LP, certificates and penalties.

The primal minimizes the time-0 cost of a semi-static portfolio (cash, calls on
every asset and date, option positions bought or sold along their order books,
and a constrained dynamic position) that dominates the payoff on every lattice
path. The dual maximizes ``E^q[Phi] - penalty(q)`` over path measures ``q`` with the
given marginals, where the penalty collects the support functions of the node
sets at the node drifts and the conjugates of the order-book costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import lp as _lp
from .constraints import (Gamma, PerNode, StrategyEncoding, emit_primal_constraints, gain_matrix,
                          gamma_supremum, membership, support_function)
from .lattice import LatticeMeasure, PathLattice, drift_mass, marginal_masses
from .market import MarketModel
from .orderbook import TradableOption
from .payoff import Payoff, evaluate

GAP_TOL = 1e-7


class UnsupportedVariant(TypeError):
    pass


@dataclass(frozen=True, eq=False)
class PricingProblem:
    model: MarketModel
    lattice: PathLattice
    payoff: Payoff | np.ndarray
    options: tuple[TradableOption, ...] = ()
    constraint: PerNode | Gamma = None

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if self.constraint is None:
            from .constraints import unconstrained
            object.__setattr__(self, "constraint", unconstrained(self.model.d))
        for opt in self.options:
            if (opt.payoff.d, opt.payoff.T) != (self.model.d, self.model.T):
                raise ValueError(f"option {opt.id}: payoff bound to a different market shape")
        if isinstance(self.payoff, Payoff) and (self.payoff.d, self.payoff.T) != (self.model.d, self.model.T):
            raise ValueError("payoff bound to a different market shape")

    @cached_property
    def phi(self) -> np.ndarray:
        """Payoff on every lattice path (evaluated once)."""
        if isinstance(self.payoff, Payoff):
            return np.asarray(evaluate(self.payoff, self.lattice.paths), dtype=float)
        v = np.asarray(self.payoff, dtype=float).reshape(-1)
        if v.size != self.lattice.n_paths:
            raise ValueError("payoff vector does not match the lattice")
        return v

    @cached_property
    def psi(self) -> np.ndarray:
        """Option payoffs, shape ``(I, P)``."""
        if not self.options:
            return np.zeros((0, self.lattice.n_paths))
        return np.array([evaluate(o.payoff, self.lattice.paths) for o in self.options], dtype=float)

    def with_payoff(self, payoff) -> "PricingProblem":
        return PricingProblem(self.model, self.lattice, payoff, self.options, self.constraint)

    def with_constraint(self, constraint) -> "PricingProblem":
        return PricingProblem(self.model, self.lattice, self.payoff, self.options, constraint)

    def with_options(self, options) -> "PricingProblem":
        return PricingProblem(self.model, self.lattice, self.payoff, tuple(options), self.constraint)


# ---------------------------------------------------------------------------
# statics


def static_strikes(grid: np.ndarray) -> np.ndarray:
    """Positive strikes whose calls, with the constant, span all functions on ``grid``."""
    g = np.asarray(grid, dtype=float)
    if g.size < 2:
        return np.zeros(0)
    ks = g[:-1]
    if ks[0] <= 0.0:
        ks = np.concatenate([[0.5 * g[1]], ks[1:]])
    return ks


@dataclass
class PrimalLayout:
    cash: int
    statics: list[tuple[int, int, float, int]]  # (t, n, strike, column)
    segments: list[list[tuple[int, float, float, int]]]  # per option: (side, price, cap, column)
    strategy: StrategyEncoding
    path_rows: np.ndarray
    n_vars: int


def build_primal(p: PricingProblem) -> tuple[_lp.LinearProgram, PrimalLayout]:
    lat, model = p.lattice, p.model
    b = _lp.LpBuilder("min")
    cash = b.add_var("cash", lb=-math.inf, cost=1.0)
    statics = []
    for t in range(1, lat.T + 1):
        for n in range(1, lat.d + 1):
            mu = model.marginal(n, t)
            for K in static_strikes(lat.grids[(t, n)]):
                col = b.add_var(f"call[{t}][{n}]@{K:.12g}", lb=-math.inf, cost=mu.call_price(K))
                statics.append((t, n, float(K), col))
    segs = []
    for i, opt in enumerate(p.options):
        row = []
        for k, (side, price, cap) in enumerate(opt.ladder.segments()):
            col = b.add_var(f"{opt.id}.{'buy' if side > 0 else 'sell'}{k}", lb=0.0, ub=cap)
            row.append((side, price, cap, col))
        segs.append(row)
    enc = emit_primal_constraints(p.constraint, lat, b)
    nv = b.n_vars
    A = np.zeros((lat.n_paths, nv))
    A[:, cash] = 1.0
    paths = lat.paths
    for t, n, K, col in statics:
        A[:, col] = np.maximum(paths[:, t - 1, n - 1] - K, 0.0)
    for i, row in enumerate(segs):
        for side, price, cap, col in row:
            A[:, col] = side * (p.psi[i] - price)
    G, const = gain_matrix(enc, lat, nv)
    A += G
    rows = b.add_dense_rows(A, ">=", p.phi - const, [f"path{k}" for k in range(lat.n_paths)])
    layout = PrimalLayout(cash, statics, segs, enc, rows, nv)
    return b.build(), layout


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    """A semi-static portfolio in plain numbers, independent of LP internals."""

    cash: float
    statics: list[tuple[int, int, float, float]]  # (t, n, strike, units)
    eta: list[float]
    positions: list[np.ndarray]  # per date, (N_t, d)
    decomposition: dict = field(default_factory=dict)

    def static_cost(self, model: MarketModel) -> float:
        """``sum of integrals of u`` against the marginals (cash included)."""
        return self.cash + sum(u * model.marginal(n, t).call_price(K) for t, n, K, u in self.statics)

    def payout(self, p: PricingProblem) -> np.ndarray:
        """``Psi`` on every lattice path, with the exact book cost of each net ``eta``."""
        lat = p.lattice
        val = np.full(lat.n_paths, self.cash)
        for t, n, K, u in self.statics:
            val += u * np.maximum(lat.paths[:, t - 1, n - 1] - K, 0.0)
        for i, opt in enumerate(p.options):
            e = self.eta[i]
            c = opt.ladder.cost(e)
            val += e * p.psi[i] - c
        for t in range(lat.T):
            inc = lat.increments(t)
            pos = self.positions[t][lat.node_of_path(t)]
            val += np.sum(pos * inc, axis=1)
        return val

    def shifted(self, amount: float) -> "Certificate":
        return Certificate(self.cash + amount, list(self.statics), list(self.eta),
                           [a.copy() for a in self.positions], dict(self.decomposition))

    def to_dict(self) -> dict:
        return {
            "cash": self.cash,
            "statics": [{"t": t, "asset": n, "strike": K, "units": u} for t, n, K, u in self.statics if u != 0.0],
            "eta": list(self.eta),
            "positions": [a.tolist() for a in self.positions],
        }

    @classmethod
    def from_dict(cls, doc: dict, d: int) -> "Certificate":
        statics = [(int(s["t"]), int(s["asset"]), float(s["strike"]), float(s["units"]))
                   for s in doc.get("statics", [])]
        pos = [np.asarray(a, dtype=float).reshape(-1, d) for a in doc["positions"]]
        return cls(float(doc["cash"]), statics, [float(e) for e in doc.get("eta", [])], pos)


def certificate_from_solution(x: np.ndarray, layout: PrimalLayout, p: PricingProblem) -> Certificate:
    statics = [(t, n, K, float(x[col])) for t, n, K, col in layout.statics]
    eta = [float(sum(side * x[col] for side, _, _, col in row)) for row in layout.segments]
    pos = layout.strategy.positions(x)
    dec = {}
    if isinstance(p.constraint, PerNode):
        for t, blocks in enumerate(layout.strategy.blocks):
            for j in range(len(blocks)):
                dec[(t, j)] = layout.strategy.decomposition(x, t, j)
    return Certificate(float(x[layout.cash]), statics, eta, pos, dec)


def positions_admissible(cert: Certificate, p: PricingProblem, tol: float = 1e-8) -> tuple[bool, str]:
    """Check every position against the constraint family."""
    lat, spec = p.lattice, p.constraint
    if isinstance(spec, Gamma):
        prev = np.zeros((1, lat.d))
        for t in range(lat.T):
            cur = cert.positions[t]
            parent = prev[np.arange(cur.shape[0]) // (cur.shape[0] // prev.shape[0])]
            excess = np.abs(cur - parent) - spec.gamma[None, :]
            if np.any(excess > tol):
                j = int(np.argmax(excess.max(axis=1)))
                return False, f"{lat.node(t, j)}: increment exceeds Gamma by {excess.max():.3g}"
            prev = cur
        return True, ""
    for t in range(lat.T):
        for node in lat.nodes(t):
            k = spec.node_set(node)
            if not membership(k, cert.positions[t][node.index], tol):
                return False, f"{node}: position {cert.positions[t][node.index]} outside the node set"
    return True, ""


# ---------------------------------------------------------------------------
# penalties


def node_penalties(p: PricingProblem, q) -> list[np.ndarray]:
    """Support-function penalty per trading node, per date (PerNode families)."""
    spec = p.constraint
    if not isinstance(spec, PerNode):
        raise UnsupportedVariant("node penalties are defined for per-node families")
    lat = p.lattice
    out = []
    for t in range(lat.T):
        m = drift_mass(q, lat, t)
        vals = np.empty(lat.n_nodes[t])
        for node in lat.nodes(t):
            vals[node.index] = support_function(spec.node_set(node), m[node.index])
        out.append(vals)
    return out


def option_conjugates(p: PricingProblem, q) -> np.ndarray:
    w = q.weights if isinstance(q, LatticeMeasure) else np.asarray(q, dtype=float)
    return np.array([o.ladder.conjugate(float(p.psi[i] @ w)) for i, o in enumerate(p.options)])


def constraint_penalty(p: PricingProblem, q) -> float:
    """``E^q[A_T]`` (per-node) or ``C^q`` (Gamma), possibly +inf."""
    if isinstance(p.constraint, Gamma):
        drift = [drift_mass(q, p.lattice, t) for t in range(p.lattice.T)]
        return gamma_supremum(p.constraint, p.lattice, drift)[0]
    return float(sum(v.sum() for v in node_penalties(p, q)))


def penalty(p: PricingProblem, q) -> float:
    """Minimal penalty of ``q``: constraint penalty plus order-book conjugates."""
    c = constraint_penalty(p, q)
    if not math.isfinite(c):
        return math.inf
    return c + float(option_conjugates(p, q).sum())


def dual_objective(p: PricingProblem, q) -> float:
    w = q.weights if isinstance(q, LatticeMeasure) else np.asarray(q, dtype=float)
    pen = penalty(p, w)
    return -math.inf if not math.isfinite(pen) else float(p.phi @ w) - pen


def marginal_residual(p: PricingProblem, q) -> float:
    """Largest per-atom deviation of the marginals of ``q`` from the model."""
    w = q.weights if isinstance(q, LatticeMeasure) else np.asarray(q, dtype=float)
    lat, worst = p.lattice, 0.0
    for t in range(1, lat.T + 1):
        for n in range(1, lat.d + 1):
            g = lat.grids[(t, n)]
            mass = marginal_masses(w, lat, n, t)
            mu = p.model.marginal(n, t)
            target = np.zeros(g.size)
            target[np.searchsorted(g, mu.levels - 1e-10)] = mu.weights
            worst = max(worst, float(np.abs(mass - target).max()))
    return worst


# ---------------------------------------------------------------------------
# dual LP


@dataclass
class DualLayout:
    q: np.ndarray
    node_vars: list[np.ndarray]
    option_vars: np.ndarray


def _marginal_rows(b: _lp.LpBuilder, p: PricingProblem, qcols: np.ndarray) -> None:
    lat = p.lattice
    for t in range(1, lat.T + 1):
        for n in range(1, lat.d + 1):
            g = lat.grids[(t, n)]
            mu = p.model.marginal(n, t)
            target = np.zeros(g.size)
            target[np.searchsorted(g, mu.levels - 1e-10)] = mu.weights
            k = np.searchsorted(g, lat.paths[:, t - 1, n - 1])
            for lvl in range(g.size):
                members = qcols[k == lvl]
                b.add_row(members, np.ones(members.size), "=", target[lvl], f"marg[{t}][{n}]@{g[lvl]:.12g}")


def _drift_block(lat: PathLattice, t: int, j: int, direction: np.ndarray):
    sl = lat.node_slice(t, j)
    inc = lat.increments(t)[sl]
    return np.arange(sl.start, sl.stop), inc @ direction


def build_dual(p: PricingProblem) -> tuple[_lp.LinearProgram, DualLayout]:
    spec = p.constraint
    if not isinstance(spec, PerNode):
        raise UnsupportedVariant("Gamma families have no per-node dual; use dual_from_multipliers")
    lat = p.lattice
    b = _lp.LpBuilder("max")
    q = b.add_vars([f"q{k}" for k in range(lat.n_paths)], lb=0.0, cost=p.phi)
    _marginal_rows(b, p, q)
    node_vars = []
    for t in range(lat.T):
        tv = b.add_vars([f"pen{t}.{j}" for j in range(lat.n_nodes[t])], lb=-math.inf, cost=-1.0)
        node_vars.append(tv)
        for node in lat.nodes(t):
            k = spec.node_set(node)
            for v_i, v in enumerate(k.vertices):
                idx, val = _drift_block(lat, t, node.index, v)
                b.add_row(np.concatenate([[tv[node.index]], q[idx]]), np.concatenate([[1.0], -val]),
                          ">=", 0.0, f"vertex{t}.{node.index}.{v_i}")
            for r_i, r in enumerate(k.rays):
                idx, val = _drift_block(lat, t, node.index, r)
                b.add_row(q[idx], val, "<=", 0.0, f"ray{t}.{node.index}.{r_i}")
    svars = b.add_vars([f"conj.{o.id}" for o in p.options], lb=-math.inf, cost=-1.0)
    for i, opt in enumerate(p.options):
        lad = opt.ladder
        for eta in lad.breakpoints():
            b.add_row(np.concatenate([[svars[i]], q]), np.concatenate([[1.0], -eta * p.psi[i]]),
                      ">=", -lad.cost(eta), f"conj.{opt.id}@{eta:.12g}")
        if lad.unbounded_ask_price is not None:
            b.add_row(q, p.psi[i], "<=", lad.unbounded_ask_price, f"conj.{opt.id}.ask")
        if lad.unbounded_bid_price is not None:
            b.add_row(q, p.psi[i], ">=", lad.unbounded_bid_price, f"conj.{opt.id}.bid")
    return b.build(), DualLayout(q, node_vars, svars)


# ---------------------------------------------------------------------------
# reports


@dataclass
class PricingReport:
    primal_value: float
    dual_value: float
    gap: float
    status: str  # "priced" | "primal_unbounded_below" | "error"
    certificate: Certificate | None = None
    dual_measure: LatticeMeasure | None = None
    node_penalties: list | None = None
    option_conjugates: np.ndarray | None = None
    constraint_penalty: float = math.nan
    messages: list[str] = field(default_factory=list)
    primal_solution: _lp.LpSolution | None = None

    @property
    def value(self) -> float:
        return self.primal_value

    def to_dict(self, tol: float = 0.0) -> dict:
        return {
            "primal": _num(self.primal_value),
            "dual": _num(self.dual_value),
            "gap": _num(self.gap),
            "status": self.status,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "dual_measure": self.dual_measure.as_dict(tol) if self.dual_measure else None,
            "penalties": {
                "constraint": _num(self.constraint_penalty),
                "nodes": [v.tolist() for v in self.node_penalties] if self.node_penalties else None,
                "options": self.option_conjugates.tolist() if self.option_conjugates is not None else None,
            },
            "messages": list(self.messages),
        }


def _num(v: float):
    if v is None:
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return float(v)


def solve_primal(p: PricingProblem, options: _lp.SolverOptions | None = None):
    prog, layout = build_primal(p)
    return prog, layout, _lp.solve(prog, options or _lp.FAST)


def dual_from_multipliers(p: PricingProblem, sol: _lp.LpSolution, layout: PrimalLayout) -> LatticeMeasure:
    """The path-row multipliers of an optimal primal solution, as a measure."""
    w = np.maximum(sol.duals[layout.path_rows], 0.0)
    return LatticeMeasure(p.lattice, w / w.sum(), tol=1e-7)


@dataclass
class DualResult:
    value: float
    status: str  # "optimal" | "infeasible" | "error"
    measure: LatticeMeasure | None = None
    lp_value: float = math.nan
    messages: list[str] = field(default_factory=list)


def solve_dual(p: PricingProblem, options: _lp.SolverOptions | None = None) -> DualResult:
    """``sup_q E^q[Phi] - penalty(q)`` on its own.

    Per-node specs solve the dual LP directly. Gamma specs have no finite dual LP
    here, so the measure comes from the primal multipliers.
    """
    opts = options or _lp.FAST
    if isinstance(p.constraint, PerNode):
        dprog, dlay = build_dual(p)
        dsol = _lp.solve(dprog, opts)
        if dsol.status == "infeasible":
            return DualResult(-math.inf, "infeasible", messages=["no measure has finite penalty"])
        if not dsol.optimal:
            return DualResult(math.nan, "error", messages=[f"dual LP status {dsol.status}"])
        w = np.maximum(dsol.x[dlay.q], 0.0)
        q = LatticeMeasure(p.lattice, w / w.sum(), tol=1e-7)
        return DualResult(dual_objective(p, q), "optimal", q, float(dsol.objective))
    prog, layout, sol = solve_primal(p, opts)
    if sol.status == "unbounded":
        return DualResult(-math.inf, "infeasible", messages=["no measure has finite penalty"])
    if not sol.optimal:
        return DualResult(math.nan, "error", messages=[f"primal LP status {sol.status}"])
    q = dual_from_multipliers(p, sol, layout)
    return DualResult(dual_objective(p, q), "optimal", q, float(sol.objective),
                      ["measure taken from primal multipliers"])


def price(p: PricingProblem, options: _lp.SolverOptions | None = None, tol: float = GAP_TOL) -> PricingReport:
    prog, layout, sol = solve_primal(p, options)
    if sol.status == "unbounded":
        return PricingReport(-math.inf, -math.inf, 0.0, "primal_unbounded_below",
                             messages=["primal unbounded below: no measure has finite penalty"],
                             primal_solution=sol)
    if not sol.optimal:
        return PricingReport(math.nan, math.nan, math.nan, "error",
                             messages=[f"primal LP status {sol.status}"], primal_solution=sol)
    cert = certificate_from_solution(sol.x, layout, p)
    primal = cert.static_cost(p.model)
    msgs = []
    if isinstance(p.constraint, PerNode):
        dprog, dlay = build_dual(p)
        dsol = _lp.solve(dprog, options or _lp.FAST)
        if not dsol.optimal:
            return PricingReport(primal, math.nan, math.nan, "error", cert,
                                 messages=[f"dual LP status {dsol.status}"], primal_solution=sol)
        w = np.maximum(dsol.x[dlay.q], 0.0)
        q = LatticeMeasure(p.lattice, w / w.sum(), tol=1e-7)
        pens = node_penalties(p, q)
        cpen = float(sum(v.sum() for v in pens))
    else:
        q = dual_from_multipliers(p, sol, layout)
        pens = None
        cpen = constraint_penalty(p, q)
    conj = option_conjugates(p, q)
    dual = float(p.phi @ q.weights) - cpen - float(conj.sum())
    gap = abs(primal - dual)
    status = "priced"
    if not gap <= tol * (1 + abs(primal)):
        status = "error"
        msgs.append(f"duality gap {gap:.3g} above tolerance")
    if getattr(p.constraint, "non_approximable", False):
        msgs.append("constraint flagged non_approximable: lattice value may differ from the continuum")
    return PricingReport(primal, dual, gap, status, cert, q, pens, conj, cpen, msgs, sol)


def risk_measure(p: PricingProblem, payoff=None, options: _lp.SolverOptions | None = None) -> float:
    """``rho(Phi) = D(-Phi)``, the superhedging price of the negated payoff."""
    phi = p.phi if payoff is None else (
        np.asarray(evaluate(payoff, p.lattice.paths)) if isinstance(payoff, Payoff) else np.asarray(payoff, float))
    prog, layout, sol = solve_primal(p.with_payoff(-phi), options)
    if sol.status == "unbounded":
        return -math.inf
    if not sol.optimal:
        raise RuntimeError(f"primal LP status {sol.status}")
    return float(sol.objective)


def superhedging_value(p: PricingProblem, options: _lp.SolverOptions | None = None) -> float:
    """Primal value only (``-inf`` when unbounded)."""
    _, _, sol = solve_primal(p, options)
    if sol.status == "unbounded":
        return -math.inf
    if not sol.optimal:
        raise RuntimeError(f"primal LP status {sol.status}")
    return float(sol.objective)
