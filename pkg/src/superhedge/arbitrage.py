"""No-arbitrage decisions, optimal arbitrage profit and certificate checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lp as _lp
from .constraints import Gamma, PerNode
from .lattice import LatticeMeasure
from .pricing import (Certificate, PricingProblem, _drift_block, _marginal_rows, build_dual,
                      build_primal, certificate_from_solution, dual_from_multipliers,
                      marginal_residual, option_conjugates, penalty, positions_admissible)

WITNESS_TOL = 1e-9
NONE_TOL = 1e-9


@dataclass
class CertificateCheck:
    min_margin: float
    ok: bool
    worst_path: int = -1
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_certificate(cert: Certificate, p: PricingProblem, mode: str = "superhedge",
                       tol: float = 1e-9) -> CertificateCheck:
    """Re-evaluate a portfolio on every lattice path.

    ``mode="superhedge"`` requires ``Psi >= Phi - tol``; ``mode="arbitrage"`` requires
    ``Psi > 0`` everywhere and zero static cost.
    """
    margin = cert.payout(p) - (p.phi if mode == "superhedge" else 0.0)
    worst = int(np.argmin(margin))
    mm = float(margin[worst])
    path = p.lattice.paths[worst].tolist()
    ok_pos, why = positions_admissible(cert, p)
    if not ok_pos:
        return CertificateCheck(mm, False, worst, why)
    if mode == "arbitrage":
        cost = cert.static_cost(p.model)
        if abs(cost) > tol:
            return CertificateCheck(mm, False, worst, f"static cost {cost:.3g} is not zero")
        if not mm > 0:
            return CertificateCheck(mm, False, worst, f"payout {mm:.3g} not positive on path {path}")
        return CertificateCheck(mm, True, worst, "")
    if mm < -tol:
        return CertificateCheck(mm, False, worst, f"shortfall {-mm:.3g} on path {path}")
    return CertificateCheck(mm, True, worst, "")


# ---------------------------------------------------------------------------
# FTAP


@dataclass
class FtapReport:
    verdict: str  # "no_arbitrage" | "arbitrage"
    witness: LatticeMeasure | None = None
    certificate: Certificate | None = None
    margin: float = math.nan
    violated: dict = field(default_factory=dict)
    messages: list[str] = field(default_factory=list)

    @property
    def arbitrage(self) -> bool:
        return self.verdict == "arbitrage"

    def to_dict(self, tol: float = 0.0) -> dict:
        return {
            "verdict": self.verdict,
            "witness": self.witness.as_dict(tol) if self.witness is not None else None,
            "certificate": self.certificate.to_dict() if self.certificate is not None else None,
            "margin": None if math.isnan(self.margin) else self.margin,
            "violated_rows": self.violated,
            "messages": list(self.messages),
        }


def _option_means_ok(p: PricingProblem, w: np.ndarray, tol: float) -> bool:
    for i, opt in enumerate(p.options):
        mean = float(p.psi[i] @ w)
        bid, ask = opt.ladder.bid_ask()
        if _has_bid(opt.ladder) and mean < bid - tol:
            return False
        if _has_ask(opt.ladder) and mean > ask + tol:
            return False
    return True


def _has_bid(lad) -> bool:
    return bool(lad.bids) or lad.unbounded_bid_price is not None


def _has_ask(lad) -> bool:
    return bool(lad.asks) or lad.unbounded_ask_price is not None


def build_witness_system(p: PricingProblem) -> tuple[_lp.LinearProgram, np.ndarray, dict]:
    """Feasibility LP for zero-penalty measures; returns the LP, q columns and row groups."""
    lat, spec = p.lattice, p.constraint
    b = _lp.LpBuilder("min")
    q = b.add_vars([f"q{k}" for k in range(lat.n_paths)], lb=0.0)
    start = b.n_rows
    _marginal_rows(b, p, q)
    groups = {"marginal": (start, b.n_rows)}
    start = b.n_rows
    for t in range(lat.T):
        if isinstance(spec, PerNode):
            for node in lat.nodes(t):
                k = spec.node_set(node)
                for v_i, v in enumerate(k.vertices):
                    idx, val = _drift_block(lat, t, node.index, v)
                    if np.any(val != 0):
                        b.add_row(q[idx], val, "<=", 0.0, f"drift{t}.{node.index}.v{v_i}")
                for r_i, r in enumerate(k.rays):
                    idx, val = _drift_block(lat, t, node.index, r)
                    b.add_row(q[idx], val, "<=", 0.0, f"drift{t}.{node.index}.r{r_i}")
        else:
            eye = np.eye(lat.d)
            for j in range(lat.n_nodes[t]):
                for n in range(lat.d):
                    if spec.gamma[n] > 0:
                        idx, val = _drift_block(lat, t, j, eye[n])
                        b.add_row(q[idx], val, "=", 0.0, f"drift{t}.{j}.a{n + 1}")
    groups["drift"] = (start, b.n_rows)
    start = b.n_rows
    for i, opt in enumerate(p.options):
        bid, ask = opt.ladder.bid_ask()
        if _has_bid(opt.ladder):
            b.add_row(q, p.psi[i], ">=", bid, f"bid.{opt.id}")
        if _has_ask(opt.ladder):
            b.add_row(q, p.psi[i], "<=", ask, f"ask.{opt.id}")
    groups["bid_ask"] = (start, b.n_rows)
    return b.build(), q, groups


def arbitrage_certificate(p: PricingProblem, options: _lp.SolverOptions | None = None):
    """Zero-cost portfolio with the largest guaranteed payout (capped at 1 if unbounded)."""
    p0 = p.with_payoff(np.zeros(p.lattice.n_paths))
    prog, layout = build_primal(p0)
    sol = _lp.solve(prog, options or _lp.FAST)
    if sol.status == "unbounded":
        # cap the (negative) cost at -1 to get a finite vertex
        A = np.vstack([prog.A, prog.c[None, :]])
        capped = _lp.LinearProgram(prog.c, A, np.append(prog.rel, _lp.GE), np.append(prog.b, -1.0),
                                   prog.lb, prog.ub, "min", prog.var_names, prog.row_names + ("cost_floor",))
        sol = _lp.solve(capped, options or _lp.FAST)
    if not sol.optimal:
        return None, sol
    cert = certificate_from_solution(sol.x, layout, p0)
    cost = cert.static_cost(p.model)
    # normalize to zero initial cost by moving the (negative) value into cash
    return cert.shifted(-cost), sol


def ftap_check(p: PricingProblem, options: _lp.SolverOptions | None = None) -> FtapReport:
    prog, qcols, groups = build_witness_system(p)
    sol = _lp.solve(prog, options or _lp.FAST)
    if sol.optimal:
        w = np.maximum(sol.x[qcols], 0.0)
        q = LatticeMeasure(p.lattice, w / w.sum(), tol=1e-7)
        msgs = []
        pen = penalty(p.with_options(()), q)
        if not (pen <= WITNESS_TOL):
            msgs.append(f"witness penalty {pen:.3g} above tolerance")
        if not _option_means_ok(p, q.weights, WITNESS_TOL):
            msgs.append("witness option means outside bid-ask")
        if marginal_residual(p, q) > WITNESS_TOL:
            msgs.append("witness marginals off")
        return FtapReport("no_arbitrage", witness=q, messages=msgs)
    violated = {}
    if sol.status == "infeasible" and sol.farkas is not None:
        y = sol.farkas
        for name, (lo, hi) in groups.items():
            rows = [prog.row_names[i] for i in range(lo, hi) if abs(y[i]) > 1e-9]
            if rows:
                violated[name] = rows
    cert, psol = arbitrage_certificate(p, options)
    msgs = []
    margin = math.nan
    if cert is None:
        msgs.append(f"certificate LP status {psol.status}")
    else:
        chk = verify_certificate(cert, p.with_payoff(np.zeros(p.lattice.n_paths)), "arbitrage")
        margin = chk.min_margin
        if not chk.ok:
            msgs.append(f"certificate check failed: {chk.message}")
    attribution = [k for k in ("drift", "bid_ask") if k in violated]
    if attribution:
        msgs.append("infeasibility attributed to " + " and ".join(attribution) + " rows (heuristic)")
    return FtapReport("arbitrage", certificate=cert, margin=margin, violated=violated, messages=msgs)


# ---------------------------------------------------------------------------
# optimal arbitrage profit


@dataclass
class OapReport:
    value: float
    classification: str  # "none" | "finite" | "infinite"
    dual_value: float = math.nan
    measure: LatticeMeasure | None = None
    certificate: Certificate | None = None
    messages: list[str] = field(default_factory=list)

    def to_dict(self, tol: float = 0.0) -> dict:
        v = self.value
        return {
            "value": "inf" if v == math.inf else v,
            "classification": self.classification,
            "dual_check": None if math.isnan(self.dual_value) else
            ("inf" if self.dual_value == math.inf else self.dual_value),
            "measure": self.measure.as_dict(tol) if self.measure is not None else None,
            "certificate": self.certificate.to_dict() if self.certificate is not None else None,
            "messages": list(self.messages),
        }


def optimal_arbitrage_profit(p: PricingProblem, options: _lp.SolverOptions | None = None,
                             tol: float = 1e-7) -> OapReport:
    """``G = -D(0)``, cross-checked against the smallest penalty of a measure."""
    p0 = p.with_payoff(np.zeros(p.lattice.n_paths))
    opts = options or _lp.FAST
    prog, layout = build_primal(p0)
    sol = _lp.solve(prog, opts)
    if sol.status == "unbounded":
        return OapReport(math.inf, "infinite", messages=["primal unbounded below: no measure has finite penalty"])
    if not sol.optimal:
        return OapReport(math.nan, "error", messages=[f"primal LP status {sol.status}"])
    G = -float(sol.objective)
    cert = certificate_from_solution(sol.x, layout, p0)
    msgs = []
    if isinstance(p.constraint, PerNode):
        dprog, dlay = build_dual(p0)
        dsol = _lp.solve(dprog, opts)
        if not dsol.optimal:
            return OapReport(G, "error", certificate=cert, messages=[f"dual LP status {dsol.status}"])
        w = np.maximum(dsol.x[dlay.q], 0.0)
        q = LatticeMeasure(p.lattice, w / w.sum(), tol=1e-7)
    else:
        q = dual_from_multipliers(p0, sol, layout)
    check = penalty(p0, q)
    if not abs(check - G) <= tol * (1 + abs(G)):
        msgs.append(f"dual cross-check {check:.10g} differs from G = {G:.10g}")
    cls = "none" if G <= NONE_TOL else "finite"
    return OapReport(0.0 if cls == "none" else G, cls, check, q, cert, msgs)
