"""Command line interface: ``superhedge <command> <scenario> [options]``.

Exit codes: 0 success or no arbitrage, 1 failed check, 2 arbitrage found,
3 unbounded (infinite arbitrage profit), 4 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import scenario as S
from .arbitrage import ftap_check, optimal_arbitrage_profit, verify_certificate
from .constraints import ConstraintError
from .lattice import LatticeSizeError
from .market import ValidationError
from .payoff import BindingError, EvaluationError, PayoffSyntaxError
from .pricing import Certificate, dual_objective, marginal_residual, price, solve_dual

EXIT_OK, EXIT_FAIL, EXIT_ARBITRAGE, EXIT_UNBOUNDED, EXIT_INPUT = 0, 1, 2, 3, 4
INPUT_ERRORS = (S.ScenarioError, PayoffSyntaxError, BindingError, ValidationError, ConstraintError,
                LatticeSizeError, json.JSONDecodeError, OSError, KeyError)

log = logging.getLogger("superhedge")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(o):
    if isinstance(o, float) and not math.isfinite(o):
        return "nan" if math.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def _emit(args, doc: dict, lines: list[str]) -> None:
    if args.report == "json":
        print(json.dumps(_clean(doc), default=_json_default, indent=2))
    else:
        print("\n".join(lines))


def _load(args) -> S.Scenario:
    ref = args.scenario
    path = Path(ref)
    if not path.exists() and ref in S.BUILTINS:
        path = S.builtin_path(ref)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scen = S.load(path, max_paths=args.max_paths)
    for note in scen.notes:
        print(note, file=sys.stderr)
    return scen


def _problem(args, scen: S.Scenario):
    return scen.problem(getattr(args, "payoff", None))


def _fmt(v: float) -> str:
    return f"{v:.10g}" if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# commands


def cmd_price(args) -> int:
    scen = _load(args)
    p = _problem(args, scen)
    r = price(p, tol=args.tol)
    lines = [f"scenario  {scen.name}", f"payoff    {p.payoff}", f"status    {r.status}",
             f"primal    {_fmt(r.primal_value)}", f"dual      {_fmt(r.dual_value)}", f"gap       {r.gap:.3g}"]
    if r.certificate is not None:
        c = r.certificate
        held = [s for s in c.statics if abs(s[3]) > 1e-12]
        lines.append(f"cash      {c.cash:.10g}")
        lines.append(f"statics   {len(held)} call positions")
        for opt, e in zip(p.options, c.eta):
            lines.append(f"eta[{opt.id}] {e:.10g}")
    lines += [f"note      {m}" for m in r.messages]
    _emit(args, {"scenario": scen.name, "payoff": str(p.payoff), **r.to_dict(args.tol)}, lines)
    if args.certificate_out and r.certificate is not None:
        Path(args.certificate_out).write_text(json.dumps(r.certificate.to_dict(), default=_json_default))
    if r.status == "primal_unbounded_below":
        return EXIT_UNBOUNDED
    return EXIT_OK if r.status == "priced" else EXIT_FAIL


def cmd_dual(args) -> int:
    scen = _load(args)
    p = _problem(args, scen)
    r = solve_dual(p)
    lines = [f"scenario  {scen.name}", f"status    {r.status}", f"dual      {_fmt(r.value)}"]
    if r.measure is not None:
        supp = r.measure.support(args.tol)
        lines.append(f"support   {supp.size} of {p.lattice.n_paths} paths")
        lines.append(f"marginal residual {marginal_residual(p, r.measure):.3g}")
    lines += [f"note      {m}" for m in r.messages]
    doc = {"scenario": scen.name, "status": r.status, "dual": r.value,
           "measure": r.measure.as_dict(args.tol) if r.measure is not None else None,
           "messages": r.messages}
    _emit(args, doc, lines)
    if r.status == "infeasible":
        return EXIT_UNBOUNDED
    return EXIT_OK if r.status == "optimal" else EXIT_FAIL


def cmd_verify(args) -> int:
    """Check a superhedge on every path, the dual measure, and weak duality on random measures."""
    scen = _load(args)
    p = _problem(args, scen)
    checks = []
    if args.certificate:
        cert = Certificate.from_dict(json.loads(Path(args.certificate).read_text()), p.model.d)
        chk = verify_certificate(cert, p, "superhedge", args.tol)
        checks.append(("certificate superhedges", chk.ok, chk.message or f"margin {chk.min_margin:.3g}"))
        checks.append(("certificate cost", True, f"{cert.static_cost(p.model):.10g}"))
        primal = cert.static_cost(p.model)
    else:
        r = price(p, tol=args.tol)
        if r.status != "priced":
            checks.append(("price", False, r.status))
            primal = math.nan
        else:
            primal = r.primal_value
            chk = verify_certificate(r.certificate, p, "superhedge", args.tol)
            checks.append(("certificate superhedges", chk.ok, chk.message or f"margin {chk.min_margin:.3g}"))
            res = marginal_residual(p, r.dual_measure)
            checks.append(("dual marginals", res <= args.tol, f"residual {res:.3g}"))
            checks.append(("duality gap", r.gap <= args.tol, f"gap {r.gap:.3g}"))
    rng = np.random.default_rng(args.seed)
    if math.isfinite(primal):
        worst = -math.inf
        for _ in range(args.samples):
            probe = p.with_payoff(rng.normal(size=p.lattice.n_paths))
            d = solve_dual(probe)
            if d.measure is None:
                continue
            worst = max(worst, dual_objective(p, d.measure) - primal)
        ok = worst <= args.tol * (1 + abs(primal))
        checks.append((f"weak duality on {args.samples} measures", ok, f"max excess {worst:.3g}"))
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {info}" for name, ok, info in checks]
    _emit(args, {"scenario": scen.name, "checks": [{"name": n, "ok": ok, "info": i} for n, ok, i in checks]},
          lines)
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_FAIL


def cmd_ftap(args) -> int:
    scen = _load(args)
    p = _problem(args, scen)
    f = ftap_check(p)
    lines = [f"scenario  {scen.name}", f"verdict   {f.verdict}"]
    if f.witness is not None:
        lines.append(f"witness   measure on {f.witness.support(args.tol).size} paths")
    if f.certificate is not None:
        lines.append(f"margin    {f.margin:.10g}")
    for group, rows in f.violated.items():
        lines.append(f"rows      {group}: {', '.join(rows[:8])}{' ...' if len(rows) > 8 else ''}")
    lines += [f"note      {m}" for m in f.messages]
    _emit(args, {"scenario": scen.name, **f.to_dict(args.tol)}, lines)
    return EXIT_ARBITRAGE if f.arbitrage else EXIT_OK


def cmd_oap(args) -> int:
    scen = _load(args)
    p = _problem(args, scen)
    o = optimal_arbitrage_profit(p, tol=args.tol)
    lines = [f"scenario  {scen.name}", f"class     {o.classification}", f"G         {_fmt(o.value)}"]
    if not math.isnan(o.dual_value):
        lines.append(f"dual      {_fmt(o.dual_value)}")
    lines += [f"note      {m}" for m in o.messages]
    _emit(args, {"scenario": scen.name, **o.to_dict(args.tol)}, lines)
    if o.classification == "infinite":
        return EXIT_UNBOUNDED
    return EXIT_FAIL if o.classification == "error" else EXIT_OK


def run_example(name: str, max_paths: int | None = None) -> list[tuple[bool, str]]:
    """Run a builtin scenario and compare with its stored expectations."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scen = S.load(S.builtin_path(name), max_paths=max_paths)
    p = scen.problem()
    tol = float(scen.expect.get("tolerance", 1e-6))
    out = []
    if "price" in scen.expect:
        want = S.expected_value(scen.expect, "price")
        got = price(p).primal_value
        ok = abs(got - want) <= tol
        out.append((ok, f"{name} price {got:.6g} expected {want:.6g} tol {tol:g}"))
    if "ftap" in scen.expect:
        want = scen.expect["ftap"]
        got = ftap_check(p).verdict
        out.append((got == want, f"{name} ftap {got} expected {want}"))
    if "oap" in scen.expect:
        want = S.expected_value(scen.expect, "oap")
        got = optimal_arbitrage_profit(p).value
        ok = got == want if math.isinf(want) else abs(got - want) <= tol
        out.append((ok, f"{name} oap {got:.6g} expected {want:.6g} tol {tol:g}"))
    return out


def cmd_example(args) -> int:
    names = S.BUILTINS if args.name == "all" else (args.name,)
    if args.name != "all" and args.name not in S.BUILTINS:
        raise S.ScenarioIOError(f"unknown builtin scenario {args.name!r}; choose from {', '.join(S.BUILTINS)}")
    results = []
    for name in names:
        results += run_example(name, args.max_paths)
    if args.report == "json":
        print(json.dumps([{"pass": ok, "check": msg} for ok, msg in results], indent=2))
    else:
        for ok, msg in results:
            print(f"{'PASS' if ok else 'FAIL'} {msg}")
    return EXIT_OK if all(ok for ok, _ in results) else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-7, help="reporting tolerance")
    common.add_argument("--max-paths", type=int, default=None, help="lattice size cap (default 100000)")
    common.add_argument("--report", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="superhedge", description="Robust pricing and arbitrage on path lattices.")
    sub = ap.add_subparsers(dest="command", required=True)

    def scen_cmd(name, func, help_text, payoff=True):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.add_argument("scenario", help="scenario file or builtin name")
        if payoff:
            sp.add_argument("--payoff", help="payoff expression overriding the scenario task")
        sp.set_defaults(func=func)
        return sp

    sp = scen_cmd("price", cmd_price, "superhedging price with certificate and dual")
    sp.add_argument("--certificate-out", help="write the superhedge to this JSON file")
    scen_cmd("dual", cmd_dual, "dual value and optimal measure")
    sp = scen_cmd("verify", cmd_verify, "re-check a superhedge and weak duality")
    sp.add_argument("--certificate", help="JSON certificate to check instead of a fresh one")
    sp.add_argument("--samples", type=int, default=10, help="random measures for the weak duality check")
    scen_cmd("ftap", cmd_ftap, "decide arbitrage with witness or certificate", payoff=False)
    scen_cmd("oap", cmd_oap, "optimal arbitrage profit", payoff=False)
    sp = sub.add_parser("example", parents=[common], help="run builtin scenarios against stored values")
    sp.add_argument("name", help=f"one of {', '.join(S.BUILTINS)}, or all")
    sp.set_defaults(func=cmd_example)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
