"""Scenario files: an INI-style description of a market, its books and a task.

Example::

    [model]
    d = 1
    T = 2
    x0 = [2.0]

    [marginal 1 1]            # asset 1, date 1
    density = uniform(1, 3)
    n_atoms = 40

    [marginal 1 2]
    atoms = [(1.0, 0.5), (3.0, 0.5)]

    [option straddle]
    payoff = abs(x[2][1] - x[1][1])
    asks = [(0.2, 1)]
    bids = [(0.1, 1)]

    [trading]
    constraint = unconstrained

    [lattice]
    extra_levels = {(2, 1): [0.5]}     # (t, n) -> levels
    max_paths = 100000

    [task]
    payoff = powi(x[2][1] - x[1][1], 2)

    [expect]
    price = 0.3667
    tolerance = 0.02

Marginal blocks take ``atoms``, or ``density`` with ``n_atoms``, or ``calls`` naming a
quote CSV (``asset,time,strike,price``) with an optional ``strikes`` grid.
Constraints: ``unconstrained``, ``shortselling(c, ...)``, ``drawdown(a="..", b="..")``,
``non_tradable(d')``, ``gamma(g, ...)``, ``disk(k)`` and ``per_node(file.json)``.
Relative paths resolve against the scenario file.
"""

from __future__ import annotations

import ast
import configparser
import math
import re
import shlex
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import constraints as C
from .lattice import DEFAULT_MAX_PATHS, LatticeSizeError, PathLattice, build
from .market import (MarginalDistribution, MarketModel, ValidationError, discretize_density,
                     marginal_from_calls, read_call_csv)
from .orderbook import CostLadder, TradableOption
from .payoff import BindingError, Payoff, PayoffSyntaxError, bind
from .pricing import PricingProblem

BUILTIN_DIR = Path(__file__).with_name("scenarios")
BUILTINS = ("appendix_a", "example_5_4", "disk_4_1", "gamma_demo", "shortselling_demo",
            "non_tradable_demo", "overpriced_liquid")


class ScenarioError(Exception):
    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class ScenarioIOError(ScenarioError):
    pass


class ScenarioSyntaxError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    pass


@dataclass
class Scenario:
    name: str
    model: MarketModel
    lattice: PathLattice
    payoff: Payoff
    options: tuple[TradableOption, ...]
    constraint: C.PerNode | C.Gamma
    constraint_text: str
    extra_levels: dict = field(default_factory=dict)
    max_paths: int = DEFAULT_MAX_PATHS
    tol: float = 1e-7
    expect: dict = field(default_factory=dict)
    source: Path | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def non_approximable(self) -> bool:
        return bool(getattr(self.constraint, "non_approximable", False))

    def problem(self, payoff: str | Payoff | None = None) -> PricingProblem:
        pay = self.payoff
        if isinstance(payoff, str):
            pay = bind(payoff, self.model.d, self.model.T)
        elif payoff is not None:
            pay = payoff
        return PricingProblem(self.model, self.lattice, pay, self.options, self.constraint)


# ---------------------------------------------------------------------------
# locating errors


class _Locator:
    def __init__(self, path: str, text: str):
        self.path = path
        self.lines = text.splitlines()

    def __call__(self, section: str, key: str | None = None) -> str:
        head = None
        for i, line in enumerate(self.lines):
            s = line.strip()
            if s.startswith("[") and s[1:].split("]")[0].strip() == section:
                head = i
                continue
            if head is not None and s.startswith("["):
                break
            if head is not None and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s):
                return f"{self.path}:{i + 1}"
        return f"{self.path}:{head + 1}" if head is not None else self.path


def _literal(text: str, where: str):
    try:
        return ast.literal_eval(text.strip())
    except (ValueError, SyntaxError) as exc:
        raise ScenarioSyntaxError(f"cannot read value {text.strip()!r} ({exc.__class__.__name__})", where) from None


# ---------------------------------------------------------------------------
# loading


def builtin_path(name: str) -> Path:
    if name not in BUILTINS:
        raise ScenarioIOError(f"unknown builtin scenario {name!r}; choose from {', '.join(BUILTINS)}")
    return BUILTIN_DIR / f"{name}.ini"


def load(path, max_paths: int | None = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioIOError(str(exc), str(path)) from None
    return loads(text, str(path), base=path.parent, max_paths=max_paths)


def loads(text: str, name: str = "<string>", base: Path | None = None,
          max_paths: int | None = None) -> Scenario:
    base = base or Path.cwd()
    where = _Locator(name, text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                   comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        loc = f"{name}:{line}" if line else name
        raise ScenarioSyntaxError(exc.message if hasattr(exc, "message") else str(exc), loc) from None

    if not cp.has_section("model"):
        raise ScenarioValidationError("missing [model] section", name)
    sec = cp["model"]
    for key in ("d", "T", "x0"):
        if key not in sec:
            raise ScenarioValidationError(f"[model] needs {key}", where("model"))
    d = _literal(sec["d"], where("model", "d"))
    T = _literal(sec["T"], where("model", "T"))
    x0 = _literal(sec["x0"], where("model", "x0"))
    if not (isinstance(d, int) and isinstance(T, int)):
        raise ScenarioValidationError("d and T must be integers", where("model"))
    x0 = [x0] if isinstance(x0, (int, float)) else list(x0)

    marginals = {}
    csv_cache: dict[Path, dict] = {}
    for s in cp.sections():
        if not s.startswith("marginal"):
            continue
        parts = s.split()
        loc = where(s)
        if len(parts) != 3:
            raise ScenarioSyntaxError("marginal sections are named [marginal <asset> <date>]", loc)
        try:
            n, t = int(parts[1]), int(parts[2])
        except ValueError:
            raise ScenarioSyntaxError("marginal asset and date must be integers", loc) from None
        if (n, t) in marginals:
            raise ScenarioValidationError(f"marginal ({n}, {t}) given twice", loc)
        blk = cp[s]
        try:
            if "atoms" in blk:
                atoms = _literal(blk["atoms"], where(s, "atoms"))
                lv = [float(a[0]) for a in atoms]
                wt = [float(a[1]) for a in atoms]
                m = MarginalDistribution(n, t, lv, wt, label=f"marginal {n} {t}")
            elif "density" in blk:
                if "n_atoms" not in blk:
                    raise ScenarioValidationError("density presets need n_atoms", loc)
                k = _literal(blk["n_atoms"], where(s, "n_atoms"))
                m = discretize_density(blk["density"], k, n, t)
            elif "calls" in blk:
                f = (base / blk["calls"].strip()).resolve()
                if f not in csv_cache:
                    try:
                        csv_cache[f] = read_call_csv(f)
                    except OSError as exc:
                        raise ScenarioIOError(str(exc), where(s, "calls")) from None
                curve = csv_cache[f].get((n, t))
                if curve is None:
                    raise ScenarioValidationError(f"{f.name} has no quotes for asset {n} date {t}", loc)
                grid = _literal(blk["strikes"], where(s, "strikes")) if "strikes" in blk else [
                    k for k in curve.strikes if k > 0]
                m = marginal_from_calls(curve, grid)
            else:
                raise ScenarioValidationError("marginal needs atoms, density or calls", loc)
        except ValidationError as exc:
            raise ScenarioValidationError(str(exc), loc) from None
        marginals[(n, t)] = m
    try:
        model = MarketModel(d, T, x0, marginals)
    except ValidationError as exc:
        raise ScenarioValidationError(str(exc), where("model")) from None

    options = []
    for s in cp.sections():
        if not s.startswith("option"):
            continue
        parts = s.split(maxsplit=1)
        loc = where(s)
        if len(parts) != 2:
            raise ScenarioSyntaxError("option sections are named [option <id>]", loc)
        blk = cp[s]
        if "payoff" not in blk:
            raise ScenarioValidationError("option needs a payoff", loc)
        psi = _bind(blk["payoff"], d, T, where(s, "payoff"))
        kw = {}
        for key in ("asks", "bids"):
            kw[key] = _literal(blk[key], where(s, key)) if key in blk else ()
        for key in ("unbounded_ask_price", "unbounded_bid_price"):
            kw[key] = float(_literal(blk[key], where(s, key))) if key in blk else None
        if "liquid_price" in blk:
            px = float(_literal(blk["liquid_price"], where(s, "liquid_price")))
            kw["unbounded_ask_price"] = kw["unbounded_bid_price"] = px
        try:
            ladder = CostLadder(**kw)
        except (ValueError, TypeError) as exc:
            raise ScenarioValidationError(str(exc), loc) from None
        options.append(TradableOption(parts[1].strip(), psi, ladder))

    ctext = "unconstrained"
    if cp.has_section("trading") and "constraint" in cp["trading"]:
        ctext = cp["trading"]["constraint"].strip()
    spec, notes = parse_constraint(ctext, d, base, where("trading", "constraint"))

    extra = {}
    cap = DEFAULT_MAX_PATHS
    if cp.has_section("lattice"):
        blk = cp["lattice"]
        if "extra_levels" in blk:
            raw = _literal(blk["extra_levels"], where("lattice", "extra_levels"))
            extra = {tuple(int(v) for v in k): [float(x) for x in lv] for k, lv in dict(raw).items()}
        if "max_paths" in blk:
            cap = int(_literal(blk["max_paths"], where("lattice", "max_paths")))
    if max_paths is not None:
        cap = int(max_paths)
    # extra levels are written as (t, n); the market indexes marginals by (n, t)
    grid_extra = {}
    for (t, n), lv in extra.items():
        if (n, t) not in model.marginals:
            raise ScenarioValidationError(f"extra levels for unknown date/asset ({t}, {n})",
                                          where("lattice", "extra_levels"))
        grid_extra[(t, n)] = lv
    try:
        lattice = build(model, grid_extra or None, cap)
    except LatticeSizeError as exc:
        raise ScenarioValidationError(str(exc), where("lattice")) from None
    try:
        spec.validate(lattice)
    except C.ConstraintError as exc:
        raise ScenarioValidationError(str(exc), where("trading", "constraint")) from None

    tol = 1e-7
    payoff_text = "0"
    if cp.has_section("task"):
        blk = cp["task"]
        payoff_text = blk.get("payoff", "0")
        if "tol" in blk:
            tol = float(_literal(blk["tol"], where("task", "tol")))
    payoff = _bind(payoff_text, d, T, where("task", "payoff"))

    expect = {}
    if cp.has_section("expect"):
        for key, val in cp["expect"].items():
            try:
                expect[key] = ast.literal_eval(val.strip())
            except (ValueError, SyntaxError):
                expect[key] = val.strip()
    scen_name = Path(name).stem if name != "<string>" else name
    return Scenario(scen_name, model, lattice, payoff, tuple(options), spec, ctext, extra, cap, tol,
                    expect, Path(name) if name != "<string>" else None, notes)


def _bind(text: str, d: int, T: int, where: str) -> Payoff:
    try:
        return bind(text.strip(), d, T)
    except PayoffSyntaxError as exc:
        raise ScenarioSyntaxError(str(exc), where) from None
    except BindingError as exc:
        raise ScenarioValidationError(str(exc), where) from None


def parse_constraint(text: str, d: int, base: Path, where: str = ""):
    """Constraint stanza to a spec; returns ``(spec, notes)``."""
    notes = []
    m = re.fullmatch(r"\s*per_node\s*\(\s*(.*?)\s*\)\s*", text)
    if m:
        arg = m.group(1)
        if arg[:1] in "'\"":
            arg = shlex.split(arg)[0]
        f = (base / arg).resolve()
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                spec = C.node_table_from_json(f, d)
        except OSError as exc:
            raise ScenarioIOError(str(exc), where) from None
        except (C.ConstraintError, KeyError, ValueError) as exc:
            raise ScenarioValidationError(f"{f.name}: {exc}", where) from None
        for w in caught:
            notes.append(f"warning: {w.message}")
            warnings.warn(w.message, w.category, stacklevel=3)
        return spec, notes
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError:
        raise ScenarioSyntaxError(f"cannot read constraint {text!r}", where) from None
    if isinstance(node, ast.Name):
        name, args, kwargs = node.id, [], {}
    elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        try:
            args = [ast.literal_eval(a) for a in node.args]
            kwargs = {k.arg: ast.literal_eval(k.value) for k in node.keywords}
        except ValueError:
            raise ScenarioSyntaxError(f"constraint arguments must be literals: {text!r}", where) from None
    else:
        raise ScenarioSyntaxError(f"cannot read constraint {text!r}", where)

    def vec(vals):
        flat = []
        for v in vals:
            flat.extend(v if isinstance(v, (list, tuple)) else [v])
        if len(flat) == 1:
            flat = flat * d
        if len(flat) != d:
            raise ScenarioValidationError(f"{name} needs 1 or {d} values", where)
        return np.array(flat, dtype=float)

    try:
        if name == "unconstrained":
            return C.unconstrained(d), notes
        if name == "shortselling":
            return C.shortselling(vec(args or [0.0])), notes
        if name == "non_tradable":
            return C.non_tradable(d, int(args[0])), notes
        if name == "gamma":
            return C.Gamma(vec(args)), notes
        if name == "drawdown":
            a = kwargs.get("a", args[0] if args else None)
            b = kwargs.get("b", args[1] if len(args) > 1 else None)
            if a is None or b is None:
                raise ScenarioValidationError("drawdown needs a= and b= expressions", where)
            return C.drawdown(a, b, d), notes
        if name == "disk":
            if d != 2:
                raise ScenarioValidationError("the disk constraint is two-dimensional", where)
            k = int(args[0]) if args else 5
            poly = C.disk_polygon(k)
            return C.PerNode(lambda node, _p=poly: _p, 2, f"disk({k})"), notes
    except (C.ConstraintError, PayoffSyntaxError, BindingError, IndexError) as exc:
        raise ScenarioValidationError(f"constraint {text!r}: {exc}", where) from None
    raise ScenarioValidationError(f"unknown constraint {name!r}", where)


# ---------------------------------------------------------------------------
# dumping


def dumps(s: Scenario) -> str:
    """Serialize with explicit atoms; reloading reproduces the same LPs exactly."""
    out = ["[model]", f"d = {s.model.d}", f"T = {s.model.T}",
           f"x0 = {[float(v) for v in s.model.x0]!r}", ""]
    for (n, t), m in sorted(s.model.marginals.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        atoms = [(float(x), float(w)) for x, w in zip(m.levels, m.weights)]
        out += [f"[marginal {n} {t}]", f"atoms = {atoms!r}", ""]
    for opt in s.options:
        lad = opt.ladder
        out += [f"[option {opt.id}]", f"payoff = {opt.payoff}",
                f"asks = {list(lad.asks)!r}", f"bids = {list(lad.bids)!r}"]
        if lad.unbounded_ask_price is not None:
            out.append(f"unbounded_ask_price = {lad.unbounded_ask_price!r}")
        if lad.unbounded_bid_price is not None:
            out.append(f"unbounded_bid_price = {lad.unbounded_bid_price!r}")
        out.append("")
    ctext = s.constraint_text
    m = re.fullmatch(r"\s*per_node\s*\(\s*(.*?)\s*\)\s*", ctext)
    if m and s.source is not None:
        arg = m.group(1)
        if arg[:1] in "'\"":
            arg = shlex.split(arg)[0]
        ctext = f'per_node("{(s.source.parent / arg).resolve()}")'
    out += ["[trading]", f"constraint = {ctext}", ""]
    out += ["[lattice]", f"max_paths = {s.max_paths}"]
    if s.extra_levels:
        out.append(f"extra_levels = {dict(s.extra_levels)!r}")
    out += ["", "[task]", f"payoff = {s.payoff}", f"tol = {s.tol!r}", ""]
    if s.expect:
        out.append("[expect]")
        out += [f"{k} = {v!r}" for k, v in s.expect.items()]
        out.append("")
    return "\n".join(out)


def expected_value(expect: dict, key: str) -> float | str | None:
    v = expect.get(key)
    if isinstance(v, str) and v in ("inf", "-inf"):
        return math.inf if v == "inf" else -math.inf
    return v
