import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from instances import oracle_node_set, oracle_options, random_instance
from superhedge.arbitrage import (build_witness_system, ftap_check, optimal_arbitrage_profit,
                                  verify_certificate)
from superhedge.constraints import Gamma, PerNode, disk_polygon, node_table, NodeSet, shortselling, unconstrained
from superhedge.lattice import build, drift_mass
from superhedge.market import MarginalDistribution, MarketModel, discretize_density
from superhedge.orderbook import CostLadder, TradableOption
from superhedge.payoff import bind
from superhedge.pricing import PricingProblem, option_conjugates, penalty
import warnings


def shifted(inst, seed):
    """Same instance with the date-2 marginal moved, which usually breaks the martingale property."""
    rng = np.random.default_rng(seed)
    h = 0.25 * int(rng.integers(-2, 3))
    lv = [(a + h, w) for a, w in inst.marginals[(2, 1)] if a + h >= 0]
    if len(lv) != len(inst.marginals[(2, 1)]):
        return inst
    inst.marginals[(2, 1)] = lv
    ms = [inst.model.marginal(1, 1), MarginalDistribution(1, 2, [a for a, _ in lv], [w for _, w in lv])]
    inst.model = MarketModel.from_list(inst.model.x0, ms)
    return inst


@settings(max_examples=40)
@given(st.integers(0, 10**6))
def test_verdict_agrees_with_profit(seed):
    inst = random_instance(seed)
    if seed % 2:
        inst = shifted(inst, seed)
    p = inst.problem()
    f = ftap_check(p)
    o = optimal_arbitrage_profit(p)
    assert (f.verdict == "no_arbitrage") == (o.classification == "none")
    if f.witness is not None:
        assert penalty(p.with_options(()), f.witness) <= 1e-9
        for i, opt in enumerate(p.options):
            # a side without depth imposes no bound (ledger convention for empty sides)
            bid, ask = opt.ladder.bid_ask()
            mean = float(p.psi[i] @ f.witness.weights)
            if opt.ladder.bids:
                assert mean >= bid - 1e-9
            assert mean <= ask + 1e-9
        assert np.all(option_conjugates(p, f.witness) <= 1e-9)
        assert not f.messages
    else:
        chk = verify_certificate(f.certificate, p.with_payoff(np.zeros(p.lattice.n_paths)), "arbitrage")
        assert chk.ok and chk.min_margin > 0
    # G equals minus the superhedging price of zero in the direct formulation
    paths = O.enumerate_paths(2, 1, {k: [a for a, _ in v] for k, v in inst.marginals.items()})
    d0 = O.superhedge(inst.model.x0, inst.marginals, np.zeros(len(paths)), 2, 1, oracle_node_set(inst),
                      options=oracle_options(inst, paths))
    assert o.value == pytest.approx(max(-d0, 0.0), abs=1e-8)


def test_liquid_options_match_pinned_martingale_system():
    hits = {True: 0, False: 0}
    for seed in range(30):
        inst = random_instance(seed, boxes=False, n_options=0)
        p = inst.problem(constraint=unconstrained(1))
        txt = "pos(x[2][1] - x[1][1])"
        paths = O.enumerate_paths(2, 1, {k: [a for a, _ in v] for k, v in inst.marginals.items()})
        psi = bind(txt, 1, 2)(paths)
        lo, _ = O.martingale_transport(inst.model.x0, inst.marginals, psi, 2, 1, sense="min")
        hi, _ = O.martingale_transport(inst.model.x0, inst.marginals, psi, 2, 1, sense="max")
        px = [lo, 0.5 * (lo + hi), hi, lo - 0.05, hi + 0.05][seed % 5]
        if px < 0:
            continue
        lp_ = p.with_options((TradableOption("c", bind(txt, 1, 2), CostLadder.liquid(px)),))
        f = ftap_check(lp_)
        feasible = O.martingale_feasible(inst.model.x0, inst.marginals, 2, 1,
                                         pinned=[(bind(txt, 1, 2)(paths), px)])
        assert (f.verdict == "no_arbitrage") == feasible
        hits[feasible] += 1
    assert hits[True] and hits[False]


def test_positive_shortselling_bounds_force_martingale_witness():
    for seed in range(15):
        inst = random_instance(seed, boxes=False, n_options=0)
        p = inst.problem(constraint=shortselling([0.3]))
        f = ftap_check(p)
        assert f.verdict == "no_arbitrage"
        for t in range(p.lattice.T):
            dm = drift_mass(f.witness, p.lattice, t)
            assert np.all(np.abs(dm) <= 1e-9)


def test_zero_shortselling_allows_downward_drift():
    m = MarketModel.from_list([2.0], [MarginalDistribution(1, 1, [1.0, 2.0], [0.5, 0.5])])
    lat = build(m)
    zero = PricingProblem(m, lat, bind("0", 1, 1), (), shortselling([0.0]))
    assert ftap_check(zero).verdict == "no_arbitrage"
    free = zero.with_constraint(unconstrained(1))
    f = ftap_check(free)
    assert f.verdict == "arbitrage" and "drift" in f.violated
    assert optimal_arbitrage_profit(free).classification == "infinite"


def test_thin_constraint_instance():
    m = MarketModel.from_list([1.0], [MarginalDistribution(1, 1, [1.0, 2.0], [0.5, 0.5]),
                                      MarginalDistribution.dirac(1, 2, 2.0)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = node_table({(): NodeSet([[0.0]]), ((1.0,),): NodeSet([[0.0], [1.0]]),
                           ((2.0,),): NodeSet([[0.0]])}, 1, non_approximable=True)
    p = PricingProblem(m, build(m), bind("0", 1, 2), (), spec)
    f = ftap_check(p)
    assert f.verdict == "arbitrage"
    o = optimal_arbitrage_profit(p)
    assert o.value == pytest.approx(0.5, abs=1e-9) and o.dual_value == pytest.approx(0.5, abs=1e-9)
    chk = verify_certificate(f.certificate, p, "arbitrage")
    assert chk.ok and chk.min_margin == pytest.approx(0.5)


def test_disk_instance():
    m = MarketModel.from_list([1.0, 1.0], [discretize_density("uniform(1,2)", 20),
                                           MarginalDistribution.dirac(2, 1, 0.0)])
    poly = disk_polygon(5)
    p = PricingProblem(m, build(m), bind("0", 2, 1), (), PerNode(lambda node: poly, 2, "disk"))
    f = ftap_check(p)
    assert f.verdict == "arbitrage"
    chk = verify_certificate(f.certificate, p, "arbitrage")
    assert chk.ok and chk.min_margin > 0
    th = 2 * np.pi * np.arange(32) / 32
    want = max(0.5 * np.sin(th) - (1 - np.cos(th)))
    assert optimal_arbitrage_profit(p).value == pytest.approx(want, abs=1e-9)


def test_unbounded_profit_from_mispriced_liquid_claim():
    m = MarketModel.from_list([2.0], [MarginalDistribution(1, 1, [1.0, 3.0], [0.5, 0.5])])
    opt = TradableOption("unit", bind("1", 1, 1), CostLadder.liquid(2.0))
    p = PricingProblem(m, build(m), bind("0", 1, 1), (opt,))
    o = optimal_arbitrage_profit(p)
    assert o.classification == "infinite" and o.value == math.inf
    f = ftap_check(p)
    assert f.verdict == "arbitrage" and "bid_ask" in f.violated
    assert verify_certificate(f.certificate, p, "arbitrage").ok


def test_gamma_ftap_matches_martingale_feasibility():
    for seed in range(12):
        inst = random_instance(seed, boxes=False, n_options=0)
        if seed % 2:
            inst = shifted(inst, seed)
        p = inst.problem(constraint=Gamma([0.5]))
        feasible = O.martingale_feasible(inst.model.x0, inst.marginals, 2, 1)
        assert (ftap_check(p).verdict == "no_arbitrage") == feasible


def test_witness_system_groups():
    inst = random_instance(3, n_options=2)
    prog, qcols, groups = build_witness_system(inst.problem())
    assert set(groups) == {"marginal", "drift", "bid_ask"}
    assert qcols.size == build(inst.model).n_paths
    lo, hi = groups["bid_ask"]
    assert all(n.startswith(("bid.", "ask.")) for n in prog.row_names[lo:hi])


def test_certificate_check_rejects_bad_portfolio():
    inst = random_instance(5)
    p = inst.problem()
    from superhedge.pricing import price
    cert = price(p).certificate
    worse = cert.shifted(-1.0)
    chk = verify_certificate(worse, p)
    assert not chk.ok and "shortfall" in chk.message
