import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import vertex_enumeration
from superhedge import lp
from superhedge.lp import EQ, GE, LE, LinearProgram, LpBuilder, SolverOptions


def random_lp(seed: int, box: bool = True) -> LinearProgram:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    m = int(rng.integers(1, 6))
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    rel = rng.choice([LE, EQ, GE], size=m, p=[0.45, 0.15, 0.4])
    b = rng.integers(-4, 5, size=m).astype(float)
    c = rng.integers(-5, 6, size=n).astype(float)
    if box:
        lb = rng.choice([-5.0, 0.0, -2.0], size=n)
        ub = lb + rng.choice([3.0, 6.0, 10.0], size=n)
    else:
        lb = np.where(rng.random(n) < 0.5, 0.0, -np.inf)
        ub = np.full(n, np.inf)
    return LinearProgram(c, A, rel, b, lb, ub, sense=str(rng.choice(["min", "max"])))


SEEDS = range(200)


@pytest.mark.parametrize("rule", ["bland", "dantzig"])
def test_random_lps_match_vertex_enumeration(rule):
    opts = SolverOptions(rule=rule)
    counts = {"optimal": 0, "infeasible": 0}
    for seed in SEEDS:
        prog = random_lp(seed)
        status, value, _ = vertex_enumeration(prog.c, prog.A, prog.rel, prog.b, prog.lb, prog.ub, prog.sense)
        sol = lp.solve(prog, opts)
        assert sol.status == status, seed
        counts[status] += 1
        if status == "optimal":
            assert abs(sol.objective - value) <= 1e-8 * (1 + abs(value)), seed
            rep = lp.verify(prog, sol)
            assert rep.ok, (seed, rep.violations)
        else:
            assert sol.farkas is not None
            assert lp.verify_farkas(prog, sol.farkas).ok, seed
    assert counts["optimal"] > 50 and counts["infeasible"] > 10


@pytest.mark.parametrize("dualize", ["never", "always"])
def test_dualized_path_agrees(dualize):
    for seed in range(60):
        prog = random_lp(seed)
        a = lp.solve(prog, SolverOptions(dualize="never"))
        b = lp.solve(prog, SolverOptions(dualize=dualize))
        assert a.status == b.status
        if a.optimal:
            assert abs(a.objective - b.objective) <= 1e-8 * (1 + abs(a.objective))
            assert lp.verify(prog, b).ok


def test_unbounded_rays_verify():
    found = 0
    for seed in range(300):
        prog = random_lp(seed, box=False)
        sol = lp.solve(prog)
        if sol.status == "unbounded":
            found += 1
            assert sol.ray is not None
            assert lp.verify_ray(prog, sol.ray).ok, seed
    assert found > 5


def test_transport_two_by_two_certificate():
    # ship supplies (0.3, 0.7) to demands (0.6, 0.4) at unit costs [[1, 2], [3, 1]]
    b = LpBuilder("min")
    x = b.add_vars(["x11", "x12", "x21", "x22"], cost=[1.0, 2.0, 3.0, 1.0])
    b.add_row(x[[0, 1]], [1, 1], "=", 0.3, "supply1")
    b.add_row(x[[2, 3]], [1, 1], "=", 0.7, "supply2")
    b.add_row(x[[0, 2]], [1, 1], "=", 0.6, "demand1")
    b.add_row(x[[1, 3]], [1, 1], "=", 0.4, "demand2")
    prog = b.build()
    sol = lp.solve(prog)
    # optimum ships 0.3 on (1,1), 0.3 on (2,1), 0.4 on (2,2)
    np.testing.assert_allclose(sol.x, [0.3, 0.0, 0.3, 0.4], atol=1e-12)
    assert sol.objective == pytest.approx(0.3 + 0.9 + 0.4, abs=1e-12)
    rep = lp.verify(prog, sol)
    assert rep.ok and rep.gap <= 1e-12


def test_verify_names_the_violated_row():
    b = LpBuilder("min")
    x = b.add_vars(["a", "b"], cost=[1.0, 1.0])
    b.add_row(x, [1, 1], ">=", 1.0, "cover")
    b.add_row(x, [1, -1], "<=", 0.5, "balance")
    prog = b.build()
    sol = lp.solve(prog)
    assert lp.verify(prog, sol).ok
    bad = lp.LpSolution("optimal", sol.x - np.array([0.2, 0.2]), sol.duals, sol.reduced_costs, sol.objective - 0.4)
    rep = lp.verify(prog, bad)
    assert not rep.ok
    assert any("cover" in v for v in rep.violations)


def test_infeasible_farkas_direction():
    b = LpBuilder("min")
    x = b.add_vars(["a", "b"], lb=0.0)
    b.add_row(x, [1, 1], "<=", 1.0, "cap")
    b.add_row(x, [1, 1], ">=", 2.0, "need")
    prog = b.build()
    sol = lp.solve(prog)
    assert sol.status == "infeasible"
    y = sol.farkas
    rep = lp.verify_farkas(prog, y)
    assert rep.ok and rep.gap > 0
    # a wrong-sign certificate is rejected
    assert not lp.verify_farkas(prog, -y).ok


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_objective_scaling(seed, lam):
    prog = random_lp(seed)
    sol = lp.solve(prog)
    scaled = prog.scaled(lam)
    s2 = lp.solve(scaled)
    assert s2.status == sol.status
    if sol.optimal:
        assert s2.objective == pytest.approx(lam * sol.objective, rel=1e-9, abs=1e-9)
        # the original argmax stays optimal for the scaled objective
        moved = lp.LpSolution("optimal", sol.x, sol.duals * lam, sol.reduced_costs * lam, lam * sol.objective)
        assert lp.verify(scaled, moved, tol=1e-7).ok


def test_determinism():
    for seed in range(20):
        prog = random_lp(seed)
        a, b = lp.solve(prog), lp.solve(prog)
        assert a.status == b.status and a.iterations == b.iterations
        if a.optimal:
            assert np.array_equal(a.x, b.x) and np.array_equal(a.duals, b.duals)


def test_duals_are_rhs_sensitivities():
    for seed in range(40):
        prog = random_lp(seed)
        sol = lp.solve(prog)
        if not sol.optimal:
            continue
        h = 1e-6
        for i in range(prog.n_rows):
            bumped = LinearProgram(prog.c, prog.A, prog.rel, prog.b + h * np.eye(prog.n_rows)[i], prog.lb,
                                   prog.ub, prog.sense)
            s2 = lp.solve(bumped)
            if not s2.optimal:
                continue
            fd = (s2.objective - sol.objective) / h
            # one-sided derivative can differ at degenerate vertices; only check when stable
            if abs(fd - sol.duals[i]) > 1e-4:
                s3 = lp.solve(LinearProgram(prog.c, prog.A, prog.rel, prog.b - h * np.eye(prog.n_rows)[i],
                                            prog.lb, prog.ub, prog.sense))
                if s3.optimal:
                    bd = (sol.objective - s3.objective) / h
                    lo, hi = min(fd, bd), max(fd, bd)
                    assert lo - 1e-4 <= sol.duals[i] <= hi + 1e-4


def test_degenerate_problem_terminates_with_bland():
    # Beale's cycling example for the textbook Dantzig rule
    c = [-0.75, 150.0, -0.02, 6.0]
    A = [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]]
    prog = LinearProgram(c, A, [LE, LE, LE], [0.0, 0.0, 1.0], np.zeros(4), np.full(4, np.inf))
    for rule in ("bland", "dantzig"):
        sol = lp.solve(prog, SolverOptions(rule=rule))
        assert sol.optimal and sol.objective == pytest.approx(-0.05)
        assert lp.verify(prog, sol).ok


def test_empty_rows_are_presolved():
    prog = LinearProgram([1.0, 1.0], [[0.0, 0.0], [1.0, 1.0]], [LE, GE], [1.0, 2.0], [0, 0], [5, 5])
    sol = lp.solve(prog)
    assert sol.optimal and sol.objective == pytest.approx(2.0)
    bad = LinearProgram([1.0], [[0.0]], [GE], [1.0], [0], [1])
    assert lp.solve(bad).status == "infeasible"


def test_validation_errors():
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [LE], [1.0], [2.0], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([math.nan], [[1.0]], [LE], [1.0], [0.0], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [LE], [1.0], [0.0], [1.0], sense="sup")


def read_mps(path):
    """Minimal fixed-format reader for the files the writer produces."""
    rows, cols, rhs, bounds, kinds, section = [], {}, {}, {}, {}, None
    for line in open(path):
        if line.startswith("*"):
            continue
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        f = line.split()
        if section == "ROWS":
            kinds[f[1]] = f[0]
            if f[0] != "N":
                rows.append(f[1])
        elif section == "COLUMNS":
            cols.setdefault(f[0], {})[f[1]] = float(f[2])
        elif section == "RHS":
            rhs[f[1]] = float(f[2])
        elif section == "BOUNDS":
            bounds.setdefault(f[2], []).append((f[0], float(f[3]) if len(f) > 3 else None))
    return rows, cols, rhs, bounds, kinds


def test_mps_roundtrip(tmp_path):
    prog = random_lp(7)
    path = tmp_path / "p.mps"
    lp.write_mps(prog, path)
    rows, cols, rhs, bounds, kinds = read_mps(path)
    assert rows == [f"R{i:07d}" for i in range(prog.n_rows)]
    assert sorted(cols) == [f"C{j:07d}" for j in range(prog.n_vars)]
    sign = 1.0 if prog.sense == "min" else -1.0
    for j in range(prog.n_vars):
        col = cols[f"C{j:07d}"]
        assert col.get("OBJ", 0.0) == sign * prog.c[j]
        for i in range(prog.n_rows):
            assert col.get(f"R{i:07d}", 0.0) == prog.A[i, j]
    for i in range(prog.n_rows):
        assert rhs.get(f"R{i:07d}", 0.0) == prog.b[i]
        assert kinds[f"R{i:07d}"] == {LE: "L", EQ: "E", GE: "G"}[int(prog.rel[i])]
