import numpy as np
import pytest
from hypothesis import given, strategies as st

from superhedge.lattice import (LatticeMeasure, LatticeSizeError, build, drift_mass, marginal_masses,
                                marginal_of, product_measure)
from superhedge.market import MarginalDistribution, MarketModel


def two_asset_model():
    ms = [MarginalDistribution(1, 1, [1.0, 2.0], [0.5, 0.5]),
          MarginalDistribution(2, 1, [0.5, 1.0, 1.5], [0.25, 0.5, 0.25]),
          MarginalDistribution(1, 2, [0.0, 1.5, 3.0], [0.25, 0.5, 0.25]),
          MarginalDistribution(2, 2, [1.0], [1.0])]
    return MarketModel.from_list([1.5, 1.0], ms)


def test_shape_and_nodes():
    lat = build(two_asset_model())
    assert lat.n_paths == 2 * 3 * 3 * 1
    assert lat.paths.shape == (18, 2, 2)
    assert lat.n_nodes == [1, 6, 18]
    assert lat.completions == [18, 3, 1]
    # paths through one node share the history
    for j in range(lat.n_nodes[1]):
        block = lat.paths[lat.node_slice(1, j)]
        assert np.all(block[:, 0] == block[0, 0])
        np.testing.assert_array_equal(lat.node(1, j).x, block[0, 0])
    assert all(lat.path_index(lat.paths[p]) == p for p in range(lat.n_paths))
    assert lat.node(0, 0).key() == ()
    np.testing.assert_array_equal(lat.full_paths()[:, 0], np.broadcast_to(lat.x0, (18, 2)))


@given(st.integers(0, 2**31))
def test_drift_mass_sums_to_mean_change(seed):
    lat = build(two_asset_model())
    rng = np.random.default_rng(seed)
    q = LatticeMeasure(lat, rng.dirichlet(np.ones(lat.n_paths)))
    full = lat.full_paths()
    for t in range(lat.T):
        total = drift_mass(q, lat, t).sum(axis=0)
        want = q.weights @ full[:, t + 1] - q.weights @ full[:, t]
        np.testing.assert_allclose(total, want, atol=1e-12)


def test_product_measure_reproduces_marginals():
    model = two_asset_model()
    lat = build(model, {(1, 1): [3.0], (2, 2): [0.2]})
    q = product_measure(lat, model)
    for (n, t), m in model.marginals.items():
        got = marginal_of(q, n, t)
        assert got.levels.tolist() == m.levels.tolist()
        np.testing.assert_allclose(got.weights, m.weights, atol=1e-15)
    # extra levels are on the grid but carry no mass
    assert 3.0 in lat.grids[(1, 1)]
    masses = marginal_masses(q, lat, 1, 1)
    assert masses[list(lat.grids[(1, 1)]).index(3.0)] == 0.0


def test_size_cap_and_bad_extra_levels():
    model = two_asset_model()
    with pytest.raises(LatticeSizeError, match="18 paths"):
        build(model, max_paths=10)
    with pytest.raises(ValueError, match="unknown"):
        build(model, {(3, 1): [1.0]})


def test_measure_validation():
    lat = build(two_asset_model())
    with pytest.raises(ValueError, match="mass"):
        LatticeMeasure(lat, np.full(lat.n_paths, 0.1))
    with pytest.raises(ValueError, match="negative"):
        LatticeMeasure(lat, np.r_[-0.5, 1.5, np.zeros(lat.n_paths - 2)])
    q = LatticeMeasure(lat, np.r_[1.0, np.zeros(lat.n_paths - 1)])
    assert list(q.as_dict()) == ["1,0.5;0,1"]
