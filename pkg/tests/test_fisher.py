import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qtraj.fisher import (
    FisherSeries,
    ParameterGrid,
    build_grid,
    cramer_rao_bound,
    ensemble_average,
    fisher_series,
    index_weights,
    loglik_derivative,
    mc_integrate,
    mh_sample,
    nearest_grid_index,
    sample_parameters,
    standard_normal_logdensity,
)


def test_grid_examples():
    np.testing.assert_allclose(build_grid(1.0, 0.01, 3).values, [1.00, 1.01, 1.02, 1.03], atol=1e-15)
    np.testing.assert_array_equal(build_grid(0, 1, 1).values, [0, 1])
    assert len(build_grid(1.0, 0.01, 100)) == 101
    g = ParameterGrid.centered(1.0, 0.01, 100)
    assert g.values[50] == pytest.approx(1.0)


@pytest.mark.parametrize("args", [(0, 0, 3), (0, -0.1, 3), (0, np.nan, 3), (0, 1, 0), (0, 1, 2.5)])
def test_grid_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_derivative_examples():
    l = np.tile([[0.3, -1.2, 4.0]], (2, 1))
    np.testing.assert_array_equal(loglik_derivative(l, 0.01), 0)

    theta = np.array([1.00, 1.01])
    d = loglik_derivative(np.stack([theta**2, theta**2], axis=1), 0.01)
    assert d[0, 0] == pytest.approx(2.01, abs=1e-10)


@given(
    st.floats(-3, 3),
    st.floats(1e-3, 0.1),
    arrays(np.float64, 7, elements=st.floats(-10, 10)),
)
def test_derivative_exact_on_affine_surface(theta_0, d_theta, c):
    grid = ParameterGrid(theta_0, d_theta, 5)
    l = grid.values[:, None] * c[None, :] + 0.7
    d = loglik_derivative(l, d_theta)
    assert d.shape == (5, 7)
    scale = 1 + np.abs(l).max() / d_theta
    np.testing.assert_allclose(d, np.broadcast_to(c, d.shape), atol=1e-12 * scale)


def test_central_difference_option():
    grid = ParameterGrid(1.0, 0.01, 4)
    l = (grid.values**2)[:, None]
    back = loglik_derivative(l, 0.01)
    cent = loglik_derivative(l, 0.01, central=True)
    np.testing.assert_allclose(back[:, 0], 2 * grid.values[1:] - 0.01, atol=1e-10)
    np.testing.assert_allclose(cent[:-1, 0], 2 * grid.values[1:-1], atol=1e-10)
    assert cent[-1, 0] == back[-1, 0]


def test_derivative_errors():
    with pytest.raises(ValueError):
        loglik_derivative(np.zeros((1, 3)), 0.1)
    with pytest.raises(ValueError):
        loglik_derivative(np.zeros((3, 3)))


def test_mh_accepts_when_target_does_not_decrease():
    # flat target: every ratio is 1, so every proposal is taken
    chain = mh_sample(lambda x: 0.0, 0.3, 0.0, 2000, 0, 1, rng=0)
    assert chain.acceptance_rate == 1.0
    assert np.all(np.diff(chain.samples) != 0)
    # half-line target: a move is rejected only if it would leave the support
    chain = mh_sample(lambda x: 0.0 if x >= 0 else -math.inf, 0.3, 0.0, 2000, 0, 1, rng=0)
    assert np.all(chain.samples >= 0)
    stayed = np.diff(chain.samples) == 0
    np.testing.assert_array_equal(stayed, ~chain.accepted[1:])


@given(st.floats(-50, 50), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_mh_invariant_to_density_constant(log_c, seed):
    a = mh_sample(standard_normal_logdensity, 0.7, 1.0, 300, 0, 1, rng=seed)
    b = mh_sample(lambda x: standard_normal_logdensity(x) + log_c, 0.7, 1.0, 300, 0, 1, rng=seed)
    np.testing.assert_array_equal(a.accepted, b.accepted)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_mh_moments():
    chain = mh_sample(standard_normal_logdensity, 0.5, 0.0, 100_000, 10_000, 90_000, rng=1)
    kept = chain.retained
    assert len(kept) == 90_000
    mean, se = mc_integrate(lambda x: x, kept)
    assert abs(mean) < 4 * se
    var, se2 = mc_integrate(lambda x: x**2, kept)
    assert abs(var - 1) < 4 * se2 + 1e-3
    assert 0.5 < chain.acceptance_rate < 0.95


def test_mh_retains_tail_of_chain():
    chain = mh_sample(standard_normal_logdensity, 0.5, 0.0, 100, 10, 30, rng=0)
    np.testing.assert_array_equal(chain.retained, chain.samples[70:])
    assert chain.samples[0] == 0.0


def test_mh_transient_from_far_start():
    chain = mh_sample(standard_normal_logdensity, 0.1, -10.0, 500, 0, 500, rng=2)
    s = chain.samples
    assert s[0] == -10.0
    assert s[:125].mean() < -1
    # the chain climbs towards the mode, so later samples sit closer to it
    assert abs(s[-125:].mean()) < abs(s[:125].mean()) / 2


def test_mh_errors():
    with pytest.raises(ValueError):
        mh_sample(standard_normal_logdensity, 0.0, 0.0, 10, 0, 5)
    with pytest.raises(ValueError):
        mh_sample(standard_normal_logdensity, 1.0, 0.0, 10, 8, 5)
    with pytest.raises(ValueError):
        mh_sample(lambda x: -math.inf if x < 0 else 0.0, 1.0, -1.0, 10, 0, 5)


def test_mh_is_seeded():
    a = mh_sample(standard_normal_logdensity, 0.5, 0.0, 500, 0, 10, rng=5)
    b = mh_sample(standard_normal_logdensity, 0.5, 0.0, 500, 0, 10, rng=np.random.default_rng(5))
    np.testing.assert_array_equal(a.samples, b.samples)


def test_mc_integrate_second_moment():
    chain = mh_sample(standard_normal_logdensity, 0.5, 0.0, 110_000, 10_000, 100_000, rng=3)
    mean, se = mc_integrate(lambda x: x**2, chain.retained)
    assert 0 < se < 0.05
    assert abs(mean - 1) < 3 * se


def test_mc_integrate_iid_stderr_matches_textbook():
    x = np.random.default_rng(0).normal(size=10_000)
    mean, se = mc_integrate(lambda v: v, x)
    assert se == pytest.approx(1 / 100, rel=0.25)
    assert mc_integrate(lambda v: v, [1.0, 2.0])[0] == 1.5


def test_nearest_grid_index_examples():
    g = ParameterGrid(1.0, 0.01, 10)
    assert nearest_grid_index(1.03, g) == 3
    assert nearest_grid_index(5.0, g) == 10
    assert nearest_grid_index(-5.0, g) == 1
    assert nearest_grid_index(1.0, g) == 1
    assert nearest_grid_index(0.5 * (g.values[1] + g.values[2]), g) == 2
    np.testing.assert_array_equal(nearest_grid_index([1.031, 1.0449, 1.2], g), [3, 4, 10])


@given(st.floats(-1, 3))
def test_nearest_grid_index_is_argmin(theta):
    g = ParameterGrid(0.5, 0.1, 12)
    i = nearest_grid_index(theta, g)
    dist = np.abs(g.values - theta)
    assert 1 <= i <= 12
    assert dist[i] <= dist[1:].min() + 1e-9


def test_fisher_series_examples():
    derivs = np.array([[1.0, 0.5], [2.0, 0.0], [3.0, -1.0]])
    fs = fisher_series(derivs, [0, 1, 2], [0.0, 0.1])
    assert fs.information[0] == pytest.approx(14 / 3)
    fs = fisher_series(derivs, [2, 2, 2], [0.0, 0.1])
    np.testing.assert_allclose(fs.information, derivs[2] ** 2)
    np.testing.assert_array_equal(fisher_series(np.zeros((3, 2)), [0, 1], [0, 1]).information, 0)


@given(arrays(np.float64, (4, 6), elements=st.floats(-1e3, 1e3)), st.lists(st.integers(0, 3), min_size=1))
def test_fisher_series_nonnegative(derivs, indices):
    assert np.all(fisher_series(derivs, indices, np.arange(6)).information >= 0)


def test_index_weights():
    np.testing.assert_allclose(index_weights([0, 0, 2, 3], 4), [0.5, 0, 0.25, 0.25])
    with pytest.raises(IndexError):
        index_weights([4], 4)
    with pytest.raises(ValueError):
        index_weights([], 4)


@pytest.mark.parametrize("n_m", [100, 1_000, 10_000])
def test_fisher_series_monte_carlo_rate(n_m):
    """Rows i.i.d. N(0, s_i^2), indices uniform: I converges at rate 1/sqrt(N_M)."""
    rng = np.random.default_rng(n_m)
    n_rows, n_t, reps = 50, 40, 30
    s = np.linspace(0.5, 2.0, n_rows)
    errors = []
    for _ in range(reps):
        derivs = rng.normal(size=(n_rows, n_t)) * s[:, None]
        exact = np.mean(derivs**2, axis=0)
        idx = rng.integers(0, n_rows, size=n_m)
        errors.append(fisher_series(derivs, idx, np.arange(n_t)).information - exact)
    rms = np.sqrt(np.mean(np.square(errors)))
    # sampling error of the row average: sd of derivs^2 over rows / sqrt(N_M)
    expected = np.sqrt(np.mean(2 * s**4) + np.var(s**2)) / np.sqrt(n_m)
    assert rms == pytest.approx(expected, rel=0.2)


def test_ensemble_average_examples():
    t = np.linspace(0, 1, 5)
    one = FisherSeries(t, np.arange(5.0))
    avg = ensemble_average([one])
    np.testing.assert_array_equal(avg.information, one.information)
    np.testing.assert_array_equal(avg.stderr, 0)
    avg = ensemble_average([one, FisherSeries(t, np.arange(5.0))])
    np.testing.assert_array_equal(avg.information, one.information)
    assert avg.n_ensemble == 2

    rng = np.random.default_rng(0)
    v = 2.5
    series = [FisherSeries(t, 3 + rng.normal(scale=np.sqrt(v), size=5)) for _ in range(500)]
    avg = ensemble_average(series)
    np.testing.assert_allclose(avg.stderr, np.sqrt(v / 500), rtol=0.15)


def test_ensemble_average_errors():
    with pytest.raises(ValueError):
        ensemble_average([])
    with pytest.raises(ValueError):
        ensemble_average([FisherSeries([0, 1], [1, 1]), FisherSeries([0, 2], [1, 1])])
    with pytest.raises(ValueError):
        FisherSeries([0, 1], [1.0])


def test_cramer_rao_examples():
    assert cramer_rao_bound(1, 1) == 1
    assert cramer_rao_bound(4, 25) == pytest.approx(0.01)
    assert cramer_rao_bound(0, 10) == math.inf
    assert cramer_rao_bound(-1, 10) == math.inf
    with pytest.raises(ValueError):
        cramer_rao_bound(1, 0)


def test_sample_parameters_maps_chain():
    theta, chain = sample_parameters(1.0, 0.2, 0.5, 1000, 200, 500, rng=4)
    np.testing.assert_allclose(theta, 1.0 + 0.2 * chain.retained)
    assert len(theta) == 500
