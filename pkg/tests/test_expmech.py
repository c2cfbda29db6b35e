"""Exponential mechanism over parameter grids and its tail certificate."""

import math

import numpy as np
import pytest
import scipy.stats

from dpbayes import (
    EmptyLevelSetError,
    GridSpec,
    InvalidEpsilonError,
    MapSensitivity,
    exp_mechanism_indices,
    exp_mechanism_sample,
    map_sensitivity,
    map_utility_certificate,
    sampling_probabilities,
)
from dpbayes.verify import exp_mechanism_bruteforce_probs

HALF = MapSensitivity(kind="stochastic", delta_value=0.5)


def ten_point_grid():
    points = [(0.1 * i,) for i in range(10)]
    masses = np.arange(1.0, 11.0)
    masses /= masses.sum()
    return GridSpec(points=tuple(points), prior_mass=tuple(masses))


# ---------------------------------------------------------------------------
# grid spec
# ---------------------------------------------------------------------------


def test_grid_mass_must_normalize():
    with pytest.raises(ValueError):
        GridSpec(points=((0.0,), (1.0,)), prior_mass=(0.5, 0.6))
    with pytest.raises(ValueError):
        GridSpec(points=((0.0,), (1.0,)), prior_mass=(1.1, -0.1))
    with pytest.raises(ValueError):
        GridSpec(points=(), prior_mass=())
    with pytest.raises(ValueError):
        GridSpec(points=((0.0,),), prior_mass=(0.5, 0.5))


def test_grid_uniform_constructor():
    grid = GridSpec.uniform([(0.0,), (0.5,), (1.0,)])
    assert grid.size == 3
    assert grid.masses == pytest.approx([1 / 3] * 3)


# ---------------------------------------------------------------------------
# sensitivity
# ---------------------------------------------------------------------------


def test_map_sensitivity_branches():
    assert map_sensitivity("lipschitz", 2.0, r=0.5).delta_value == pytest.approx(1.0)
    assert map_sensitivity("stochastic", 2.0).delta_value == pytest.approx(1.0)


def test_map_sensitivity_sqrt_r_scaling():
    base = map_sensitivity("lipschitz", 3.0, r=0.25).delta_value
    assert map_sensitivity("lipschitz", 3.0, r=1.0).delta_value == pytest.approx(2 * base)


def test_map_sensitivity_argument_errors():
    with pytest.raises(ValueError):
        map_sensitivity("lipschitz", 2.0)  # needs r
    with pytest.raises(ValueError):
        map_sensitivity("stochastic", 2.0, r=1.0)  # takes no r
    with pytest.raises(ValueError):
        map_sensitivity("other", 2.0)
    with pytest.raises(ValueError):
        map_sensitivity("lipschitz", -1.0, r=1.0)


# ---------------------------------------------------------------------------
# sampling distribution
# ---------------------------------------------------------------------------


def test_probs_epsilon_zero_equals_prior():
    grid = ten_point_grid()
    probs = sampling_probabilities(grid, lambda p: 100 * p[0], 0.0, HALF)
    expected = grid.masses / grid.masses.sum()
    assert np.array_equal(probs, expected)


def test_probs_match_bruteforce_normalization(rng):
    grid = ten_point_grid()
    for _ in range(20):
        u = rng.normal(size=grid.size)
        probs = sampling_probabilities(grid, u, 2.0, HALF)
        brute = exp_mechanism_bruteforce_probs(grid, u, 2.0, HALF)
        assert np.abs(probs - brute).max() < 1e-12


def test_probs_shift_invariance_exact(rng):
    # integer utilities, integer shift: fp arithmetic is exact, so the
    # two probability vectors must be bitwise identical
    grid = ten_point_grid()
    u = rng.integers(-8, 9, size=grid.size).astype(np.float64)
    shifted = u + 5.0
    a = sampling_probabilities(grid, u, 2.0, HALF)
    b = sampling_probabilities(grid, shifted, 2.0, HALF)
    assert np.array_equal(a, b)


def test_probs_utility_callable_and_array_agree():
    grid = ten_point_grid()
    arr = np.array([3.0 * p[0] for p in grid.points])
    a = sampling_probabilities(grid, lambda p: 3.0 * p[0], 1.0, HALF)
    b = sampling_probabilities(grid, arr, 1.0, HALF)
    assert np.array_equal(a, b)


def test_probs_reject_bad_inputs():
    grid = ten_point_grid()
    with pytest.raises(InvalidEpsilonError):
        sampling_probabilities(grid, np.zeros(10), -1.0, HALF)
    with pytest.raises(ValueError):
        sampling_probabilities(grid, np.full(10, np.inf), 1.0, HALF)
    with pytest.raises(ValueError):
        sampling_probabilities(grid, np.zeros(3), 1.0, HALF)


def test_probs_survive_large_log_posteriors():
    # realistic log-posterior magnitudes would overflow a direct exp
    grid = ten_point_grid()
    u = np.linspace(-4000.0, -3500.0, grid.size)
    probs = sampling_probabilities(grid, u, 2.0, HALF)
    assert np.isfinite(probs).all()
    assert probs.sum() == pytest.approx(1.0)
    assert probs.argmax() == grid.size - 1


# ---------------------------------------------------------------------------
# draws
# ---------------------------------------------------------------------------


def test_draws_deterministic_under_seed():
    grid = ten_point_grid()
    u = np.arange(10.0)
    a = exp_mechanism_indices(grid, u, 1.0, HALF, seed=21, size=100)
    b = exp_mechanism_indices(grid, u, 1.0, HALF, seed=21, size=100)
    assert np.array_equal(a, b)
    point = exp_mechanism_sample(grid, u, 1.0, HALF, seed=21)
    assert point == grid.points[int(a[0])]


def test_draw_frequencies_chi_square(rng):
    grid = ten_point_grid()
    u = rng.normal(size=grid.size)
    n = 20000
    idx = exp_mechanism_indices(grid, u, 2.0, HALF, seed=5, size=n)
    observed = np.bincount(idx, minlength=grid.size)
    expected = sampling_probabilities(grid, u, 2.0, HALF) * n
    stat = scipy.stats.chisquare(observed, expected)
    assert stat.pvalue > 0.01


def test_softmax_limit_hits_argmax():
    grid = ten_point_grid()
    u = np.arange(10.0)
    idx = exp_mechanism_indices(grid, u, 1e6, HALF, seed=3, size=1000)
    assert (idx == 9).all()


# ---------------------------------------------------------------------------
# tail certificate
# ---------------------------------------------------------------------------


def test_certificate_whole_grid_level_set():
    grid = ten_point_grid()
    u = np.linspace(0.0, 0.9, grid.size)
    t = 2.0  # deeper than the whole utility range, so S_t is everything
    assert map_utility_certificate(grid, u, 1.0, t) == pytest.approx(math.exp(-1.0 * t))


def test_certificate_monotone_in_epsilon():
    grid = ten_point_grid()
    u = np.linspace(0.0, 0.9, grid.size)
    values = [map_utility_certificate(grid, u, e, 0.5) for e in (0.5, 1.0, 2.0, 4.0)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_certificate_level_set_mass():
    grid = ten_point_grid()
    u = np.arange(10.0)
    t = 1.5  # S_t = top two utilities
    masses = grid.masses
    expected = math.exp(-2.0 * 1.5) / float(masses[-2:].sum())
    assert map_utility_certificate(grid, u, 2.0, t) == pytest.approx(expected)


def test_certificate_with_explicit_sensitivity():
    grid = ten_point_grid()
    u = np.arange(10.0)
    delta = map_sensitivity("stochastic", 2.0)  # delta_value 1
    got = map_utility_certificate(grid, u, 2.0, 1.5, sensitivity=delta)
    assert got == pytest.approx(math.exp(-2.0 * 1.5 / 2.0) / float(grid.masses[-2:].sum()))


def test_certificate_empty_level_set():
    # a sub-fp-resolution t leaves no utility strictly above u* - t
    grid = ten_point_grid()
    u = np.arange(10.0)
    with pytest.raises(EmptyLevelSetError):
        map_utility_certificate(grid, u, 1.0, 1e-300)


def test_certificate_requires_positive_t():
    grid = ten_point_grid()
    with pytest.raises(ValueError):
        map_utility_certificate(grid, np.arange(10.0), 1.0, 0.0)


def test_certificate_covers_monte_carlo(rng):
    # the drawn utility falls below u* - 2t at most bound-often
    grid = ten_point_grid()
    u = rng.normal(size=grid.size)
    eps, t, n = 1.0, 0.5, 20000
    bound = map_utility_certificate(grid, u, eps, t)
    idx = exp_mechanism_indices(grid, u, eps, HALF, seed=17, size=n)
    frac = float((u[idx] <= u.max() - 2 * t).mean())
    slack = 3 * math.sqrt(max(frac, 1e-4) * (1 - min(frac, 0.999)) / n)
    assert frac <= bound + slack
