"""Lipschitz calculus, privacy constants, and the trimmed posterior sampler."""

import math

import numpy as np
import pytest
import scipy.stats

from dpbayes import (
    BayesNetGraph,
    BetaParams,
    ConditionViolatedError,
    InvalidEpsilonError,
    LipschitzSpec,
    OmegaTooLargeError,
    StochasticLipschitzSpec,
    compose_lipschitz,
    compose_stochastic_lipschitz,
    lipschitz_constants_from_theta,
    max_to_marginal_ratio,
    pure_privacy_report,
    sampler_predictive,
    sampler_predictive_batch,
    stochastic_privacy_constant,
    stochastic_privacy_report,
    trim_bound,
    trimmed_beta_draws,
    trimmed_posterior_sample,
)
from dpbayes.sampler import KAPPA, OMEGA_BAR
from dpbayes.verify import (
    max_log_ratio_per_hamming,
    trimmed_nb_predictive_quadrature,
    truncated_beta_cdf,
    truncated_beta_moment,
)

from conftest import CHAIN3


# ---------------------------------------------------------------------------
# composition calculus
# ---------------------------------------------------------------------------


def test_compose_lipschitz_examples():
    assert compose_lipschitz(LipschitzSpec((2.0, 3.0, 1.0))) == 3.0
    assert compose_lipschitz(LipschitzSpec((0.7,))) == 0.7


def test_lipschitz_spec_rejects_negative():
    with pytest.raises(ValueError):
        LipschitzSpec((1.0, -0.5))
    with pytest.raises(ValueError):
        LipschitzSpec(())


def test_flip_bound_certified_on_product_networks(rng):
    # with parent-invariant conditionals the joint factorizes, so one
    # coordinate flip moves only its own factor and the per-flip bound
    # max_i L_i covers every assignment pair per unit Hamming distance
    for _ in range(10):
        k = 4
        graph = BayesNetGraph(node_count=k, parents=((),) * k)
        theta = {(i, 0): float(0.05 + 0.9 * rng.random()) for i in range(k)}
        spec = lipschitz_constants_from_theta(graph, theta)
        observed = max_log_ratio_per_hamming(graph, theta)
        assert observed <= compose_lipschitz(spec) + 1e-12


def test_flip_bound_needs_product_form():
    # a strongly parent-dependent conditional breaks the per-flip factor
    # argument: flipping the parent changes the child's factor too, so
    # the certified product-form bound must not be assumed in general
    graph = BayesNetGraph(node_count=2, parents=((), (0,)))
    theta = {(0, 0): 0.1, (1, 0): 0.2, (1, 1): 0.9}
    spec = lipschitz_constants_from_theta(graph, theta)
    observed = max_log_ratio_per_hamming(graph, theta)
    assert observed > compose_lipschitz(spec)


def test_compose_stochastic_single_node():
    spec = StochasticLipschitzSpec(per_node_c=(2.5,), L0=1.0)
    assert compose_stochastic_lipschitz(spec) == 2.5


def test_compose_stochastic_two_nodes():
    spec = StochasticLipschitzSpec(per_node_c=(2.0, 3.0), L0=1.0)
    assert compose_stochastic_lipschitz(spec) == pytest.approx(2.0 - math.log(2.0))


def test_compose_stochastic_condition_violated():
    spec = StochasticLipschitzSpec(per_node_c=(0.1,) * 100, L0=1.0)
    with pytest.raises(ConditionViolatedError):
        compose_stochastic_lipschitz(spec)


# ---------------------------------------------------------------------------
# privacy constants
# ---------------------------------------------------------------------------


def independent_m_transcription(c, L0, d, C):
    # second, structurally different transcription of the same constant
    tail = 1.0 / (1.0 - math.exp(-OMEGA_BAR)) + 1.0
    inner = math.exp(-L0 * d * c) / (
        math.exp(-OMEGA_BAR * (1.0 - d)) - math.exp(-OMEGA_BAR)
    )
    inner += math.exp(L0 * (1.0 - d) * c)
    return C * (KAPPA / c + L0 * tail + math.log(C) + math.log(inner))


def test_privacy_constant_dual_transcription_spot_value():
    got = stochastic_privacy_constant(c=1.0, L0=1.0, delta_slack=0.5, C=2.0)
    assert got == pytest.approx(independent_m_transcription(1.0, 1.0, 0.5, 2.0), rel=1e-12)
    # 18.818861930109906 computed independently at 40-digit precision
    assert got == pytest.approx(18.8188619301099, abs=1e-10)


def test_privacy_constant_kappa_term():
    # at c = kappa, C = 1 the bracket is exactly 1 + remaining terms
    L0, d = 1.0, 0.5
    got = stochastic_privacy_constant(c=KAPPA, L0=L0, delta_slack=d, C=1.0)
    tail = L0 * (1.0 / (1.0 - math.exp(-OMEGA_BAR)) + 1.0)
    inner = math.exp(-L0 * d * KAPPA) / (
        math.exp(-OMEGA_BAR * (1.0 - d)) - math.exp(-OMEGA_BAR)
    ) + math.exp(L0 * (1.0 - d) * KAPPA)
    assert got == pytest.approx(1.0 + tail + math.log(inner), rel=1e-12)


def test_privacy_constant_monotone_in_C():
    values = [
        stochastic_privacy_constant(1.0, 1.0, 0.5, C) for C in (1.0, 1.5, 2.0, 4.0)
    ]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_privacy_constant_domain_errors():
    with pytest.raises(ValueError):
        stochastic_privacy_constant(0.0, 1.0, 0.5, 2.0)
    with pytest.raises(ValueError):
        stochastic_privacy_constant(1.0, -1.0, 0.5, 2.0)
    with pytest.raises(ValueError):
        stochastic_privacy_constant(1.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        stochastic_privacy_constant(1.0, 1.0, 0.5, 0.5)


def test_pure_report_doubles_worst_constant():
    report = pure_privacy_report(LipschitzSpec((2.0, 3.0)))
    assert report.kind == "pure"
    assert report.epsilon == 6.0


def test_stochastic_report_pairs_delta():
    spec = StochasticLipschitzSpec(per_node_c=(3.0, 4.0), L0=1.0)
    report = stochastic_privacy_report(spec, delta_slack=0.5, C=2.0)
    assert report.kind == "stochastic"
    assert report.delta == min(1.0, math.sqrt(report.M_constant / 2.0))


def test_max_to_marginal_ratio_uniform_prior():
    # single Bernoulli observation: max likelihood 1, marginal 1/2
    assert max_to_marginal_ratio(BetaParams(1.0, 1.0)) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# trimming
# ---------------------------------------------------------------------------


def test_trim_bound_formula():
    assert trim_bound(2.0) == pytest.approx(math.exp(-1.0))
    assert trim_bound(10.0) == pytest.approx(math.exp(-5.0))


def test_trim_bound_degenerate_interval():
    with pytest.raises(OmegaTooLargeError):
        trim_bound(2 * math.log(2.0))  # omega exactly 1/2
    with pytest.raises(OmegaTooLargeError):
        trim_bound(1.0)
    with pytest.raises(InvalidEpsilonError):
        trim_bound(0.0)
    with pytest.raises(InvalidEpsilonError):
        trim_bound(-3.0)


def test_trimmed_draws_stay_inside_interval(rng):
    omega = math.exp(-1.0)
    draws = trimmed_beta_draws(BetaParams(3.0, 2.0), omega, rng, size=5000)
    assert draws.min() >= omega        # trimmed support, lower edge
    assert draws.max() <= 1.0 - omega


def test_trimmed_draws_mean_matches_quadrature(rng):
    omega = math.exp(-1.0)
    params = BetaParams(3.0, 2.0)
    draws = trimmed_beta_draws(params, omega, rng, size=20000)
    expected = truncated_beta_moment(params, omega, 1, 0)
    assert draws.mean() == pytest.approx(expected, abs=0.01)


def test_trimmed_draws_ks_against_inverse_cdf(rng):
    omega = math.exp(-1.0)
    params = BetaParams(3.0, 2.0)
    draws = trimmed_beta_draws(params, omega, rng, size=10000)
    stat = scipy.stats.kstest(draws, lambda x: truncated_beta_cdf(params, omega, x))
    assert stat.pvalue > 0.01


def test_trimmed_draws_vanishing_trim(rng):
    # huge epsilon: conditioning is invisible, plain Beta moments return
    params = BetaParams(5.0, 3.0)
    omega = trim_bound(60.0)
    draws = trimmed_beta_draws(params, omega, rng, size=20000)
    assert draws.mean() == pytest.approx(params.mean, abs=0.01)


def test_trimmed_draws_clamp_fallback(rng):
    # conditioning region mass ~ 0: budget exhausts, clamped draws remain in support
    params = BetaParams(500.0, 2.0)  # mass pinned near 1
    omega = 0.4
    draws = trimmed_beta_draws(params, omega, rng, size=50, budget=5)
    assert draws.min() >= omega and draws.max() <= 1.0 - omega


def test_trimmed_posterior_sample_interface():
    posterior = {(0, 0): BetaParams(3.0, 2.0), (1, 0): BetaParams(2.0, 2.0), (1, 1): BetaParams(4.0, 1.0)}
    theta = trimmed_posterior_sample(posterior, epsilon=2.0, seed=42)
    omega = math.exp(-1.0)
    assert set(theta) == set(posterior)
    assert all(omega <= v <= 1.0 - omega for v in theta.values())


def test_trimmed_posterior_sample_replay_and_order_independence():
    posterior = {(0, 0): BetaParams(3.0, 2.0), (1, 0): BetaParams(2.0, 2.0)}
    reordered = dict(reversed(list(posterior.items())))
    a = trimmed_posterior_sample(posterior, epsilon=2.0, seed=7)
    b = trimmed_posterior_sample(reordered, epsilon=2.0, seed=7)
    assert a == b
    c = trimmed_posterior_sample(posterior, epsilon=2.0, seed=8)
    assert c != a


def test_trimmed_posterior_sample_rejects_small_epsilon():
    with pytest.raises(OmegaTooLargeError):
        trimmed_posterior_sample({(0, 0): BetaParams(1.0, 1.0)}, epsilon=1.0, seed=1)


# ---------------------------------------------------------------------------
# Monte Carlo predictive
# ---------------------------------------------------------------------------


def nb2_posterior(symmetric=True):
    if symmetric:
        return {key: BetaParams(3.0, 3.0) for key in [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1)]}
    return {
        (0, 0): BetaParams(6.0, 4.0),
        (1, 0): BetaParams(2.0, 7.0),
        (1, 1): BetaParams(7.0, 2.0),
        (2, 0): BetaParams(3.0, 5.0),
        (2, 1): BetaParams(6.0, 3.0),
    }


NB2 = BayesNetGraph(node_count=3, parents=((), (0,), (0,)))


def test_predictive_symmetric_posterior_is_half():
    prob = sampler_predictive(NB2, nb2_posterior(), (1, 0), epsilon=3.0, samples=4000, seed=5)
    assert prob == pytest.approx(0.5, abs=0.02)


def test_predictive_matches_quadrature_single_feature():
    graph = BayesNetGraph(node_count=2, parents=((), (0,)))
    posterior = {(0, 0): BetaParams(5.0, 3.0), (1, 0): BetaParams(2.0, 6.0), (1, 1): BetaParams(6.0, 2.0)}
    epsilon = 3.0
    omega = trim_bound(epsilon)
    got = sampler_predictive(graph, posterior, (1,), epsilon=epsilon, samples=100000, seed=12)
    want = trimmed_nb_predictive_quadrature(posterior, (1,), omega)
    assert got == pytest.approx(want, abs=0.01)


def test_predictive_replay():
    args = (NB2, nb2_posterior(False), (1, 1))
    a = sampler_predictive(*args, epsilon=3.0, samples=500, seed=3)
    b = sampler_predictive(*args, epsilon=3.0, samples=500, seed=3)
    assert a == b


def test_predictive_batch_matches_scalar_path():
    posterior = nb2_posterior(False)
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    batch = sampler_predictive_batch(NB2, posterior, X, epsilon=3.0, samples=400, seed=9)
    single = [
        sampler_predictive(NB2, posterior, tuple(row), epsilon=3.0, samples=400, seed=9)
        for row in X
    ]
    assert np.allclose(batch, single, atol=1e-12)


def test_predictive_batch_requires_naive_bayes_shape():
    with pytest.raises(ValueError):
        sampler_predictive_batch(
            CHAIN3,
            {key: BetaParams(2.0, 2.0) for key in CHAIN3.entry_keys()},
            np.zeros((1, 2)),
            epsilon=3.0,
            samples=10,
            seed=0,
        )
