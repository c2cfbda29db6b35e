"""Walsh-basis coefficient release, reconstruction, consistency, stealth."""

import math

import numpy as np
import pytest

from dpbayes import (
    BayesNetGraph,
    BetaParams,
    CoefficientSet,
    Dataset,
    DownwardClosure,
    InvalidEpsilonError,
    InvalidTError,
    MissingCoefficientError,
    NonPositivePosteriorParamError,
    build_table,
    compute_updates,
    downward_closure,
    exact_coefficients,
    fourier_coefficient,
    fourier_posterior_params,
    marginal_error_bound,
    noise_scale,
    posterior_params,
    project_marginal,
    reconstruct_marginal,
    release_coefficients,
    shared_submarginal,
    stealth_increment,
    uniform_priors,
)
from dpbayes.verify import dense_table, walsh_coefficients_dense, dense_marginal

from conftest import CHAIN3, SINGLE, random_dag, random_dataset


def keep_vector(k: int, mask: int) -> tuple[int, ...]:
    return tuple((mask >> p) & 1 for p in range(k))


# ---------------------------------------------------------------------------
# downward closure
# ---------------------------------------------------------------------------


def test_closure_single_node():
    clo = downward_closure(SINGLE)
    assert set(clo.members) == {0, 1}
    assert clo.size == 2


def test_closure_naive_bayes_size():
    for d in (2, 5, 16):
        nb = BayesNetGraph(node_count=d + 1, parents=((),) + ((0,),) * d)
        assert downward_closure(nb).size == 2 * d + 2


def test_closure_chain_members():
    # families {0}, {0,1}, {1,2} -> submasks {0,1,2,3,4,6}
    clo = downward_closure(CHAIN3)
    assert set(clo.members) == {0b000, 0b001, 0b010, 0b011, 0b100, 0b110}
    assert clo.size == 6


def test_closure_validation():
    with pytest.raises(ValueError):
        DownwardClosure(k=2, members=(1, 2))  # missing the empty mask
    with pytest.raises(ValueError):
        DownwardClosure(k=2, members=(0, 3))  # not downward closed
    with pytest.raises(ValueError):
        DownwardClosure(k=1, members=(0, 2))  # mask outside k bits


def test_closure_economy_bound(rng):
    for _ in range(10):
        k = int(rng.integers(2, 6))
        graph = random_dag(rng, k, max_indegree=2)
        clo = downward_closure(graph)
        indeg = max(len(p) for p in graph.parents)
        assert clo.size <= k * (1 << (1 + indeg))


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------


def test_coefficient_all_zeros_gamma(rng):
    data = random_dataset(rng, 37, 4)
    assert fourier_coefficient(data, 0) == pytest.approx(37 * 2.0**-2)


def test_coefficient_one_dimensional():
    data = Dataset.from_records([(0,)] * 3 + [(1,)] * 5)
    assert fourier_coefficient(data, 1) == pytest.approx((3 - 5) / math.sqrt(2))


def test_coefficient_streaming_equals_dense(rng):
    for _ in range(10):
        k = int(rng.integers(1, 11))
        data = random_dataset(rng, int(rng.integers(1, 200)), k)
        dense = walsh_coefficients_dense(dense_table(data, k))
        for gamma in rng.integers(0, 1 << k, size=5):
            got = fourier_coefficient(data, int(gamma))
            assert got == pytest.approx(dense[int(gamma)], abs=1e-9)


def test_noise_scale_formula():
    clo = downward_closure(CHAIN3)  # size 6, k = 3
    assert noise_scale(clo, epsilon=1.0) == pytest.approx(12 / 2**1.5)
    assert noise_scale(clo, epsilon=1.0) == pytest.approx(4.2426, abs=1e-4)


def test_stealth_increment_formula():
    clo = downward_closure(CHAIN3)
    t = math.log(10.0)
    expected = 4.0 * t * 36 / (1.0 * 2**1.5)
    assert stealth_increment(clo, epsilon=1.0, t=t) == pytest.approx(expected)


# ---------------------------------------------------------------------------
# release
# ---------------------------------------------------------------------------


def test_release_rejects_bad_parameters(rng):
    data = random_dataset(rng, 10, 3)
    clo = downward_closure(CHAIN3)
    with pytest.raises(InvalidEpsilonError):
        release_coefficients(data, clo, epsilon=0.0, t=1.0, seed=1)
    with pytest.raises(InvalidTError):
        release_coefficients(data, clo, epsilon=1.0, t=0.0, seed=1)
    with pytest.raises(InvalidTError):
        release_coefficients(data, clo, epsilon=1.0, t=-2.0, seed=1)


def test_release_near_zero_noise_limit(rng):
    data = random_dataset(rng, 50, 3)
    clo = downward_closure(CHAIN3)
    exact = exact_coefficients(data, clo)
    released = release_coefficients(data, clo, epsilon=1e12, t=1e-12, seed=4)
    for gamma in clo.members:
        assert released.values[gamma] == pytest.approx(exact.values[gamma], abs=1e-6)


def test_release_applies_stealth_increment(rng):
    # with a fixed seed, bumping t moves only the empty-mask coefficient
    data = random_dataset(rng, 50, 3)
    clo = downward_closure(CHAIN3)
    t1, t2 = 0.5, 2.5
    r1 = release_coefficients(data, clo, epsilon=1.0, t=t1, seed=11)
    r2 = release_coefficients(data, clo, epsilon=1.0, t=t2, seed=11)
    gap = stealth_increment(clo, 1.0, t2) - stealth_increment(clo, 1.0, t1)
    assert r2.values[0] - r1.values[0] == pytest.approx(gap, abs=1e-12)
    for gamma in clo.members:
        if gamma:
            assert r1.values[gamma] == r2.values[gamma]


def test_release_determinism(rng):
    data = random_dataset(rng, 30, 3)
    clo = downward_closure(CHAIN3)
    a = release_coefficients(data, clo, epsilon=1.0, t=1.0, seed=8)
    b = release_coefficients(data, clo, epsilon=1.0, t=1.0, seed=8)
    assert a.values == b.values
    c = release_coefficients(data, clo, epsilon=1.0, t=1.0, seed=9)
    assert c.values != a.values


def test_coefficient_set_requires_exact_index_match():
    clo = downward_closure(SINGLE)
    with pytest.raises(ValueError):
        CoefficientSet(closure=clo, values={0: 1.0}, noise_scale=0.0, t=0.0)


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------


def test_reconstruction_zero_noise_identity(rng):
    for _ in range(10):
        k = int(rng.integers(1, 7))
        graph = random_dag(rng, k, max_indegree=2)
        data = random_dataset(rng, int(rng.integers(1, 300)), k)
        table = build_table(data)
        coeffs = exact_coefficients(data, downward_closure(graph))
        for i in range(k):
            recon = reconstruct_marginal(coeffs, i, graph)
            direct = project_marginal(table, keep_vector(k, graph.family_mask(i)))
            for cell in recon.cells:
                assert recon.value(cell) == pytest.approx(direct.value(cell), abs=1e-9)


def test_reconstruction_two_variable_example():
    graph = BayesNetGraph(node_count=2, parents=((), (0,)))
    data = Dataset.from_records([(0, 0), (0, 0), (1, 1)])
    coeffs = exact_coefficients(data, downward_closure(graph))
    recon = reconstruct_marginal(coeffs, 1, graph)  # family {0, 1}: whole table
    assert recon.value((0, 0)) == pytest.approx(2.0, abs=1e-12)
    assert recon.value((1, 1)) == pytest.approx(1.0, abs=1e-12)
    assert recon.value((0, 1)) == pytest.approx(0.0, abs=1e-12)
    assert recon.value((1, 0)) == pytest.approx(0.0, abs=1e-12)


def test_reconstruction_matches_dense_oracle(rng):
    k = 5
    graph = random_dag(rng, k, max_indegree=2)
    data = random_dataset(rng, 120, k)
    coeffs = exact_coefficients(data, downward_closure(graph))
    dense = dense_table(data, k)
    for i in range(k):
        fam = sorted(graph.family(i))
        marg = dense_marginal(dense, k, fam)
        recon = reconstruct_marginal(coeffs, i, graph)
        for idx in range(marg.size):
            cell = tuple((idx >> p) & 1 for p in range(len(fam)))
            assert recon.value(cell) == pytest.approx(float(marg[idx]), abs=1e-9)


def test_reconstruction_missing_coefficient():
    # a closure built for a subgraph lacks gammas of the full family
    data = Dataset.from_records([(0, 0), (1, 1)])
    narrow = DownwardClosure(k=2, members=(0, 1))
    coeffs = CoefficientSet(closure=narrow, values={0: 1.0, 1: 0.5}, noise_scale=0.0, t=0.0)
    graph = BayesNetGraph(node_count=2, parents=((), (0,)))
    with pytest.raises(MissingCoefficientError):
        reconstruct_marginal(coeffs, 1, graph)


def test_noisy_reconstructions_consistent(rng):
    # shared sub-marginals agree across nodes no matter the noise
    d = 4
    nb = BayesNetGraph(node_count=d + 1, parents=((),) + ((0,),) * d)
    data = random_dataset(rng, 60, d + 1)
    clo = downward_closure(nb)
    for seed in range(10):
        coeffs = release_coefficients(data, clo, epsilon=0.5, t=math.log(10), seed=seed)
        margs = {i: reconstruct_marginal(coeffs, i, nb) for i in range(1, d + 1)}
        onto_class = [
            shared_submarginal(margs[i], (0, i), (0,)) for i in range(1, d + 1)
        ]
        base = onto_class[0]
        for other in onto_class[1:]:
            for cell in ((0,), (1,)):
                assert other.value(cell) == pytest.approx(base.value(cell), abs=1e-9)


# ---------------------------------------------------------------------------
# posterior parameters
# ---------------------------------------------------------------------------


def test_fourier_posterior_zero_noise_matches_exact_path(rng):
    data = random_dataset(rng, 40, 3)
    coeffs = exact_coefficients(data, downward_closure(CHAIN3))
    priors = uniform_priors(CHAIN3)
    via_fourier = fourier_posterior_params(coeffs, CHAIN3, priors)
    via_counts = posterior_params(priors, compute_updates(CHAIN3, data))
    assert set(via_fourier) == set(via_counts)
    for key in via_counts:
        assert via_fourier[key].alpha == pytest.approx(via_counts[key].alpha, abs=1e-9)
        assert via_fourier[key].beta == pytest.approx(via_counts[key].beta, abs=1e-9)


def crafted_single_node_coeffs(cell0: float, cell1: float) -> CoefficientSet:
    # k=1 reconstruction: cell(b) = (z0 + (-1)^b z1) / sqrt(2)
    clo = downward_closure(SINGLE)
    z0 = (cell0 + cell1) / math.sqrt(2.0)
    z1 = (cell0 - cell1) / math.sqrt(2.0)
    return CoefficientSet(closure=clo, values={0: z0, 1: z1}, noise_scale=0.0, t=0.0)


def test_small_negative_cell_still_valid():
    coeffs = crafted_single_node_coeffs(cell0=2.0, cell1=-0.3)
    post = fourier_posterior_params(coeffs, SINGLE, uniform_priors(SINGLE))
    assert post[(0, 0)].alpha == pytest.approx(0.7)
    assert post[(0, 0)].beta == pytest.approx(3.0)


def test_large_negative_cell_flagged():
    coeffs = crafted_single_node_coeffs(cell0=2.0, cell1=-1.5)
    with pytest.raises(NonPositivePosteriorParamError) as err:
        fourier_posterior_params(coeffs, SINGLE, uniform_priors(SINGLE))
    assert (0, 0) in err.value.entries


def test_clamp_fallback_floors_cells():
    coeffs = crafted_single_node_coeffs(cell0=2.0, cell1=-1.5)
    post = fourier_posterior_params(
        coeffs, SINGLE, uniform_priors(SINGLE), clamp_nonpositive=True
    )
    assert post[(0, 0)].alpha == pytest.approx(1.0)  # floored cell + prior
    assert post[(0, 0)].beta == pytest.approx(3.0)


# ---------------------------------------------------------------------------
# utility bound and stealth rate
# ---------------------------------------------------------------------------


def test_error_bound_increases_in_t():
    values = [
        marginal_error_bound(CHAIN3, 1, epsilon=1.0, delta=0.1, t=t)
        for t in (0.5, 1.0, 2.0, 4.0)
    ]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_error_bound_naive_bayes_spot_value():
    nb = BayesNetGraph(node_count=3, parents=((), (0,), (0,)))  # d=2, |J|=6
    t = math.log(10.0)
    got = marginal_error_bound(nb, 1, epsilon=1.0, delta=0.1, t=t)
    expected = (4 * 6 / 1.0) * (2 * math.log(6 / 0.1) + t * 6)
    assert got == pytest.approx(expected)


def test_stealth_rate_small_sample(rng):
    # 200-release check at the flagship t; the acceptance suite runs 1000
    d = 2
    nb = BayesNetGraph(node_count=d + 1, parents=((),) + ((0,),) * d)
    data = random_dataset(rng, 50, d + 1)
    clo = downward_closure(nb)
    ok = 0
    for seed in range(200):
        coeffs = release_coefficients(data, clo, epsilon=1.0, t=math.log(10), seed=seed)
        recons = [reconstruct_marginal(coeffs, i, nb) for i in range(d + 1)]
        ok += all(v >= 0.0 for r in recons for v in r.cells.values())
    assert ok >= 170
