"""Laplace perturbation of conjugate update counts.

The sensitive quantity is the complete update vector: for a network on
|I| nodes, replacing one record changes at most one (alpha, beta)
increment pair per node, so the L1 sensitivity is 2|I| regardless of
structure. The mechanism adds Laplace(2|I| / epsilon) noise to every
one of the 2m update counts (m = sum_i 2^{|parents(i)|}, zero-filled
entries included) and truncates the noisy counts to [0, n]. Truncation
is post-processing and costs no privacy; outputs stay real-valued.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import InvalidEpsilonError, PriorTooSmallError
from .graph import BayesNetGraph, BetaParams, EntryKey, UpdateVector
from .randomness import laplace_from_uniform, substream

_NOISE_TAG = "laplace-update-noise"


@dataclass(frozen=True)
class LaplaceNoiseSpec:
    """Noise calibration for one release.

    epsilon: privacy budget of the release (> 0).
    node_count: number of network nodes |I|.
    n: number of records; truncation clamps counts into [0, n].
    """

    epsilon: float
    node_count: int
    n: int

    def __post_init__(self) -> None:
        if not self.epsilon > 0 or math.isnan(self.epsilon):
            raise InvalidEpsilonError(f"epsilon must be positive, got {self.epsilon}")
        if self.node_count <= 0:
            raise ValueError("node_count must be positive")
        if self.n < 0:
            raise ValueError("n must be non-negative")

    @property
    def scale(self) -> float:
        """Laplace scale b = 2|I| / epsilon (0 when epsilon is infinite)."""
        if math.isinf(self.epsilon):
            return 0.0
        return 2.0 * self.node_count / self.epsilon

    @classmethod
    def for_graph(cls, graph: BayesNetGraph, epsilon: float, n: int) -> "LaplaceNoiseSpec":
        return cls(epsilon=epsilon, node_count=graph.node_count, n=n)


@dataclass
class PerturbedUpdates:
    """Released noisy updates.

    entries hold the truncated values in [0, n]; raw holds the same
    draws before truncation (useful for deviation diagnostics; both are
    covered by the same privacy guarantee).
    """

    entries: dict[EntryKey, tuple[float, float]]
    raw: dict[EntryKey, tuple[float, float]]
    spec: LaplaceNoiseSpec


def update_sensitivity(graph: BayesNetGraph) -> float:
    """L1 sensitivity of the complete update vector under record replacement.

    Swapping one record moves one unit of (alpha or beta) mass per node,
    touching at most two counts per node: 2 * |I|.
    """
    return 2.0 * graph.node_count


def perturb_updates(updates: UpdateVector, spec: LaplaceNoiseSpec, seed: int) -> PerturbedUpdates:
    """Add per-count Laplace noise and truncate into [0, n].

    Each count's noise comes from its own keyed substream via a single
    inverse-CDF uniform, so the release is reproducible under the seed
    and independent of iteration order.
    """
    scale = spec.scale
    lo, hi = 0.0, float(spec.n)
    raw: dict[EntryKey, tuple[float, float]] = {}
    clamped: dict[EntryKey, tuple[float, float]] = {}
    for (node, cfg), (da, db) in updates.entries.items():
        rng = substream(seed, _NOISE_TAG, node, cfg)
        u = rng.random(2)
        z1 = da + laplace_from_uniform(u[0], scale)
        z2 = db + laplace_from_uniform(u[1], scale)
        raw[(node, cfg)] = (float(z1), float(z2))
        clamped[(node, cfg)] = (min(max(z1, lo), hi), min(max(z2, lo), hi))
    return PerturbedUpdates(entries=clamped, raw=raw, spec=spec)


def update_deviation_bound(graph: BayesNetGraph, epsilon: float, delta: float) -> float:
    """High-probability sup-norm bound on the pre-truncation noise.

    With probability at least 1 - delta, every one of the 2m noisy
    counts stays within (2|I|/epsilon) * ln(2m/delta) of its exact
    value. Union bound over the 2m independent Laplace draws.
    """
    if not epsilon > 0:
        raise InvalidEpsilonError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    m = graph.update_size()
    return (2.0 * graph.node_count / epsilon) * math.log(2.0 * m / delta)


def posterior_kl_bound(
    priors: Mapping[EntryKey, BetaParams],
    updates: UpdateVector,
    graph: BayesNetGraph,
    epsilon: float,
    delta: float,
    n: int,
) -> float:
    """Evaluate the closed-form utility bound on the joint posterior KL.

    The loss of the noisy posterior relative to the exact one, measured
    as the summed per-entry KL divergence, is bounded with probability
    1 - delta by

        sum_ij E_ij  +  sqrt( -(1/2) * sum_ij c_ij * ln(delta) )

    where c_ij = (2n+1) * [ln(alpha+n+1) + ln(beta+n+1)] caps the
    per-entry variation and the expectation term is

        E_ij = n * ln((alpha + dalpha)(beta + dbeta)),

    refined to  ln((alpha+n+1)(beta+n+1)) * (n/2) * exp(-n epsilon / 2|I|)
    once n >= 2|I|/epsilon. Requires every prior parameter >= 2 so the
    logarithms in the derivation stay non-negative. delta = 1 makes the
    square-root term vanish.
    """
    if not epsilon > 0:
        raise InvalidEpsilonError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if n < 0:
        raise ValueError("n must be non-negative")
    for key, prior in priors.items():
        if prior.alpha < 2.0 or prior.beta < 2.0:
            raise PriorTooSmallError(
                f"entry {key} has prior ({prior.alpha}, {prior.beta}); both must be >= 2"
            )
    refined = n >= 2.0 * graph.node_count / epsilon
    expectation_total = 0.0
    variation_total = 0.0
    for key, (da, db) in updates.entries.items():
        prior = priors[key]
        a, b = prior.alpha, prior.beta
        variation_total += (2.0 * n + 1.0) * (math.log(a + n + 1.0) + math.log(b + n + 1.0))
        if refined:
            expectation_total += (
                math.log((a + n + 1.0) * (b + n + 1.0))
                * (n / 2.0)
                * math.exp(-n * epsilon / (2.0 * graph.node_count))
            )
        else:
            expectation_total += n * math.log((a + da) * (b + db))
    return expectation_total + math.sqrt(-0.5 * variation_total * math.log(delta))
