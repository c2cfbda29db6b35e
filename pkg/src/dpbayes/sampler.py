"""Privacy from posterior sampling, and the trimmed Beta sampler.

Answering a query with a single posterior draw is itself a mechanism.
Its privacy follows from how fast the log-likelihood can change when
one record changes: a per-node Lipschitz bound composes into a network
guarantee, and a weaker stochastic variant (the prior concentrates on
smoothly-behaved parameters) buys a one-sided additive guarantee whose
constant M is computed here.

For Beta-Bernoulli networks the required smoothness is forced by
trimming: condition every success probability into [omega, 1 - omega],
omega = exp(-epsilon/2), so one record's flip moves any log-likelihood
by at most ln((1 - omega)/omega) <= epsilon per coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConditionViolatedError,
    InvalidEpsilonError,
    MissingPosteriorEntryError,
    OmegaTooLargeError,
)
from .graph import BayesNetGraph, BetaParams, PosteriorMap, ThetaMap
from .randomness import substream

_DRAW_TAG = "trimmed-posterior-draw"

# Fixed constants of the additive-guarantee expression.
KAPPA = 4.91081
OMEGA_BAR = 1.25643

DEFAULT_REJECTION_BUDGET = 1000


@dataclass(frozen=True)
class LipschitzSpec:
    """Per-node log-likelihood Lipschitz constants under per-node metrics."""

    per_node_L: tuple[float, ...]
    per_node_metric: str = "discrete"

    def __post_init__(self) -> None:
        if not self.per_node_L:
            raise ValueError("need at least one node")
        if any(L < 0 or math.isnan(L) for L in self.per_node_L):
            raise ValueError("Lipschitz constants must be non-negative")


@dataclass(frozen=True)
class StochasticLipschitzSpec:
    """Per-node prior tail rates c_i with shared smoothness scale L0."""

    per_node_c: tuple[float, ...]
    L0: float
    node_count: int = 0

    def __post_init__(self) -> None:
        if not self.per_node_c:
            raise ValueError("need at least one node")
        if any(c <= 0 for c in self.per_node_c):
            raise ValueError("tail rates must be positive")
        if self.L0 <= 0:
            raise ValueError("L0 must be positive")
        if self.node_count == 0:
            object.__setattr__(self, "node_count", len(self.per_node_c))


@dataclass(frozen=True)
class SamplerPrivacyReport:
    """What the posterior-sampling mechanism promises, in DP terms.

    kind "pure" reports epsilon per unit of record distance; kind
    "stochastic" reports the additive delta sqrt(M/2) per unit distance
    together with the M constant it came from.
    """

    kind: str
    epsilon: float = 0.0
    delta: float = 0.0
    M_constant: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        if self.kind not in ("pure", "stochastic"):
            raise ValueError(f"unknown report kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.kind == "stochastic" and not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1] to be reported")


def compose_lipschitz(spec: LipschitzSpec) -> float:
    """Network constant: the worst per-node constant, max_i L_i."""
    return max(spec.per_node_L)


def compose_stochastic_lipschitz(spec: StochasticLipschitzSpec) -> float:
    """Network tail rate c' = min_i c_i - ln|I|/L0.

    Only applicable while |I| <= exp(L0 * min_i c_i); beyond that the
    union bound over nodes consumes the whole tail and c' would be
    non-positive.
    """
    c_min = min(spec.per_node_c)
    size = spec.node_count
    if size > math.exp(spec.L0 * c_min):
        raise ConditionViolatedError(
            f"{size} nodes exceed exp(L0 * min c) = {math.exp(spec.L0 * c_min):.6g}"
        )
    return c_min - math.log(size) / spec.L0


def stochastic_privacy_constant(c: float, L0: float, delta_slack: float, C: float) -> float:
    """The M constant of the additive posterior-sampling guarantee.

    M = (kappa/c + L0 (1/(1-e^-om) + 1) + ln C
         + ln(e^{-L0 dc} (e^{-om(1-d)} - e^{-om})^{-1} + e^{L0(1-d)c})) * C

    with kappa = 4.91081 and om = 1.25643. Valid when record distances
    stay below (1-d)c; the report pairs it as (0, sqrt(M/2))-DP per
    unit distance.
    """
    if c <= 0 or L0 <= 0:
        raise ValueError("c and L0 must be positive")
    if not 0 < delta_slack < 1:
        raise ValueError("delta_slack must lie in (0, 1)")
    if C < 1:
        raise ValueError("C is a product of max-to-marginal ratios, hence >= 1")
    d = delta_slack
    bracket = (
        KAPPA / c
        + L0 * (1.0 / (1.0 - math.exp(-OMEGA_BAR)) + 1.0)
        + math.log(C)
        + math.log(
            math.exp(-L0 * d * c) / (math.exp(-OMEGA_BAR * (1.0 - d)) - math.exp(-OMEGA_BAR))
            + math.exp(L0 * (1.0 - d) * c)
        )
    )
    return bracket * C


def pure_privacy_report(spec: LipschitzSpec) -> SamplerPrivacyReport:
    """Pure guarantee: one posterior draw is (2 max L_i, 0)-DP per unit distance."""
    return SamplerPrivacyReport(kind="pure", epsilon=2.0 * compose_lipschitz(spec))


def stochastic_privacy_report(
    spec: StochasticLipschitzSpec, delta_slack: float, C: float
) -> SamplerPrivacyReport:
    """Additive guarantee built from the composed tail rate."""
    c_prime = compose_stochastic_lipschitz(spec)
    M = stochastic_privacy_constant(c_prime, spec.L0, delta_slack, C)
    return SamplerPrivacyReport(
        kind="stochastic", delta=min(1.0, math.sqrt(M / 2.0)), M_constant=M
    )


def max_to_marginal_ratio(prior: BetaParams, grid_points: int = 20001) -> float:
    """Grid-search the max-to-marginal likelihood ratio of one Bernoulli node.

    sup over observations x and parameters theta of p(x | theta)
    divided by the prior-marginal likelihood of x; for Beta priors the
    marginal is alpha/(alpha+beta) or beta/(alpha+beta). The likelihood
    max is approached on the theta grid, so this slightly undershoots
    the supremum at finite resolution.
    """
    grid = np.linspace(0.0, 1.0, grid_points)
    marg1 = prior.alpha / (prior.alpha + prior.beta)
    marg0 = prior.beta / (prior.alpha + prior.beta)
    return float(max(grid.max() / marg1, (1.0 - grid.min()) / marg0))


# ---------------------------------------------------------------------------
# trimmed Beta sampling
# ---------------------------------------------------------------------------


def trim_bound(epsilon: float) -> float:
    """omega = exp(-epsilon/2); the trim interval is [omega, 1 - omega].

    Raises OmegaTooLargeError when omega >= 1/2 (epsilon <= 2 ln 2):
    the interval is empty or a single point, so the caller must raise
    epsilon or pick a smaller omega directly.
    """
    if not epsilon > 0 or math.isnan(epsilon):
        raise InvalidEpsilonError(f"epsilon must be positive, got {epsilon}")
    omega = math.exp(-epsilon / 2.0)
    if omega >= 0.5:
        raise OmegaTooLargeError(
            f"epsilon={epsilon} gives omega={omega:.4f} >= 1/2; trim interval degenerate"
        )
    return omega


def trimmed_beta_draws(
    params: BetaParams,
    omega: float,
    rng: np.random.Generator,
    size: int = 1,
    budget: int = DEFAULT_REJECTION_BUDGET,
) -> np.ndarray:
    """Draws from Beta(alpha, beta) conditioned on [omega, 1 - omega].

    Rejection sampling in vectorized rounds; any coordinate still
    unresolved after `budget` proposals is clamped into the interval,
    which keeps the support guarantee at the cost of a small atom at
    the boundary when the conditioning mass is tiny.
    """
    if not 0 < omega < 0.5:
        raise OmegaTooLargeError(f"omega must lie in (0, 1/2), got {omega}")
    out = np.empty(size, dtype=np.float64)
    pending = np.arange(size)
    for _ in range(budget):
        if pending.size == 0:
            break
        proposal = rng.beta(params.alpha, params.beta, size=pending.size)
        ok = (proposal >= omega) & (proposal <= 1.0 - omega)
        out[pending[ok]] = proposal[ok]
        pending = pending[~ok]
    if pending.size:
        # Budget exhausted: clamp one last proposal per unresolved slot.
        last = rng.beta(params.alpha, params.beta, size=pending.size)
        out[pending] = np.clip(last, omega, 1.0 - omega)
    return out


def trimmed_posterior_sample(
    posterior: PosteriorMap,
    epsilon: float,
    seed: int,
    budget: int = DEFAULT_REJECTION_BUDGET,
) -> ThetaMap:
    """One trimmed draw per posterior entry, omega = exp(-epsilon/2).

    Entry (i, j) consumes its own keyed substream, so the result does
    not depend on dict iteration order.
    """
    omega = trim_bound(epsilon)
    theta: ThetaMap = {}
    for (node, cfg), params in posterior.items():
        rng = substream(seed, _DRAW_TAG, node, cfg)
        theta[(node, cfg)] = float(trimmed_beta_draws(params, omega, rng, 1, budget)[0])
    return theta


def _entry_draws(
    posterior: PosteriorMap, omega: float, seed: int, samples: int, budget: int
) -> dict[tuple[int, int], np.ndarray]:
    return {
        (node, cfg): trimmed_beta_draws(
            params, omega, substream(seed, _DRAW_TAG, node, cfg), samples, budget
        )
        for (node, cfg), params in posterior.items()
    }


def _require_naive_bayes(graph: BayesNetGraph, class_node: int) -> list[int]:
    features = [i for i in range(graph.node_count) if i != class_node]
    if graph.parents[class_node]:
        raise ValueError("class node must be parentless")
    for i in features:
        if graph.parents[i] != (class_node,):
            raise ValueError("every feature's sole parent must be the class node")
    return features


def sampler_predictive_batch(
    graph: BayesNetGraph,
    posterior: PosteriorMap,
    X: np.ndarray,
    epsilon: float,
    samples: int,
    seed: int,
    class_node: int = 0,
    budget: int = DEFAULT_REJECTION_BUDGET,
) -> np.ndarray:
    """Monte Carlo class-1 probabilities for rows of X under trimming.

    Per draw s the joint likelihood of (y, x) factorizes over the
    class term and per-feature terms, so log p_y for all rows at once
    is two matrix products against the S x d matrices of log(theta)
    and log(1-theta). Averages of exp use a per-row max subtraction.
    """
    if samples < 1:
        raise ValueError("need at least one Monte Carlo sample")
    omega = trim_bound(epsilon)
    features = _require_naive_bayes(graph, class_node)
    for key in [(class_node, 0)] + [(i, j) for i in features for j in (0, 1)]:
        if key not in posterior:
            raise MissingPosteriorEntryError(f"posterior entry {key} required")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(features):
        raise ValueError("X must be rows of feature bits, one column per feature")

    draws = _entry_draws(posterior, omega, seed, samples, budget)
    cls = draws[(class_node, 0)]
    # theta[s, f] for the feature given each class value
    log_like = []
    for y in (0, 1):
        th = np.stack([draws[(i, y)] for i in features], axis=1)
        log_th = np.log(th)
        log_1mth = np.log1p(-th)
        logp = X @ log_th.T + (1.0 - X) @ log_1mth.T  # rows x samples
        logp += np.log(cls) if y == 1 else np.log1p(-cls)
        log_like.append(logp)

    def _mean_exp(logp: np.ndarray) -> np.ndarray:
        m = logp.max(axis=1, keepdims=True)
        return np.exp(m.squeeze(1)) * np.exp(logp - m).mean(axis=1)

    p0 = _mean_exp(log_like[0])
    p1 = _mean_exp(log_like[1])
    return p1 / (p0 + p1)


def sampler_predictive(
    graph: BayesNetGraph,
    posterior: PosteriorMap,
    x: Sequence[int],
    epsilon: float,
    samples: int,
    seed: int,
    class_node: int = 0,
    budget: int = DEFAULT_REJECTION_BUDGET,
) -> float:
    """Pr(Y=1 | x) as a trimmed-posterior Monte Carlo average.

    Draw theta repeatedly, average the unnormalized joint likelihoods
    of (y=0, x) and (y=1, x), then normalize. Works for any network
    shape; the class node's bit in the record is overwritten by y.
    """
    if samples < 1:
        raise ValueError("need at least one Monte Carlo sample")
    omega = trim_bound(epsilon)
    draws = _entry_draws(posterior, omega, seed, samples, budget)

    record = np.zeros(graph.node_count, dtype=np.int64)
    feat = [i for i in range(graph.node_count) if i != class_node]
    if len(feat) != len(x):
        raise ValueError("feature vector length must be node_count - 1")
    record[feat] = np.asarray(x, dtype=np.int64)

    means = []
    for y in (0, 1):
        record[class_node] = y
        logp = np.zeros(samples, dtype=np.float64)
        for i in range(graph.node_count):
            cfg = 0
            for p, parent in enumerate(graph.parents[i]):
                cfg |= int(record[parent]) << p
            th = draws[(i, cfg)]
            logp += np.log(th) if record[i] else np.log1p(-th)
        m = logp.max()
        means.append(math.exp(m) * float(np.exp(logp - m).mean()))
    return means[1] / (means[0] + means[1])


def lipschitz_constants_from_theta(graph: BayesNetGraph, theta: ThetaMap) -> LipschitzSpec:
    """Per-node constants L_i = max over configs of |ln(theta/(1-theta))|.

    The max log-ratio a single value flip of node i can induce in its
    own conditional factor, maximized over parent configurations.
    """
    per_node = []
    for i in range(graph.node_count):
        worst = 0.0
        for j in range(graph.config_count(i)):
            t = theta[(i, j)]
            if not 0 < t < 1:
                raise ValueError(f"theta[{(i, j)}] must lie in (0, 1)")
            worst = max(worst, abs(math.log(t / (1.0 - t))))
        per_node.append(worst)
    return LipschitzSpec(per_node_L=tuple(per_node))
