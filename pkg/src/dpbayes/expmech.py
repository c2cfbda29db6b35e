"""Private MAP point estimates via the exponential mechanism.

The parameter space is a user-chosen finite grid carrying the prior as
its base measure. A point is sampled with probability proportional to
exp(epsilon * u(theta) / (2 delta)) * prior(theta), where the utility
u is the unnormalized log-posterior; only utility differences matter,
so dropping the marginal-likelihood constant is safe. All weight
handling goes through a max-shift before exponentiation because
realistic log-posteriors overflow exp otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyLevelSetError, InvalidEpsilonError
from .randomness import substream

_DRAW_TAG = "map-grid-draw"

Point = tuple[float, ...]
Utility = Callable[[Point], float] | Sequence[float] | np.ndarray

_MASS_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Finite parameter grid with its prior masses (the base measure)."""

    points: tuple[Point, ...]
    prior_mass: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("grid must be non-empty")
        if len(self.points) != len(self.prior_mass):
            raise ValueError("one prior mass per grid point")
        if any(m <= 0 for m in self.prior_mass):
            raise ValueError("prior masses must be positive")
        total = math.fsum(self.prior_mass)
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"prior masses sum to {total}, expected 1 within {_MASS_TOL}")

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def masses(self) -> np.ndarray:
        return np.asarray(self.prior_mass, dtype=np.float64)

    @classmethod
    def uniform(cls, points: Sequence[Sequence[float]]) -> "GridSpec":
        pts = tuple(tuple(float(c) for c in p) for p in points)
        return cls(points=pts, prior_mass=(1.0 / len(pts),) * len(pts))


@dataclass(frozen=True)
class MapSensitivity:
    """Utility sensitivity Δ in the mechanism's exponent.

    Two supported derivations: sqrt(L * r) from a Lipschitz likelihood
    with radius-r parameter support, or sqrt(M / 2) from the stochastic
    route's M constant.
    """

    kind: str
    delta_value: float

    def __post_init__(self) -> None:
        if self.kind not in ("lipschitz", "stochastic"):
            raise ValueError(f"unknown sensitivity kind {self.kind!r}")
        if not self.delta_value > 0:
            raise ValueError("sensitivity must be positive")


def map_sensitivity(kind: str, L_or_M: float, r: float | None = None) -> MapSensitivity:
    """Δ = sqrt(L*r) for kind 'lipschitz', Δ = sqrt(M/2) for 'stochastic'."""
    if not L_or_M > 0:
        raise ValueError("constant must be positive")
    if kind == "lipschitz":
        if r is None or not r > 0:
            raise ValueError("lipschitz sensitivity needs a positive radius r")
        return MapSensitivity(kind="lipschitz", delta_value=math.sqrt(L_or_M * r))
    if kind == "stochastic":
        if r is not None:
            raise ValueError("stochastic sensitivity takes no radius")
        return MapSensitivity(kind="stochastic", delta_value=math.sqrt(0.5 * L_or_M))
    raise ValueError(f"unknown sensitivity kind {kind!r}")


def _utility_values(grid: GridSpec, utility: Utility) -> np.ndarray:
    if callable(utility):
        vals = np.array([float(utility(p)) for p in grid.points], dtype=np.float64)
    else:
        vals = np.asarray(utility, dtype=np.float64)
        if vals.shape != (grid.size,):
            raise ValueError("need one utility value per grid point")
    if not np.isfinite(vals).all():
        raise ValueError("utility must be finite on every grid point")
    return vals


def sampling_probabilities(
    grid: GridSpec, utility: Utility, epsilon: float, delta: MapSensitivity
) -> np.ndarray:
    """Exactly-normalized sampling distribution over the grid points."""
    if epsilon < 0 or math.isnan(epsilon):
        raise InvalidEpsilonError(f"epsilon must be non-negative, got {epsilon}")
    u = _utility_values(grid, utility)
    expo = epsilon * u / (2.0 * delta.delta_value)
    expo -= expo.max()
    w = grid.masses * np.exp(expo)
    return w / w.sum()


def exp_mechanism_indices(
    grid: GridSpec,
    utility: Utility,
    epsilon: float,
    delta: MapSensitivity,
    seed: int,
    size: int = 1,
) -> np.ndarray:
    """Indices of `size` independent draws; deterministic under seed."""
    probs = sampling_probabilities(grid, utility, epsilon, delta)
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    rng = substream(seed, _DRAW_TAG)
    idx = np.searchsorted(cum, rng.random(size), side="right")
    return np.minimum(idx, grid.size - 1)


def exp_mechanism_sample(
    grid: GridSpec,
    utility: Utility,
    epsilon: float,
    delta: MapSensitivity,
    seed: int,
) -> Point:
    """One draw: a grid point with probability ∝ exp(εu/(2Δ)) * prior."""
    return grid.points[int(exp_mechanism_indices(grid, utility, epsilon, delta, seed, 1)[0])]


def map_utility_certificate(
    grid: GridSpec,
    utility: Utility,
    epsilon: float,
    t: float,
    sensitivity: MapSensitivity | None = None,
) -> float:
    """Tail bound on how far the drawn utility can fall below the best.

    Returns exp(-eps*t/(2Δ)) / prior(S_t) with S_t = {u > u* - t}; the
    draw then lands outside S_{2t} (utility <= u* - 2t) with at most
    that probability. With no sensitivity argument the bound is the
    plain exp(-eps*t)/prior(S_t) form, which is the Δ = 1/2 case.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if epsilon < 0 or math.isnan(epsilon):
        raise InvalidEpsilonError(f"epsilon must be non-negative, got {epsilon}")
    u = _utility_values(grid, utility)
    masses = grid.masses
    level = u.max() - t
    mass = float(masses[u > level].sum() / masses.sum())
    if mass <= 0.0:
        raise EmptyLevelSetError(f"no grid point has utility above {level}")
    scale = 1.0 if sensitivity is None else 2.0 * sensitivity.delta_value
    return math.exp(-epsilon * t / scale) / mass
