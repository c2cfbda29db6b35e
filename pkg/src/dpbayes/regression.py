"""Bayesian linear regression with a norm-truncated Gaussian posterior.

The conjugate pair: Gaussian likelihood with known noise variance and
a zero-mean Gaussian prior restricted to a Euclidean ball. Posterior
mean and covariance have the usual ridge form; sampling restricts to
the ball by rejection. The privacy constant of answering with a
posterior draw is the Lipschitz bound L(w) of the per-record
log-likelihood, evaluated at the truncation radius so the report never
depends on the realized sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import RejectionBudgetExhaustedError, SingularSystemError
from .randomness import substream

_DRAW_TAG = "regression-weight-draw"

DEFAULT_REJECTION_BUDGET = 1000


@dataclass(frozen=True)
class RegressionData:
    """Design matrix, targets, and the assumed noise variance.

    Rows must satisfy ||x_i||_2 <= 1 and |y_i| <= 1; use
    scale_regression_data to ingest raw data. x_scale and y_scale
    record the divisors applied, for mapping predictions back.
    """

    X: np.ndarray
    y: np.ndarray
    sigma2: float
    x_scale: float = 1.0
    y_scale: float = 1.0

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be n x d with a length-n target vector")
        if not self.sigma2 > 0:
            raise ValueError("noise variance must be positive")
        tol = 1e-9
        if X.size and float(np.linalg.norm(X, axis=1).max()) > 1.0 + tol:
            raise ValueError("feature rows must have 2-norm at most 1; scale first")
        if y.size and float(np.abs(y).max()) > 1.0 + tol:
            raise ValueError("targets must lie in [-1, 1]; scale first")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def scale_regression_data(X: np.ndarray, y: np.ndarray, sigma2: float) -> RegressionData:
    """Ingest raw data, dividing rows by the max row norm and y by max |y|."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x_scale = float(np.linalg.norm(X, axis=1).max()) if X.size else 1.0
    y_scale = float(np.abs(y).max()) if y.size else 1.0
    x_scale = x_scale if x_scale > 0 else 1.0
    y_scale = y_scale if y_scale > 0 else 1.0
    return RegressionData(
        X=X / x_scale, y=y / y_scale, sigma2=sigma2, x_scale=x_scale, y_scale=y_scale
    )


@dataclass(frozen=True)
class GaussianPosterior:
    """N(mu_n, sigma_n) restricted to the ball ||w||_2 <= radius."""

    mu_n: np.ndarray
    sigma_n: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu_n, dtype=np.float64)
        sig = np.asarray(self.sigma_n, dtype=np.float64)
        if mu.ndim != 1 or sig.shape != (mu.size, mu.size):
            raise ValueError("mean and covariance shapes disagree")
        if float(np.abs(sig - sig.T).max()) > 1e-10:
            raise ValueError("covariance must be symmetric")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "mu_n", mu)
        object.__setattr__(self, "sigma_n", sig)

    @property
    def d(self) -> int:
        return self.mu_n.size


def _as_precision(precision: float | np.ndarray, d: int) -> np.ndarray:
    if np.isscalar(precision):
        if not precision > 0:  # type: ignore[operator]
            raise ValueError("scalar prior precision must be positive")
        return float(precision) * np.eye(d)
    lam = np.asarray(precision, dtype=np.float64)
    if lam.shape != (d, d):
        raise ValueError("precision matrix must be d x d")
    if float(np.abs(lam - lam.T).max()) > 1e-10:
        raise ValueError("precision matrix must be symmetric")
    return lam


def fit_posterior(
    data: RegressionData, precision: float | np.ndarray, radius: float
) -> GaussianPosterior:
    """mu_n = (X'X + s2 L)^-1 X'y and sigma_n = s2 (X'X + s2 L)^-1.

    Solved through a Cholesky factorization of the posterior precision;
    no explicit inverse is formed for the mean. Raises
    SingularSystemError if the system is not numerically positive
    definite.
    """
    lam = _as_precision(precision, data.d)
    A = data.X.T @ data.X + data.sigma2 * lam
    A = (A + A.T) / 2.0
    try:
        chol = scipy.linalg.cho_factor(A, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"posterior precision not positive definite: {exc}") from exc
    mu = scipy.linalg.cho_solve(chol, data.X.T @ data.y)
    ident = np.eye(data.d)
    sigma = data.sigma2 * scipy.linalg.cho_solve(chol, ident)
    sigma = (sigma + sigma.T) / 2.0
    return GaussianPosterior(mu_n=mu, sigma_n=sigma, radius=radius)


def sample_truncated(
    post: GaussianPosterior,
    seed: int,
    size: int = 1,
    budget: int = DEFAULT_REJECTION_BUDGET,
) -> np.ndarray:
    """Rejection draws from the posterior restricted to its ball.

    Each requested vector gets at most `budget` Gaussian proposals;
    exhausting them raises RejectionBudgetExhaustedError, which signals
    that the radius leaves the Gaussian almost no mass and needs
    reconfiguring rather than silent clamping.
    """
    if size < 1:
        raise ValueError("size must be at least 1")
    rng = substream(seed, _DRAW_TAG)
    try:
        chol = np.linalg.cholesky(post.sigma_n)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"posterior covariance not positive definite: {exc}") from exc
    out = np.empty((size, post.d), dtype=np.float64)
    pending = np.arange(size)
    for _ in range(budget):
        if pending.size == 0:
            return out
        z = rng.standard_normal((pending.size, post.d))
        proposal = post.mu_n + z @ chol.T
        ok = np.linalg.norm(proposal, axis=1) <= post.radius
        out[pending[ok]] = proposal[ok]
        pending = pending[~ok]
    if pending.size:
        raise RejectionBudgetExhaustedError(
            f"{pending.size} of {size} draws found no point with norm <= {post.radius} "
            f"in {budget} attempts"
        )
    return out


def regression_sensitivity(w: np.ndarray, n: int, d: int, sigma2: float) -> float:
    """Log-likelihood Lipschitz bound L(w) = n/(2 s2) (1 + 2||w||_1 + d ||w||_2).

    One posterior draw answered from this model is 2 L(w)-private under
    the summed per-record euclidean distance between datasets.
    """
    w = np.asarray(w, dtype=np.float64)
    l1 = float(np.abs(w).sum())
    l2 = float(np.linalg.norm(w))
    return n / (2.0 * sigma2) * (1.0 + 2.0 * l1 + d * l2)


def regression_sensitivity_alt(w: np.ndarray, n: int, d: int, sigma2: float) -> float:
    """Alternative intermediate bound n/(2 s2) (1 + (d+2)||w||_1).

    Neither dominates the primary bound everywhere; both are exposed
    and the caller picks.
    """
    w = np.asarray(w, dtype=np.float64)
    l1 = float(np.abs(w).sum())
    return n / (2.0 * sigma2) * (1.0 + (d + 2.0) * l1)


def worst_case_sensitivity(radius: float, n: int, d: int, sigma2: float) -> float:
    """L maximized over the truncated support: ||w||_2 = radius, ||w||_1 <= sqrt(d) radius.

    This is the value a privacy report should carry, since it does not
    depend on the realized draw.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    return n / (2.0 * sigma2) * (1.0 + 2.0 * math.sqrt(d) * radius + d * radius)


def default_radius(b: float) -> float:
    """Truncation radius 10/sqrt(b) paired with prior precision b."""
    if not b > 0:
        raise ValueError("prior precision must be positive")
    return 10.0 / math.sqrt(b)


def posterior_mean_predictions(post: GaussianPosterior, X: np.ndarray) -> np.ndarray:
    return np.asarray(X, dtype=np.float64) @ post.mu_n


def predictive_mse(
    post: GaussianPosterior,
    X_test: np.ndarray,
    y_test: np.ndarray,
    samples: int,
    seed: int,
    budget: int = DEFAULT_REJECTION_BUDGET,
) -> float:
    """MSE of the predictor built from averaged truncated-posterior draws."""
    if samples < 1:
        raise ValueError("need at least one draw")
    X_test = np.asarray(X_test, dtype=np.float64)
    y_test = np.asarray(y_test, dtype=np.float64)
    draws = sample_truncated(post, seed, samples, budget)
    w_hat = draws.mean(axis=0)
    resid = X_test @ w_hat - y_test
    return float(np.mean(resid**2))
