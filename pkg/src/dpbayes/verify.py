"""Independent oracles for checking the mechanisms against first principles.

Everything here recomputes a quantity the library produces some clever
way by the dumbest defensible route instead: dense transforms instead
of streamed coefficients, brute-force enumeration instead of a proved
sensitivity bound, quadrature instead of closed forms, direct
normalization instead of log-sum-exp. Oracles deliberately do not call
the code paths they check.

Budgets are tight (|I| <= 4, n <= 4, k <= 12) because every oracle is
exponential in something; BudgetExceededError refuses anything larger.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np
import scipy.special

from .errors import BudgetExceededError
from .expmech import GridSpec, MapSensitivity, _utility_values
from .graph import BayesNetGraph, BetaParams, Dataset, PosteriorMap, validate_graph
from .metrics import PrivacyCheckReport

# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-9,
    max_depth: int = 60,
    min_depth: int = 10,
) -> float:
    """Adaptive Simpson integration by interval halving.

    Classic estimate-and-recurse with the 1/15 Richardson correction;
    depth exhaustion falls back to the refined estimate for that panel.
    The first min_depth levels always split: a narrow spike between
    coarse sample points would otherwise fake early agreement.
    """
    if not a < b:
        raise ValueError("need a < b")
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, m, b, fa, fm, fb, whole, tol, depth, forced):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth <= 0 or (forced <= 0 and abs(left + right - whole) <= 15.0 * tol):
            return left + right + (left + right - whole) / 15.0
        return rec(a, lm, m, fa, flm, fm, left, tol / 2.0, depth - 1, forced - 1) + rec(
            m, rm, b, fm, frm, fb, right, tol / 2.0, depth - 1, forced - 1
        )

    return rec(a, m, b, fa, fm, fb, whole, tol, max_depth, min_depth)


def beta_logpdf(x: float, params: BetaParams) -> float:
    a, b = params.alpha, params.beta
    return (
        (a - 1.0) * math.log(x)
        + (b - 1.0) * math.log1p(-x)
        - scipy.special.betaln(a, b)
    )


def kl_beta_quadrature(p: BetaParams, q: BetaParams, tol: float = 1e-9) -> float:
    """KL(p || q) for Betas by adaptive Simpson on [1e-12, 1-1e-12].

    Endpoint singularities for shape parameters below 1 are excluded by
    the parameter ranges the tests use.
    """

    def integrand(x: float) -> float:
        lp = beta_logpdf(x, p)
        return math.exp(lp) * (lp - beta_logpdf(x, q))

    return adaptive_simpson(integrand, 1e-12, 1.0 - 1e-12, tol)


# ---------------------------------------------------------------------------
# dense-table oracles for the Fourier path
# ---------------------------------------------------------------------------

_DENSE_K_BUDGET = 12


def dense_table(data: Dataset, k: int | None = None) -> np.ndarray:
    """Full contingency table as a length-2^k vector, little-endian cells."""
    k = data.dimension if k is None else k
    if k > _DENSE_K_BUDGET:
        raise BudgetExceededError(f"dense table limited to k <= {_DENSE_K_BUDGET}")
    out = np.zeros(1 << k, dtype=np.float64)
    if data.n:
        idx = data.records @ (1 << np.arange(k, dtype=np.int64))
        np.add.at(out, idx, 1.0)
    return out


def walsh_coefficients_dense(table: np.ndarray) -> np.ndarray:
    """All 2^k character-basis coefficients from the dense table.

    Iterative butterfly transform; entry gamma holds
    2^{-k/2} sum_eta (-1)^{popcount(gamma & eta)} table[eta].
    """
    v = np.asarray(table, dtype=np.float64).copy()
    size = v.size
    if size & (size - 1):
        raise ValueError("table length must be a power of two")
    k = size.bit_length() - 1
    if k > _DENSE_K_BUDGET:
        raise BudgetExceededError(f"dense transform limited to k <= {_DENSE_K_BUDGET}")
    h = 1
    while h < size:
        for start in range(0, size, h * 2):
            lo = v[start : start + h].copy()
            hi = v[start + h : start + 2 * h].copy()
            v[start : start + h] = lo + hi
            v[start + h : start + 2 * h] = lo - hi
        h *= 2
    return v * 2.0 ** (-k / 2.0)


def dense_marginal(table: np.ndarray, k: int, nodes: Sequence[int]) -> np.ndarray:
    """Direct marginalization onto `nodes`, little-endian in ascending node order."""
    nodes = sorted(nodes)
    arr = np.asarray(table, dtype=np.float64).reshape([2] * k, order="F")
    drop = tuple(ax for ax in range(k) if ax not in nodes)
    marg = arr.sum(axis=drop) if drop else arr
    return marg.reshape(-1, order="F")


def marginal_cells_from_dense(marg: np.ndarray, node_count: int) -> dict[tuple[int, ...], float]:
    cells = {}
    for idx in range(marg.size):
        key = tuple((idx >> p) & 1 for p in range(node_count))
        cells[key] = float(marg[idx])
    return cells


# ---------------------------------------------------------------------------
# update-count oracles
# ---------------------------------------------------------------------------


def brute_force_updates(graph: BayesNetGraph, data: Dataset) -> dict[tuple[int, int, str], float]:
    """Per-entry success/failure tallies by plain per-record iteration."""
    out: dict[tuple[int, int, str], float] = {}
    for i in range(graph.node_count):
        for j in range(graph.config_count(i)):
            out[(i, j, "a")] = 0.0
            out[(i, j, "b")] = 0.0
    for row in range(data.n):
        rec = data.records[row]
        for i in range(graph.node_count):
            j = 0
            for pos, parent in enumerate(graph.parents[i]):
                j |= int(rec[parent]) << pos
            out[(i, j, "a" if rec[i] else "b")] += 1.0
    return out


def all_dags(k: int) -> list[BayesNetGraph]:
    """Every DAG on k labeled nodes, as parent-list graphs."""
    if k > 4:
        raise BudgetExceededError("DAG enumeration limited to k <= 4")
    graphs = []
    others = [tuple(o for o in range(k) if o != i) for i in range(k)]
    subset_choices = [
        [tuple(sorted(s)) for r in range(k) for s in itertools.combinations(others[i], r)]
        for i in range(k)
    ]
    for combo in itertools.product(*subset_choices):
        g = BayesNetGraph(node_count=k, parents=tuple(combo))
        try:
            validate_graph(g)
        except Exception:
            continue
        graphs.append(g)
    return graphs


def _update_vec(graph: BayesNetGraph, data: Dataset, key_order: list[tuple[int, int]]) -> np.ndarray:
    tallies = brute_force_updates(graph, data)
    return np.array(
        [tallies[(i, j, half)] for (i, j) in key_order for half in ("a", "b")],
        dtype=np.float64,
    )


def exhaustive_sensitivity(graph: BayesNetGraph, n_max: int) -> float:
    """Max L1 update distance over every dataset/neighbor pair, by enumeration.

    Exponential in everything; refuses |I| > 4 or n_max > 4.
    """
    k = graph.node_count
    if k > 4 or n_max > 4:
        raise BudgetExceededError("exhaustive sensitivity limited to |I| <= 4, n <= 4")
    key_order = list(graph.entry_keys())
    n_records = 1 << k
    all_records = [
        np.array([[(r >> p) & 1 for p in range(k)]], dtype=np.int64) for r in range(n_records)
    ]
    worst = 0.0
    for n in range(1, n_max + 1):
        vec_cache: dict[tuple[int, ...], np.ndarray] = {}

        def vec_of(idx_tuple: tuple[int, ...]) -> np.ndarray:
            if idx_tuple not in vec_cache:
                rows = np.vstack([all_records[r] for r in idx_tuple])
                vec_cache[idx_tuple] = _update_vec(graph, Dataset.from_records(rows), key_order)
            return vec_cache[idx_tuple]

        for combo in itertools.product(range(n_records), repeat=n):
            base = vec_of(combo)
            for pos in range(n):
                for replacement in range(n_records):
                    if replacement == combo[pos]:
                        continue
                    neighbor = combo[:pos] + (replacement,) + combo[pos + 1 :]
                    dist = float(np.abs(base - vec_of(neighbor)).sum())
                    if dist > worst:
                        worst = dist
    return worst


# ---------------------------------------------------------------------------
# privacy density-ratio check
# ---------------------------------------------------------------------------


def laplace_density_ratio_check(
    sensitivity: float,
    epsilon: float,
    grid: np.ndarray,
    shifts: np.ndarray,
    mechanism: str = "laplace",
) -> PrivacyCheckReport:
    """Analytic log-density-ratio bound for a Laplace noise vector.

    For scale b = sensitivity/epsilon the pre-clamp release's log-ratio
    between neighboring inputs shifted by s is sum_k (|z_k| - |z_k -
    s_k|)/b; its sup over the evaluation grid must stay below epsilon
    whenever ||s||_1 <= sensitivity. Deterministic: no sampling here.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    shifts = np.atleast_2d(np.asarray(shifts, dtype=np.float64))
    if grid.shape[1] != shifts.shape[1]:
        raise ValueError("grid and shift vectors must share the coordinate count")
    l1 = np.abs(shifts).sum(axis=1)
    if float(l1.max()) > sensitivity + 1e-9:
        raise ValueError("a shift vector exceeds the stated sensitivity")
    b = sensitivity / epsilon
    worst = 0.0
    for s in shifts:
        ratios = np.abs((np.abs(grid) - np.abs(grid - s)).sum(axis=1)) / b
        worst = max(worst, float(ratios.max()))
    return PrivacyCheckReport.from_observation(mechanism, epsilon, worst)


# ---------------------------------------------------------------------------
# truncated-distribution oracles
# ---------------------------------------------------------------------------


def truncated_beta_cdf(params: BetaParams, omega: float, x: np.ndarray | float) -> np.ndarray:
    """CDF of Beta(a, b) conditioned on [omega, 1 - omega]."""
    a, b = params.alpha, params.beta
    lo = scipy.special.betainc(a, b, omega)
    hi = scipy.special.betainc(a, b, 1.0 - omega)
    x = np.clip(np.asarray(x, dtype=np.float64), omega, 1.0 - omega)
    return (scipy.special.betainc(a, b, x) - lo) / (hi - lo)


def truncated_beta_ppf(params: BetaParams, omega: float, u: np.ndarray | float) -> np.ndarray:
    """Inverse CDF of the conditioned Beta, via the regularized-incomplete-beta inverse."""
    a, b = params.alpha, params.beta
    lo = scipy.special.betainc(a, b, omega)
    hi = scipy.special.betainc(a, b, 1.0 - omega)
    u = np.asarray(u, dtype=np.float64)
    return scipy.special.betaincinv(a, b, lo + u * (hi - lo))


def truncated_beta_moment(
    params: BetaParams, omega: float, x_power: int, one_minus_power: int
) -> float:
    """E[theta^p (1-theta)^q] under Beta(a, b) conditioned on [omega, 1-omega]."""

    def num(x: float) -> float:
        return math.exp(beta_logpdf(x, params)) * x**x_power * (1.0 - x) ** one_minus_power

    def den(x: float) -> float:
        return math.exp(beta_logpdf(x, params))

    lo, hi = omega, 1.0 - omega
    return adaptive_simpson(num, lo, hi, 1e-12) / adaptive_simpson(den, lo, hi, 1e-12)


def truncated_normal_moments(mu: float, sigma2: float, lo: float, hi: float) -> tuple[float, float]:
    """(mean, variance) of N(mu, sigma2) restricted to [lo, hi], by quadrature."""
    sd = math.sqrt(sigma2)

    def pdf(x: float) -> float:
        z = (x - mu) / sd
        return math.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))

    mass = adaptive_simpson(pdf, lo, hi, 1e-12)
    mean = adaptive_simpson(lambda x: x * pdf(x), lo, hi, 1e-12) / mass
    second = adaptive_simpson(lambda x: x * x * pdf(x), lo, hi, 1e-12) / mass
    return mean, second - mean * mean


# ---------------------------------------------------------------------------
# predictive-posterior oracles
# ---------------------------------------------------------------------------


def _beta_obs_moment(params: BetaParams, value: int) -> float:
    """E[theta^v (1-theta)^(1-v)] by quadrature (not the closed form)."""

    def integrand(x: float) -> float:
        lik = x if value else 1.0 - x
        return math.exp(beta_logpdf(x, params)) * lik

    return adaptive_simpson(integrand, 1e-12, 1.0 - 1e-12, 1e-12)


def nb_predictive_quadrature(
    posterior: PosteriorMap, x: Sequence[int], class_node: int = 0
) -> float:
    """Pr(Y=1 | x) by direct numerical integration of each Beta factor."""
    features = sorted({i for (i, _) in posterior} - {class_node})
    joint = []
    for y in (0, 1):
        term = _beta_obs_moment(posterior[(class_node, 0)], y)
        for pos, i in enumerate(features):
            term *= _beta_obs_moment(posterior[(i, y)], int(x[pos]))
        joint.append(term)
    return joint[1] / (joint[0] + joint[1])


def trimmed_nb_predictive_quadrature(
    posterior: PosteriorMap, x: Sequence[int], omega: float, class_node: int = 0
) -> float:
    """Trimmed-posterior predictive by per-entry truncated-Beta moments."""
    features = sorted({i for (i, _) in posterior} - {class_node})
    joint = []
    for y in (0, 1):
        term = truncated_beta_moment(posterior[(class_node, 0)], omega, y, 1 - y)
        for pos, i in enumerate(features):
            v = int(x[pos])
            term *= truncated_beta_moment(posterior[(i, y)], omega, v, 1 - v)
        joint.append(term)
    return joint[1] / (joint[0] + joint[1])


# ---------------------------------------------------------------------------
# network log-ratio oracle
# ---------------------------------------------------------------------------


def max_log_ratio_per_hamming(graph: BayesNetGraph, theta) -> float:
    """Max over assignment pairs of |log p(x) - log p(y)| / hamming(x, y)."""
    from .graph import joint_log_likelihood

    k = graph.node_count
    if k > 4:
        raise BudgetExceededError("exhaustive pair check limited to |I| <= 4")
    assignments = list(itertools.product((0, 1), repeat=k))
    logps = [joint_log_likelihood(graph, theta, np.array(a, dtype=np.int64)) for a in assignments]
    worst = 0.0
    for ia, a in enumerate(assignments):
        for ib in range(ia + 1, len(assignments)):
            dist = sum(u != v for u, v in zip(a, assignments[ib]))
            worst = max(worst, abs(logps[ia] - logps[ib]) / dist)
    return worst


def truncated_beta_log_norm(params: BetaParams, omega: float) -> float:
    """log integral of the unnormalized Beta density over [omega, 1-omega]."""
    a, b = params.alpha, params.beta
    mass = scipy.special.betainc(a, b, 1.0 - omega) - scipy.special.betainc(a, b, omega)
    return math.log(mass) + scipy.special.betaln(a, b)


# ---------------------------------------------------------------------------
# exponential-mechanism and regression oracles
# ---------------------------------------------------------------------------


def exp_mechanism_bruteforce_probs(
    grid: GridSpec, utility, epsilon: float, delta: MapSensitivity
) -> np.ndarray:
    """Directly normalized exp-weights, usable while exp() cannot overflow."""
    u = _utility_values(grid, utility)
    w = grid.masses * np.exp(epsilon * u / (2.0 * delta.delta_value))
    return w / w.sum()


def regression_log_posterior_unnormalized(
    X: np.ndarray, y: np.ndarray, sigma2: float, lam: np.ndarray, w: np.ndarray
) -> float:
    """log prior + log likelihood at w, constants dropped."""
    resid = y - X @ w
    return float(-0.5 * (resid @ resid) / sigma2 - 0.5 * (w @ lam @ w))


def regression_grid_check(
    X: np.ndarray,
    y: np.ndarray,
    sigma2: float,
    lam: np.ndarray,
    mu_n: np.ndarray,
    sigma_n: np.ndarray,
    grid: np.ndarray,
) -> float:
    """Max pointwise gap between two normalized densities on a weight grid.

    One density comes from prior x likelihood evaluated directly, the
    other from the fitted Gaussian posterior; both are normalized over
    the same grid, so agreement certifies the conjugate update.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    direct = np.array(
        [regression_log_posterior_unnormalized(X, y, sigma2, lam, w) for w in grid]
    )
    prec = np.linalg.inv(sigma_n)
    fitted = np.array([-0.5 * (w - mu_n) @ prec @ (w - mu_n) for w in grid])
    direct = np.exp(direct - direct.max())
    fitted = np.exp(fitted - fitted.max())
    return float(np.abs(direct / direct.sum() - fitted / fitted.sum()).max())


def ridge_mse(
    X_train: np.ndarray,
    y_train: np.ndarray,
    b: float,
    sigma2: float,
    X_test: np.ndarray,
    y_test: np.ndarray,
) -> float:
    """Closed-form ridge point-prediction MSE, solved independently."""
    d = X_train.shape[1]
    w = np.linalg.solve(X_train.T @ X_train + sigma2 * b * np.eye(d), X_train.T @ y_train)
    resid = X_test @ w - y_test
    return float(np.mean(resid**2))


# ---------------------------------------------------------------------------
# the battery behind the `verify` subcommand
# ---------------------------------------------------------------------------


def run_verification_suite(seed: int = 20240817) -> list[dict]:
    """Fixed oracle battery; each item reports name, passed, detail."""
    from . import expmech, fourier, graph, laplace, metrics, regression, sampler
    from .randomness import substream

    rng = substream(seed, "verification-suite")
    results: list[dict] = []

    def record(name: str, passed: bool, detail: str) -> None:
        results.append({"name": name, "passed": bool(passed), "detail": detail})

    # KL closed form vs quadrature; shapes >= 1 keep the density bounded,
    # which the truncated integration interval needs
    worst = 0.0
    for _ in range(20):
        p = BetaParams(*(1.0 + 30 * rng.random(2)))
        q = BetaParams(*(1.0 + 30 * rng.random(2)))
        worst = max(worst, abs(metrics.kl_beta(p, q) - kl_beta_quadrature(p, q)))
    record("kl-closed-form-vs-quadrature", worst <= 1e-6, f"max gap {worst:.3e}")

    # update-count sensitivity never exceeds twice the node count
    worst_ratio = 0.0
    for g in all_dags(2):
        sens = exhaustive_sensitivity(g, 2)
        worst_ratio = max(worst_ratio, sens / (2.0 * g.node_count))
    record("count-sensitivity-bound", worst_ratio <= 1.0, f"max sens/(2|I|) {worst_ratio:.3f}")

    # analytic density-ratio check for the Laplace release
    m = 6
    shifts = rng.laplace(size=(100, m))
    shifts *= (6.0 * rng.random((100, 1))) / np.abs(shifts).sum(axis=1, keepdims=True)
    report = laplace_density_ratio_check(6.0, 1.0, rng.normal(scale=8.0, size=(200, m)), shifts)
    record(
        "laplace-density-ratio",
        report.passed,
        f"max log-ratio {report.max_log_ratio_observed:.6f} vs epsilon 1",
    )

    # zero-noise coefficient reconstruction equals dense marginalization
    g = graph.BayesNetGraph(node_count=4, parents=((), (0,), (0,), (1, 2)))
    data = Dataset.from_records(rng.integers(0, 2, size=(200, 4)))
    closure = fourier.downward_closure(g)
    coeffs = fourier.exact_coefficients(data, closure)
    dense = dense_table(data)
    dense_coeffs = walsh_coefficients_dense(dense)
    worst = 0.0
    for gamma in closure.members:
        worst = max(worst, abs(coeffs.values[gamma] - dense_coeffs[gamma]))
    for node in range(4):
        recon = fourier.reconstruct_marginal(coeffs, node, g)
        marg = dense_marginal(dense, 4, g.family(node))
        for idx, cell_value in enumerate(marg):
            key = tuple((idx >> p) & 1 for p in range(len(g.family(node))))
            worst = max(worst, abs(recon.value(key) - float(cell_value)))
    record("fourier-zero-noise-exactness", worst <= 1e-9, f"max gap {worst:.3e}")

    # trimmed draws stay inside the interval and match oracle mean
    params = BetaParams(3.0, 2.0)
    omega = math.exp(-1.0)
    draws = sampler.trimmed_beta_draws(params, omega, substream(seed, "suite-trim"), 20000)
    in_range = bool((draws >= omega).all() and (draws <= 1.0 - omega).all())
    oracle_mean = truncated_beta_moment(params, omega, 1, 0)
    mean_gap = abs(float(draws.mean()) - oracle_mean)
    record(
        "trimmed-sampler-support-and-mean",
        in_range and mean_gap < 0.01,
        f"support ok={in_range}, mean gap {mean_gap:.4f}",
    )

    # exponential-mechanism probabilities vs direct normalization
    gridspec = expmech.GridSpec.uniform([(float(i),) for i in range(10)])
    utility = [math.sin(i * 0.7) for i in range(10)]
    delta = expmech.map_sensitivity("lipschitz", 2.0, 0.5)
    probs = expmech.sampling_probabilities(gridspec, utility, 2.0, delta)
    brute = exp_mechanism_bruteforce_probs(gridspec, utility, 2.0, delta)
    gap = float(np.abs(probs - brute).max())
    record("exp-mechanism-normalization", gap <= 1e-12, f"max gap {gap:.3e}")

    # regression conjugacy on a 1-d grid
    X = rng.normal(size=(30, 1))
    X /= np.abs(X).max()
    w_true = np.array([0.5])
    yv = X @ w_true + 0.1 * rng.normal(size=30)
    yv /= np.abs(yv).max()
    data_r = regression.RegressionData(X=X, y=yv, sigma2=0.5)
    post = regression.fit_posterior(data_r, 2.0, radius=10.0)
    grid_w = np.linspace(-1.5, 1.5, 301).reshape(-1, 1)
    gap = regression_grid_check(
        data_r.X, data_r.y, 0.5, 2.0 * np.eye(1), post.mu_n, post.sigma_n, grid_w
    )
    record("regression-conjugacy-grid", gap <= 1e-6, f"max density gap {gap:.3e}")

    # deviation bound formula spot check
    one_node = graph.BayesNetGraph(node_count=1, parents=((),))
    bound = laplace.update_deviation_bound(one_node, epsilon=2.0, delta=0.5)
    record(
        "deviation-bound-spot-value",
        abs(bound - math.log(4.0)) <= 1e-12,
        f"bound {bound:.12f} vs ln 4",
    )

    return results
