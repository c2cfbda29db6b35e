"""Differentially private Bayesian inference on binary Bayesian networks.

Four mechanisms over the same conjugate Beta-Bernoulli model: Laplace
noise on posterior update counts, consistent noisy marginals through
the Walsh basis, trimmed posterior sampling, and exponential-mechanism
MAP estimation; plus Bayesian linear regression with a truncated
Gaussian posterior, verification oracles, and an experiment harness.
"""

from .errors import (
    BudgetExceededError,
    ConditionViolatedError,
    ConfigError,
    CyclicGraphError,
    DimensionMismatchError,
    DpBayesError,
    EmptyLevelSetError,
    InvalidEpsilonError,
    InvalidTError,
    LengthMismatchError,
    MissingCoefficientError,
    MissingPosteriorEntryError,
    MissingPriorEntryError,
    NonPositivePosteriorParamError,
    OmegaTooLargeError,
    PriorTooSmallError,
    RejectionBudgetExhaustedError,
    SingularSystemError,
)
from .expmech import (
    GridSpec,
    MapSensitivity,
    exp_mechanism_indices,
    exp_mechanism_sample,
    map_sensitivity,
    map_utility_certificate,
    sampling_probabilities,
)
from .fourier import (
    CoefficientSet,
    DownwardClosure,
    downward_closure,
    exact_coefficients,
    fourier_coefficient,
    fourier_posterior_params,
    marginal_error_bound,
    noise_scale,
    reconstruct_marginal,
    release_coefficients,
    shared_submarginal,
    stealth_increment,
)
from .graph import (
    BayesNetGraph,
    BetaParams,
    ContingencyTable,
    Dataset,
    ParentConfig,
    UpdateVector,
    ancestral_sample,
    build_table,
    compute_updates,
    joint_log_likelihood,
    posterior_params,
    project_marginal,
    uniform_priors,
    validate_graph,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    MetricsRow,
    naive_bayes_graph,
    nb_predictive_batch,
    nb_predictive_closed_form,
    rows_to_csv,
    run_experiment,
    run_linreg_experiment,
    run_nb_experiment,
    separated_nb_theta,
    split_dataset,
    synth_linreg,
    synth_nb,
    with_overrides,
    write_metrics,
)
from .io import load_dataset, load_grid, load_network, load_regression_csv
from .laplace import (
    LaplaceNoiseSpec,
    PerturbedUpdates,
    perturb_updates,
    posterior_kl_bound,
    update_deviation_bound,
    update_sensitivity,
)
from .metrics import KlReport, PrivacyCheckReport, accuracy, kl_beta, kl_joint
from .randomness import derive_seed, laplace_from_uniform, substream
from .regression import (
    GaussianPosterior,
    RegressionData,
    default_radius,
    fit_posterior,
    posterior_mean_predictions,
    predictive_mse,
    regression_sensitivity,
    regression_sensitivity_alt,
    sample_truncated,
    scale_regression_data,
    worst_case_sensitivity,
)
from .sampler import (
    LipschitzSpec,
    SamplerPrivacyReport,
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

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
