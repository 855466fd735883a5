"""Gumbel limit laws at desk scale: conditioned diffusion exit times,
Gaussian extremes, and residual life times, verified by a mix of Monte
Carlo simulation and high-precision deterministic tail computation."""

from .distributions import (
    GridCurve,
    TailModel,
    exponential_tail_model,
    gaussian_cdf,
    gaussian_log_tail,
    gaussian_pdf,
    gaussian_tail,
    gaussian_tail_asymptotic,
    gaussian_tail_model,
    gumbel_cdf,
    gumbel_density,
    gumbel_identity_residual,
    log_residual_density,
    shifted_log_residual_density,
)
from .errors import (
    BudgetExceeded,
    ExitGumbelError,
    GridMismatch,
    GuardExceeded,
    NoBracket,
    ZeroTail,
)
from .evt import (
    NormalizingSequence,
    gnedenko_lhs,
    max_cdf,
    sample_normalized_max,
    solve_normalizers,
    standard_gaussian_sampler,
)
from .exitsim import (
    ConditionedSample,
    ExitProblem,
    ExitRecord,
    LinearDriftModel,
    NoiseRealization,
    duhamel_exit_time,
    limit_law_cdf,
    limit_law_sample,
    limit_normalized_time,
    replay_exit_from_noise,
    right_exit_probability,
    sample_conditioned_exits,
    sample_noise,
    simulate_exit_euler,
    simulate_exit_exact,
    simulate_path,
    truncated_gaussian,
)
from .residual import (
    log_residual_cdf,
    residual_tail,
    scaled_residual,
    shifted_log_residual_cdf,
    staircase_scaling,
)
from .stats import (
    EmpiricalSample,
    RngStream,
    ecdf,
    grid_sup_distance,
    integrate_adaptive_simpson,
    ks_one_sample,
    ks_one_sample_critical,
    ks_two_sample,
    ks_two_sample_critical,
    read_sample_csv,
    write_sample_csv,
)

__version__ = "0.1.0"
