"""Desk-scale numerical laboratory for self-interacting Brownian path
measures: tilted-measure MCMC, exact block-Gaussian reference sampling,
localization diagnostics, a radial bound-state solver, and a verification
suite for the Gaussian comparison inequalities behind them.
"""

from .errors import (InequalityViolation, NumericError, PolaronError,
                     TuningError, ValidationError)
from .kernels import (AssumptionReport, ExternalPotential, KernelGrid,
                      PairKernel, build_grid, eval_V, eval_W,
                      validate_assumptions)
from .pathspace import (ActionValue, DiscretePath, PairTable, action,
                        action_delta, action_delta_parts, action_exact_smooth,
                        build_pair_table, dump_path,
                        sample_bridge, sample_wiener)
from .gaussref import (BlockGaussianSpec, PrecisionFactor, block_variance,
                       build_precision, sample_exact)
from .sampler import (ChainConfig, ChainOutput, ModelSpec, mcmc_run,
                      partition_estimate, reweight_check)
from .estimators import (EstimateWithError, FreeEnergyCurve, GammaCurve,
                         Histogram, ball_volume, batch_means,
                         endpoint_histogram, free_energy_rate, gamma_ratio,
                         midpoint_mass, occupation_fraction)
from .spectral import (RadialGrid, SemigroupStepper, SpectralResult,
                       classify_trend, gamma_curve, ground_state,
                       semigroup_apply, trend_slope, well_threshold)
from .inequalities import (Box, CheckResult, Ellipsoid, GaussianInstance,
                           InstanceRow, SuiteReport, gauss_prob_exact,
                           gci_check, reweight_gci_check, run_all_suites,
                           run_gci_suite, run_inflation_suite,
                           run_reweight_suite, run_tail_suite,
                           sup_ball_prob, sup_limit_check, tail_bound_check,
                           variance_inflation_check)

__version__ = "0.1.0"

__all__ = [
    "ActionValue", "AssumptionReport", "BlockGaussianSpec", "Box",
    "ChainConfig", "ChainOutput", "CheckResult", "DiscretePath", "Ellipsoid",
    "EstimateWithError", "ExternalPotential", "FreeEnergyCurve",
    "GammaCurve", "GaussianInstance", "Histogram", "InequalityViolation",
    "InstanceRow", "KernelGrid", "ModelSpec", "NumericError", "PairKernel",
    "PairTable", "PolaronError", "PrecisionFactor", "RadialGrid",
    "SemigroupStepper", "SpectralResult", "SuiteReport", "TuningError",
    "ValidationError", "__version__", "action", "action_delta",
    "action_delta_parts", "action_exact_smooth", "ball_volume", "batch_means",
    "block_variance", "build_grid", "build_pair_table", "build_precision",
    "classify_trend", "dump_path", "endpoint_histogram", "eval_V", "eval_W",
    "free_energy_rate", "gamma_curve", "gamma_ratio", "gauss_prob_exact",
    "gci_check", "ground_state", "mcmc_run", "midpoint_mass",
    "occupation_fraction", "partition_estimate", "reweight_check",
    "reweight_gci_check", "run_all_suites", "run_gci_suite",
    "run_inflation_suite", "run_reweight_suite", "run_tail_suite",
    "sample_bridge", "sample_exact", "sample_wiener", "semigroup_apply",
    "sup_ball_prob", "sup_limit_check", "tail_bound_check", "trend_slope",
    "validate_assumptions", "variance_inflation_check", "well_threshold"
]
