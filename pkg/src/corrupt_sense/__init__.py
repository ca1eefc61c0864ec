"""Corrected linear regression with noisy and missing covariates.

Tools for regression when the design matrix is observed through a
corruption channel (additive noise or random erasures): moment-corrected
least-squares estimators, a greedy support-recovery algorithm that works
directly on the corrupted design, problem generators, concentration
probes, and a Monte-Carlo sweep harness with CSV output.
"""

from corrupt_sense.datagen import (
    AdditiveNoise,
    Clean,
    CorruptionSpec,
    DesignSpec,
    IVSpec,
    Missing,
    ProblemInstance,
    corrupt,
    gen_design,
    gen_instance,
    gen_iv,
)
from corrupt_sense.estimators import (
    EstimatorKind,
    MomentEstimate,
    StrongConvexityViolation,
    build_clean_ls,
    build_iv,
    build_known_sigma_w,
    build_known_sigma_x,
    build_missing,
    build_upper_bound_sigma_w,
    correction_mask,
    error_bound,
    solve_corrected,
)
from corrupt_sense.metrics import (
    CollapseFit,
    SupportReport,
    collapse_fit,
    control_param,
    l2_error,
    support_report,
)
from corrupt_sense.omp import (
    FinalCleanLS,
    FinalEstimatorChoice,
    FinalIV,
    FinalKnownSigmaW,
    FinalKnownSigmaX,
    FinalMissing,
    FitResult,
    SingularGram,
    mod_omp,
    naive_omp,
    select_support,
    standard_omp,
)

__all__ = [
    "AdditiveNoise",
    "Clean",
    "CollapseFit",
    "CorruptionSpec",
    "DesignSpec",
    "EstimatorKind",
    "FinalCleanLS",
    "FinalEstimatorChoice",
    "FinalIV",
    "FinalKnownSigmaW",
    "FinalKnownSigmaX",
    "FinalMissing",
    "FitResult",
    "IVSpec",
    "Missing",
    "MomentEstimate",
    "ProblemInstance",
    "SingularGram",
    "StrongConvexityViolation",
    "SupportReport",
    "build_clean_ls",
    "build_iv",
    "build_known_sigma_w",
    "build_known_sigma_x",
    "build_missing",
    "build_upper_bound_sigma_w",
    "collapse_fit",
    "control_param",
    "correction_mask",
    "corrupt",
    "error_bound",
    "gen_design",
    "gen_instance",
    "gen_iv",
    "l2_error",
    "mod_omp",
    "naive_omp",
    "select_support",
    "solve_corrected",
    "standard_omp",
    "support_report",
]

__version__ = "0.1.0"
