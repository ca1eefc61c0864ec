"""Greedy support recovery on corrupted designs, plus baselines.

The selection loop correlates observed columns with the current residual and
never consults any corruption statistics; whatever is known about the noise
enters only in the final coefficient estimate on the selected support.  That
split is what makes support recovery oblivious to the corruption model, and
it is preserved structurally here: :func:`select_support` takes nothing but
``(z, y, k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from corrupt_sense.datagen import IVSpec
from corrupt_sense.estimators import (
    EstimatorKind,
    MomentEstimate,
    build_clean_ls,
    build_iv,
    build_known_sigma_w,
    build_known_sigma_x,
    build_missing,
    solve_corrected,
)

__all__ = [
    "FinalCleanLS",
    "FinalEstimatorChoice",
    "FinalIV",
    "FinalKnownSigmaW",
    "FinalKnownSigmaX",
    "FinalMissing",
    "FitResult",
    "IterationRecord",
    "SingularGram",
    "mod_omp",
    "restricted_estimate",
    "naive_omp",
    "select_support",
    "standard_omp",
]


class SingularGram(RuntimeError):
    """The Gram matrix of the selected columns became numerically singular."""

    def __init__(self, iteration: int):
        super().__init__(f"selected-column Gram matrix singular at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class FinalKnownSigmaW:
    """Final estimate corrects the Gram with the known noise covariance.

    ``sigma_w`` is the scalar scale of the diagonal model; a full matrix (to
    be restricted to the selected support) may be given instead.
    """

    sigma_w: float = 0.0
    sigma_w_mat: NDArray | None = None


@dataclass(frozen=True)
class FinalKnownSigmaX:
    """Final estimate uses the known design covariance, restricted to the support."""

    sigma_x: NDArray


@dataclass(frozen=True)
class FinalIV:
    """Final estimate projects through instruments; needs at least k of them."""

    iv: IVSpec


@dataclass(frozen=True)
class FinalMissing:
    """Final estimate unbiases the Gram for entries erased with probability rho."""

    rho: float


@dataclass(frozen=True)
class FinalCleanLS:
    """Plain least squares on the selected columns (no correction)."""


FinalEstimatorChoice = (
    FinalKnownSigmaW | FinalKnownSigmaX | FinalIV | FinalMissing | FinalCleanLS
)


@dataclass(frozen=True)
class IterationRecord:
    """One greedy step: what was picked, how decisively, and the residual after."""

    iteration: int
    selected_index: int
    score_selected: float
    max_rival_score: float
    residual_norm: float


@dataclass(frozen=True, eq=False)
class FitResult:
    """Output of a greedy fit.

    ``beta_hat`` is zero off the selected support; ``support`` lists the
    selected column indices in selection order; ``trace`` records one entry
    per iteration.
    """

    beta_hat: NDArray
    support: tuple[int, ...]
    trace: tuple[IterationRecord, ...]
    estimator_kind: EstimatorKind
    diagnostics: dict = field(default_factory=dict)


def select_support(z: NDArray, y: NDArray, k: int) -> tuple[list[int], list[IterationRecord]]:
    """Run k greedy iterations of residual-correlation selection on ``(z, y)``.

    Scores are plain inner products of observed columns with the current
    residual; ties in the argmax go to the lowest index.  The residual starts
    at ``y`` and after each selection becomes the projection residual of ``y``
    on the selected columns.  This function takes no corruption knowledge at
    all, by design.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, p = z.shape
    if not 1 <= k <= min(n, p):
        raise ValueError(f"k must be in [1, min(n, p)] = [1, {min(n, p)}], got {k}")
    if y.shape[0] != n:
        raise ValueError(f"y has length {y.shape[0]}, expected {n}")

    support: list[int] = []
    trace: list[IterationRecord] = []
    r = y
    for j in range(1, k + 1):
        scores = np.abs(z.T @ r)
        scores[support] = -1.0  # already-selected columns never rescored
        i_star = int(np.argmax(scores))
        score = float(scores[i_star])
        scores[i_star] = -1.0
        rival = float(scores.max()) if p > len(support) + 1 else float("nan")
        support.append(i_star)

        z_sel = z[:, support]
        gram = z_sel.T @ z_sel
        try:
            c, low = scipy.linalg.cho_factor(gram, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            raise SingularGram(j) from None
        coef = scipy.linalg.cho_solve((c, low), z_sel.T @ y, check_finite=False)
        r = y - z_sel @ coef
        trace.append(
            IterationRecord(
                iteration=j,
                selected_index=i_star,
                score_selected=score,
                max_rival_score=rival,
                residual_norm=float(np.linalg.norm(r)),
            )
        )
    return support, trace


def restricted_estimate(
    z_sel: NDArray, y: NDArray, support: list[int], final: FinalEstimatorChoice
) -> MomentEstimate:
    """Corrected moment pair for the columns in ``support`` under a final-step choice.

    Full-dimension knowledge (a noise or design covariance) is restricted to
    the support block; instruments are used whole.
    """
    if isinstance(final, FinalCleanLS):
        return build_clean_ls(z_sel, y)
    if isinstance(final, FinalKnownSigmaW):
        if final.sigma_w_mat is not None:
            sw = np.asarray(final.sigma_w_mat, dtype=float)[np.ix_(support, support)]
        else:
            sw = final.sigma_w**2 * np.eye(len(support))
        return build_known_sigma_w(z_sel, y, sw)
    if isinstance(final, FinalKnownSigmaX):
        sx = np.asarray(final.sigma_x, dtype=float)[np.ix_(support, support)]
        return build_known_sigma_x(z_sel, y, sx)
    if isinstance(final, FinalIV):
        return build_iv(z_sel, y, final.iv)
    if isinstance(final, FinalMissing):
        return build_missing(z_sel, y, final.rho)
    raise ValueError(f"unknown final estimator choice {final!r}")


def mod_omp(
    z: NDArray,
    y: NDArray,
    k: int,
    final: FinalEstimatorChoice,
    lambda_floor: float | None = None,
    repair: bool = False,
) -> FitResult:
    """Greedy support selection on the observed design, then a corrected fit on it.

    Selection uses ``z`` directly (see :func:`select_support`).  The final
    coefficients on the selected support come from the moment-corrected
    estimator named by ``final``, with everything off the support set to zero.

    Raises
    ------
    SingularGram
        If the selected-column Gram matrix becomes singular mid-loop.
    StrongConvexityViolation
        Propagated from the final restricted solve.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    support, trace = select_support(z, y, k)
    z_sel = z[:, support]
    est = restricted_estimate(z_sel, y, support, final)
    coef = solve_corrected(est, lambda_floor=lambda_floor, repair=repair)
    beta = np.zeros(z.shape[1])
    beta[support] = coef
    vals = np.linalg.eigvalsh(est.sigma_hat)
    cond = float(vals[-1] / vals[0]) if vals[0] > 0 else float("inf")
    return FitResult(
        beta_hat=beta,
        support=tuple(support),
        trace=tuple(trace),
        estimator_kind=est.kind,
        diagnostics={"lambda_min_final": est.lambda_min, "condition_number": cond},
    )


def standard_omp(x: NDArray, y: NDArray, k: int) -> FitResult:
    """Classical greedy fit on a clean design: selection plus plain least squares."""
    return mod_omp(x, y, k, FinalCleanLS())


def naive_omp(z: NDArray, y: NDArray, k: int) -> FitResult:
    """The uncorrected baseline: run the clean algorithm on corrupted data as-is.

    Identical to :func:`standard_omp` applied to ``z``; kept as a named entry
    point so comparisons against the corrected pipeline are explicit.
    """
    return mod_omp(z, y, k, FinalCleanLS())
