"""Moment-corrected least squares under each corruption-knowledge model.

Ordinary least squares needs the moments (X'X, X'y) of the true design.
When only a corrupted design Z is observed, each builder here assembles a
corrected pair ``(sigma_hat, gamma_hat)`` estimating those moments from Z
plus whatever side knowledge is available (the noise covariance, the design
covariance, instruments, or the erasure rate).  ``solve_corrected`` then
solves ``sigma_hat @ beta = gamma_hat``, enforcing the strong-convexity
requirement that makes that solve meaningful.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from corrupt_sense.datagen import IVSpec

__all__ = [
    "EstimatorKind",
    "MomentEstimate",
    "StrongConvexityViolation",
    "build_clean_ls",
    "build_iv",
    "build_known_sigma_w",
    "build_known_sigma_x",
    "build_missing",
    "build_upper_bound_sigma_w",
    "correction_mask",
    "error_bound",
    "solve_corrected",
]


class EstimatorKind(enum.Enum):
    """Which knowledge model produced a moment estimate."""

    KNOWN_SIGMA_W = "sigma_w"
    UPPER_BOUND_SIGMA_W = "sigma_w_upper"
    KNOWN_SIGMA_X = "sigma_x"
    INSTRUMENTAL_VARIABLE = "iv"
    MISSING_DATA = "missing"
    CLEAN_LS = "clean_ls"


class StrongConvexityViolation(RuntimeError):
    """The corrected Gram matrix is not positive definite enough to solve.

    Carries ``lambda_min`` so callers can decide whether to retry with more
    samples or rerun with eigenvalue repair enabled.
    """

    def __init__(self, lambda_min: float, floor: float):
        super().__init__(
            f"smallest eigenvalue {lambda_min:.3e} is at or below the "
            f"strong-convexity floor {floor:.3e}"
        )
        self.lambda_min = lambda_min
        self.floor = floor


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    """A corrected moment pair with solvability diagnostics.

    Attributes
    ----------
    sigma_hat : ndarray of shape (d, d)
        Corrected second-moment estimate, exactly symmetric (symmetrized on
        construction).
    gamma_hat : ndarray of shape (d,)
        Corrected cross-moment estimate.
    lambda_min : float
        Smallest eigenvalue of ``sigma_hat``, computed on construction.
    kind : EstimatorKind
        Knowledge model that produced the pair; drives bound reporting.
    dim : int
        d, the fitted dimension.
    """

    sigma_hat: NDArray
    gamma_hat: NDArray
    lambda_min: float
    kind: EstimatorKind
    dim: int


def _finalize(sigma: NDArray, gamma: NDArray, kind: EstimatorKind) -> MomentEstimate:
    sigma = 0.5 * (sigma + sigma.T)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if sigma.shape[0] != gamma.shape[0]:
        raise ValueError(
            f"dimension mismatch: sigma_hat is {sigma.shape[0]}x{sigma.shape[1]}, "
            f"gamma_hat has length {gamma.shape[0]}"
        )
    lam = float(np.linalg.eigvalsh(sigma)[0])
    return MomentEstimate(
        sigma_hat=sigma,
        gamma_hat=gamma,
        lambda_min=lam,
        kind=kind,
        dim=sigma.shape[0],
    )


def _check_zy(z: NDArray, y: NDArray) -> tuple[NDArray, NDArray]:
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if z.ndim != 2:
        raise ValueError(f"z must be 2-d, got shape {z.shape}")
    if z.shape[0] != y.shape[0]:
        raise ValueError(f"z has {z.shape[0]} rows but y has length {y.shape[0]}")
    return z, y


def build_known_sigma_w(z: NDArray, y: NDArray, sigma_w: NDArray) -> MomentEstimate:
    """Correct the observed Gram by subtracting the known noise covariance.

    ``sigma_hat = z'z - sigma_w`` and ``gamma_hat = z'y``.  No definiteness is
    required at build time; ``lambda_min`` is reported and enforced when
    solving.
    """
    z, y = _check_zy(z, y)
    sigma_w = np.asarray(sigma_w, dtype=float)
    if sigma_w.shape != (z.shape[1], z.shape[1]):
        raise ValueError(
            f"sigma_w has shape {sigma_w.shape}, expected {(z.shape[1], z.shape[1])}"
        )
    return _finalize(z.T @ z - sigma_w, z.T @ y, EstimatorKind.KNOWN_SIGMA_W)


def build_upper_bound_sigma_w(
    z: NDArray, y: NDArray, sigma_w_upper: NDArray
) -> MomentEstimate:
    """Same correction with a conservative noise-covariance bound in place of the truth.

    The resulting estimator is biased (it over-subtracts), which the distinct
    ``kind`` records so error reporting can apply the weaker guarantee.
    """
    z, y = _check_zy(z, y)
    sigma_w_upper = np.asarray(sigma_w_upper, dtype=float)
    if sigma_w_upper.shape != (z.shape[1], z.shape[1]):
        raise ValueError(
            f"sigma_w_upper has shape {sigma_w_upper.shape}, "
            f"expected {(z.shape[1], z.shape[1])}"
        )
    return _finalize(
        z.T @ z - sigma_w_upper, z.T @ y, EstimatorKind.UPPER_BOUND_SIGMA_W
    )


def build_known_sigma_x(z: NDArray, y: NDArray, sigma_x: NDArray) -> MomentEstimate:
    """Use the known design covariance directly: ``sigma_hat = sigma_x``, ``gamma_hat = z'y``."""
    z, y = _check_zy(z, y)
    sigma_x = np.asarray(sigma_x, dtype=float)
    if sigma_x.shape != (z.shape[1], z.shape[1]):
        raise ValueError(
            f"sigma_x has shape {sigma_x.shape}, expected {(z.shape[1], z.shape[1])}"
        )
    return _finalize(sigma_x.copy(), z.T @ y, EstimatorKind.KNOWN_SIGMA_X)


def build_iv(z: NDArray, y: NDArray, iv: IVSpec) -> MomentEstimate:
    """Project through instruments: ``sigma_hat = (u'z)'(u'z)``, ``gamma_hat = z'u u'y``.

    The Gram structure makes ``sigma_hat`` positive semidefinite by
    construction, but identification needs at least as many instruments as
    fitted coordinates; ``m < d`` is rejected because the estimate would be
    structurally singular.
    """
    z, y = _check_zy(z, y)
    d = z.shape[1]
    if iv.m < d:
        raise ValueError(f"need at least d={d} instruments, got m={iv.m}")
    if iv.u.shape[0] != z.shape[0]:
        raise ValueError(f"u has {iv.u.shape[0]} rows but z has {z.shape[0]}")
    utz = iv.u.T @ z
    return _finalize(utz.T @ utz, z.T @ iv.u @ (iv.u.T @ y), EstimatorKind.INSTRUMENTAL_VARIABLE)


def correction_mask(d: int, rho: float) -> NDArray:
    """Elementwise inverse-observation-probability mask for erased designs.

    Diagonal entries 1/(1-rho) (one observation indicator per squared term),
    off-diagonal entries 1/(1-rho)^2 (two independent indicators per cross
    term).
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    m = np.full((d, d), 1.0 / (1.0 - rho) ** 2)
    np.fill_diagonal(m, 1.0 / (1.0 - rho))
    return m


def build_missing(z: NDArray, y: NDArray, rho: float) -> MomentEstimate:
    """Unbias the zero-filled Gram: ``sigma_hat = (z'z) * mask``, ``gamma_hat = z'y / (1-rho)``."""
    z, y = _check_zy(z, y)
    mask = correction_mask(z.shape[1], rho)
    return _finalize((z.T @ z) * mask, z.T @ y / (1.0 - rho), EstimatorKind.MISSING_DATA)


def build_clean_ls(z: NDArray, y: NDArray) -> MomentEstimate:
    """Uncorrected least-squares moments ``(z'z, z'y)``; the clean-data baseline."""
    z, y = _check_zy(z, y)
    return _finalize(z.T @ z, z.T @ y, EstimatorKind.CLEAN_LS)


def default_lambda_floor(est: MomentEstimate) -> float:
    """Relative floor 1e-8 * trace(sigma_hat)/d, dimensionless across problem scales."""
    return 1e-8 * max(float(np.trace(est.sigma_hat)), 0.0) / est.dim


def solve_corrected(
    est: MomentEstimate,
    lambda_floor: float | None = None,
    repair: bool = False,
) -> NDArray:
    """Solve ``sigma_hat @ beta = gamma_hat`` under a strong-convexity check.

    Parameters
    ----------
    est : MomentEstimate
        Corrected moment pair.
    lambda_floor : float, optional
        Positive solvability threshold.  Defaults to the relative floor
        ``1e-8 * trace(sigma_hat) / d``.
    repair : bool
        Opt-in: replace eigenvalues at or below the floor with the floor via
        a symmetric eigendecomposition instead of failing.  Off by default
        because silent repair masks an undersized sample.

    Raises
    ------
    StrongConvexityViolation
        If ``lambda_min(sigma_hat) <= lambda_floor`` and repair is off.
    """
    floor = default_lambda_floor(est) if lambda_floor is None else float(lambda_floor)
    if est.lambda_min <= floor:
        if not repair:
            raise StrongConvexityViolation(est.lambda_min, floor)
        vals, vecs = np.linalg.eigh(est.sigma_hat)
        vals = np.maximum(vals, max(floor, np.finfo(float).tiny))
        return vecs @ ((vecs.T @ est.gamma_hat) / vals)
    try:
        c, low = scipy.linalg.cho_factor(est.sigma_hat, check_finite=False)
        return scipy.linalg.cho_solve((c, low), est.gamma_hat, check_finite=False)
    except np.linalg.LinAlgError:
        # lambda_min cleared the floor but Cholesky still balked (possible at
        # the numerical margin); the eigendecomposition path is always safe.
        vals, vecs = np.linalg.eigh(est.sigma_hat)
        return vecs @ ((vecs.T @ est.gamma_hat) / vals)


def error_bound(
    kind: EstimatorKind,
    *,
    k: int,
    n: int,
    p: int,
    beta_norm: float,
    sigma_w: float = 0.0,
    sigma_e: float = 0.0,
    rho: float = 0.0,
    lambda_min_sigma_x: float = 1.0,
    sigma_1: float | None = None,
    sigma_k: float | None = None,
    sigma_u: float | None = None,
    m: int | None = None,
    delta_upper_max: float | None = None,
) -> float:
    """Evaluate the predicted estimation-error scale for a knowledge model.

    The universal constant is taken as 1, so values are meaningful only as
    proportionality diagnostics (scaling collapse), never as absolute
    guarantees.  ``delta_upper_max`` is the largest eigenvalue of the excess
    of a conservative noise-covariance bound over the truth; the upper-bound
    model returns ``inf`` when that excess reaches ``lambda_min_sigma_x``,
    outside which the model predicts nothing.
    """
    rate = math.sqrt(k * math.log(p) / n)
    if kind is EstimatorKind.KNOWN_SIGMA_W:
        num = (sigma_w + sigma_w**2) * beta_norm + sigma_e * math.sqrt(1 + sigma_w**2)
        return num / lambda_min_sigma_x * rate
    if kind is EstimatorKind.UPPER_BOUND_SIGMA_W:
        if delta_upper_max is None:
            raise ValueError("upper-bound model needs delta_upper_max")
        denom = lambda_min_sigma_x - delta_upper_max
        if denom <= 0:
            return math.inf
        num = (sigma_w + sigma_w**2) * beta_norm + sigma_e * math.sqrt(1 + sigma_w**2)
        return (num * rate + delta_upper_max * beta_norm) / denom
    if kind is EstimatorKind.KNOWN_SIGMA_X:
        num = (1 + sigma_w) * beta_norm + sigma_e * math.sqrt(1 + sigma_w**2)
        return num / lambda_min_sigma_x * rate
    if kind is EstimatorKind.INSTRUMENTAL_VARIABLE:
        if sigma_1 is None or sigma_k is None or sigma_u is None or m is None:
            raise ValueError("instrument model needs sigma_1, sigma_k, sigma_u and m")
        num = math.sqrt(sigma_w**2 * beta_norm**2 + sigma_e**2)
        return num * sigma_1 * sigma_u / (sigma_k**2 * math.sqrt(k / m)) * rate
    if kind is EstimatorKind.MISSING_DATA:
        num = beta_norm / (1 - rho) ** 2 + sigma_e / (1 - rho)
        return num / lambda_min_sigma_x * rate
    if kind is EstimatorKind.CLEAN_LS:
        return sigma_e / lambda_min_sigma_x * rate
    raise ValueError(f"unknown estimator kind {kind!r}")
