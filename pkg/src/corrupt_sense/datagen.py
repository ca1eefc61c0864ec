"""Problem generators: Gaussian designs, corruption channels, full instances.

Row-scaling convention
----------------------
Rows of every generated matrix carry a 1/n variance factor: design rows are
drawn N(0, Sigma_x / n), additive-noise rows N(0, Sigma_w / n), and response
noise entries N(0, sigma_e^2 / n).  With this convention the expected Gram
matrix E[X'X] equals the user-facing ``Sigma_x`` (and E[W'W] = ``Sigma_w``)
with no extra normalization, so downstream moment corrections subtract the
parameters exactly as given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from corrupt_sense.seeding import derive_rng

__all__ = [
    "AdditiveNoise",
    "Clean",
    "CorruptionSpec",
    "DesignSpec",
    "IVSpec",
    "Missing",
    "ProblemInstance",
    "corrupt",
    "gen_design",
    "gen_instance",
    "gen_iv",
]


def _is_identity(A: NDArray) -> bool:
    # Mixing by an exact identity is a no-op; skipping it avoids a dense
    # p x p x n matmul per instance without changing any generated value.
    return A.shape[0] == A.shape[1] and np.array_equal(A, np.eye(A.shape[0]))


def _check_symmetric(A: NDArray, name: str, tol: float = 1e-10) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.abs(A).max()))
    if float(np.abs(A - A.T).max()) > tol * scale:
        raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """Covariate distribution: row covariance (before 1/n scaling) and response noise scale.

    Parameters
    ----------
    sigma_x : ndarray of shape (p, p)
        Symmetric positive-definite row covariance of the true design.
    sigma_e : float
        Response noise scale; response noise entries are N(0, sigma_e^2 / n).
    """

    sigma_x: NDArray
    sigma_e: float = 0.0

    def __post_init__(self) -> None:
        sx = np.asarray(self.sigma_x, dtype=float)
        object.__setattr__(self, "sigma_x", sx)
        _check_symmetric(sx, "sigma_x")
        if self.sigma_e < 0:
            raise ValueError(f"sigma_e must be nonnegative, got {self.sigma_e}")

    @staticmethod
    def identity(p: int, sigma_e: float = 0.0) -> "DesignSpec":
        return DesignSpec(np.eye(p), sigma_e)

    @staticmethod
    def constant_offdiag(p: int, c: float, sigma_e: float = 0.0) -> "DesignSpec":
        """Unit diagonal with constant off-diagonal correlation ``c``."""
        sx = np.full((p, p), float(c))
        np.fill_diagonal(sx, 1.0)
        return DesignSpec(sx, sigma_e)


@dataclass(frozen=True)
class Clean:
    """No corruption: the design is observed exactly."""


@dataclass(frozen=True, eq=False)
class AdditiveNoise:
    """Additive observation noise with known row covariance.

    ``sigma_w`` parameterizes the diagonal model (noise rows have covariance
    sigma_w^2 * I / n).  A general covariance may be supplied via ``sigma_w_mat``
    which overrides the scalar.  ``sigma_w_upper`` optionally carries a
    conservative covariance bound for the upper-bound estimator variant; it
    plays no role in generation.
    """

    sigma_w: float = 0.0
    sigma_w_mat: NDArray | None = None
    sigma_w_upper: NDArray | None = None

    def __post_init__(self) -> None:
        if self.sigma_w < 0:
            raise ValueError(f"sigma_w must be nonnegative, got {self.sigma_w}")
        if self.sigma_w_mat is not None:
            m = np.asarray(self.sigma_w_mat, dtype=float)
            object.__setattr__(self, "sigma_w_mat", m)
            _check_symmetric(m, "sigma_w_mat")
            if np.linalg.eigvalsh(m)[0] < -1e-10:
                raise ValueError("sigma_w_mat must be positive semidefinite")
        if self.sigma_w_upper is not None:
            u = np.asarray(self.sigma_w_upper, dtype=float)
            object.__setattr__(self, "sigma_w_upper", u)
            _check_symmetric(u, "sigma_w_upper")

    def covariance(self, p: int) -> NDArray:
        """The (unscaled) noise covariance to correct for, as a p x p matrix."""
        if self.sigma_w_mat is not None:
            if self.sigma_w_mat.shape[0] != p:
                raise ValueError(
                    f"sigma_w_mat has dimension {self.sigma_w_mat.shape[0]}, expected {p}"
                )
            return self.sigma_w_mat
        return self.sigma_w**2 * np.eye(p)


@dataclass(frozen=True)
class Missing:
    """Each design entry is observed independently with probability 1 - rho."""

    rho: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")


CorruptionSpec = Clean | AdditiveNoise | Missing


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A generated regression problem and everything needed to score a fit.

    Attributes
    ----------
    x : ndarray of shape (n, p)
        True covariates (never available to estimators under corruption).
    z : ndarray of shape (n, p)
        Observed covariates: ``x + w`` under additive noise, ``x * mask``
        under missing data, ``x`` itself when clean.
    w : ndarray or None
        Additive noise realization (additive channel only).
    mask : ndarray or None
        Binary observation indicators (missing channel only, 1 = observed).
    e : ndarray of shape (n,)
        Response noise.
    beta_star : ndarray of shape (p,)
        True coefficients with exactly ``k`` nonzeros, each +-1.
    y : ndarray of shape (n,)
        Responses, ``x @ beta_star + e`` exactly.
    """

    n: int
    p: int
    k: int
    x: NDArray
    z: NDArray
    w: NDArray | None
    mask: NDArray | None
    e: NDArray
    beta_star: NDArray
    y: NDArray
    corruption: CorruptionSpec
    seed: int

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.beta_star))


@dataclass(frozen=True, eq=False)
class IVSpec:
    """Instruments correlated with the design but independent of its corruption.

    Attributes
    ----------
    u : ndarray of shape (n, m)
        Instrument matrix.
    m : int
        Instrument count; the moment estimator needs m >= fitted dimension.
    sigma_u : float
        Scale of the fresh-noise part used when ``u`` was synthesized.
    gamma : ndarray of shape (p, m) or None
        Mixing matrix used at synthesis time (diagnostic).
    """

    u: NDArray
    m: int
    sigma_u: float = 1.0
    gamma: NDArray | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.u.shape[1] != self.m:
            raise ValueError(f"u has {self.u.shape[1]} columns, expected m={self.m}")


def gen_design(n: int, p: int, spec: DesignSpec, seed: int) -> NDArray:
    """Draw an n x p design with independent rows N(0, sigma_x / n).

    Deterministic for a fixed seed.  Raises ``ValueError`` if ``sigma_x`` is
    not positive definite (a singular row covariance is rejected rather than
    silently producing a degenerate design).
    """
    if n < 1 or p < 1:
        raise ValueError(f"n and p must be >= 1, got n={n}, p={p}")
    if spec.sigma_x.shape[0] != p:
        raise ValueError(f"sigma_x has dimension {spec.sigma_x.shape[0]}, expected {p}")
    if _is_identity(spec.sigma_x):
        chol = None
    else:
        try:
            chol = np.linalg.cholesky(spec.sigma_x)
        except np.linalg.LinAlgError as exc:
            raise ValueError("sigma_x must be positive definite") from exc
    rng = derive_rng(seed, "design", n, p)
    g = rng.standard_normal((n, p))
    if chol is None:
        return g / np.sqrt(n)
    return (g @ chol.T) / np.sqrt(n)


def corrupt(
    x: NDArray, spec: CorruptionSpec, seed: int
) -> tuple[NDArray, NDArray | None]:
    """Pass the design through the observation channel described by ``spec``.

    Returns ``(z, w_or_mask)``: the noise realization for the additive channel,
    the binary observation mask for the missing channel, and an all-zero noise
    matrix for the clean channel.  With ``sigma_w = 0`` or ``rho = 0`` the
    observed matrix equals ``x`` entry for entry.
    """
    n, p = x.shape
    if isinstance(spec, Clean):
        return x.copy(), np.zeros_like(x)
    if isinstance(spec, AdditiveNoise):
        rng = derive_rng(seed, "corrupt-additive", n, p)
        g = rng.standard_normal((n, p))
        if spec.sigma_w_mat is not None:
            chol = np.linalg.cholesky(_nudge_psd(spec.covariance(p)))
            w = (g @ chol.T) / np.sqrt(n)
        else:
            w = (spec.sigma_w / np.sqrt(n)) * g
        return x + w, w
    if isinstance(spec, Missing):
        rng = derive_rng(seed, "corrupt-missing", n, p)
        mask = (rng.random((n, p)) < 1.0 - spec.rho).astype(float)
        return x * mask, mask
    raise ValueError(f"unknown corruption spec {spec!r}")


def _nudge_psd(a: NDArray) -> NDArray:
    # Cholesky of a PSD-but-singular covariance needs a tiny ridge.
    try:
        np.linalg.cholesky(a)
        return a
    except np.linalg.LinAlgError:
        return a + 1e-12 * max(1.0, float(np.trace(a))) * np.eye(a.shape[0])


def gen_instance(
    n: int,
    p: int,
    k: int,
    design: DesignSpec,
    corruption: CorruptionSpec,
    seed: int,
) -> ProblemInstance:
    """Generate a full problem: design, +-1 coefficients, responses, corruption.

    The support is a uniformly random size-k subset; each nonzero coefficient
    is an independent +-1 sign.  Responses satisfy ``y = x @ beta_star + e``
    exactly.  Deterministic for fixed arguments.
    """
    if k > p:
        raise ValueError(f"k must be <= p, got k={k}, p={p}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = gen_design(n, p, design, seed)
    rng_beta = derive_rng(seed, "beta", n, p, k)
    support = np.sort(rng_beta.choice(p, size=k, replace=False))
    beta = np.zeros(p)
    beta[support] = rng_beta.choice([-1.0, 1.0], size=k)
    rng_e = derive_rng(seed, "response-noise", n)
    e = (design.sigma_e / np.sqrt(n)) * rng_e.standard_normal(n)
    y = x @ beta + e
    z, aux = corrupt(x, corruption, seed)
    mask = aux if isinstance(corruption, Missing) else None
    w = None if isinstance(corruption, Missing) else aux
    return ProblemInstance(
        n=n,
        p=p,
        k=k,
        x=x,
        z=z,
        w=w,
        mask=mask,
        e=e,
        beta_star=beta,
        y=y,
        corruption=corruption,
        seed=seed,
    )


def gen_iv(x: NDArray, m: int, seed: int, sigma_u: float = 1.0) -> IVSpec:
    """Synthesize instruments ``u = x @ gamma + noise``.

    ``gamma`` has independent standard-Gaussian entries; the fresh noise has
    entries N(0, sigma_u^2 / n) to match the package's row-scaling convention,
    which keeps the instruments independent of any later corruption of ``x``.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    n, p = x.shape
    rng = derive_rng(seed, "iv", n, p, m)
    gamma = rng.standard_normal((p, m))
    noise = (sigma_u / np.sqrt(n)) * rng.standard_normal((n, m))
    return IVSpec(u=x @ gamma + noise, m=m, sigma_u=sigma_u, gamma=gamma)
