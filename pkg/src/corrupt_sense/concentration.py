"""Monte-Carlo probes of random-matrix deviation scaling.

Each probe draws matrices under the package's row-scaling convention,
computes a deviation statistic per trial, and summarizes the trials per
sample count by their median.  Medians rather than means or maxima: the
statistics have exponentially thin but heavy upper tails, and the median
tracks the typical scale the deviation laws describe.  The fitted slope of
log(median) against log(n) should sit near -1/2 for every statistic here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from corrupt_sense.seeding import derive_rng

__all__ = [
    "DEFAULT_N_GRID",
    "DEFAULT_TRIALS",
    "DEFAULT_TRIALS_BILINEAR",
    "DEFAULT_TRIALS_PROJECTION",
    "ProbeReport",
    "bilinear_deviation",
    "max_abs_deviation",
    "operator_deviation",
    "probe_bilinear",
    "probe_column_projection",
    "probe_max_deviation",
    "probe_operator",
    "projection_stat",
]

DEFAULT_N_GRID = (400, 800, 1600, 3200)
# Scalar statistics (a single bilinear form, a single projection norm) have
# much noisier medians than max- or operator-type statistics, so their probes
# default to more trials to pin the fitted exponent down.
DEFAULT_TRIALS = 50
DEFAULT_TRIALS_BILINEAR = 600
DEFAULT_TRIALS_PROJECTION = 200
MIN_TRIALS = 30
MIN_N = 10


@dataclass(frozen=True, eq=False)
class ProbeReport:
    """Median deviation per sample count and the fitted log-log scaling slope.

    ``scaling_exponent`` is nan when any median is zero (degenerate
    statistic).  ``n_at_target`` is the smallest grid n whose median fell at
    or below ``target`` when the probe defines one, else None.
    """

    statistic_name: str
    n_values: tuple[int, ...]
    medians: tuple[float, ...]
    trials_per_point: int
    scaling_exponent: float
    target: float | None = None
    n_at_target: int | None = None


def max_abs_deviation(gram: NDArray, mean: NDArray) -> float:
    """Largest absolute entry of ``gram - mean``."""
    return float(np.max(np.abs(gram - mean)))


def bilinear_deviation(
    yt_x: NDArray, mean: NDArray, v1: NDArray, v2: NDArray
) -> float:
    """|v1' (yt_x - mean) v2| for fixed probe vectors."""
    return float(abs(v1 @ (yt_x - mean) @ v2))


def operator_deviation(yt_x: NDArray, mean: NDArray) -> float:
    """Spectral norm of ``yt_x - mean``."""
    return float(np.linalg.norm(yt_x - mean, 2))


def projection_stat(x: NDArray, v: NDArray) -> float:
    """Euclidean norm of ``x' v``; linear in the scale of ``v``."""
    return float(np.linalg.norm(x.T @ v))


def _validate_grid(n_values, trials) -> tuple[int, ...]:
    ns = tuple(int(n) for n in n_values)
    if len(ns) < 2:
        raise ValueError(f"need at least 2 sample counts for a scaling fit, got {ns}")
    if any(n < MIN_N for n in ns):
        raise ValueError(f"every n must be >= {MIN_N}, got {ns}")
    if trials < MIN_TRIALS:
        raise ValueError(f"trials must be >= {MIN_TRIALS}, got {trials}")
    return ns


def _fit_exponent(ns: tuple[int, ...], medians: list[float]) -> float:
    if any(m <= 0 for m in medians):
        return float("nan")
    slope = np.polyfit(np.log(np.array(ns, dtype=float)), np.log(medians), 1)[0]
    return float(slope)


def _report(
    name: str,
    ns: tuple[int, ...],
    medians: list[float],
    trials: int,
    target: float | None = None,
) -> ProbeReport:
    n_at = None
    if target is not None:
        hits = [n for n, m in zip(ns, medians) if m <= target]
        n_at = min(hits) if hits else None
    return ProbeReport(
        statistic_name=name,
        n_values=ns,
        medians=tuple(medians),
        trials_per_point=trials,
        scaling_exponent=_fit_exponent(ns, medians),
        target=target,
        n_at_target=n_at,
    )


def probe_max_deviation(
    p: int,
    sigma: NDArray,
    n_values=DEFAULT_N_GRID,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> ProbeReport:
    """Entrywise deviation of a sample Gram matrix from its expectation.

    Draws Y with rows N(0, sigma / n) and measures ``max |Y'Y - sigma|``
    entrywise, for each n in the grid.
    """
    ns = _validate_grid(n_values, trials)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (p, p):
        raise ValueError(f"sigma has shape {sigma.shape}, expected {(p, p)}")
    chol = np.linalg.cholesky(sigma)
    medians = []
    for n in ns:
        stats = np.empty(trials)
        for t in range(trials):
            rng = derive_rng(seed, "probe-maxdev", p, n, t)
            y = rng.standard_normal((n, p)) @ chol.T / np.sqrt(n)
            stats[t] = max_abs_deviation(y.T @ y, sigma)
        medians.append(float(np.median(stats)))
    return _report("max_entrywise_gram_deviation", ns, medians, trials)


def _check_probe_vector(v: NDArray, length: int, name: str) -> NDArray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != length:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {length}")
    norm = float(np.linalg.norm(v))
    if norm != 0.0 and abs(norm - 1.0) > 1e-8:
        raise ValueError(f"{name} must be a unit vector or zero, got norm {norm:.6g}")
    return v


def probe_bilinear(
    p: int,
    k: int,
    n_values=DEFAULT_N_GRID,
    trials: int = DEFAULT_TRIALS_BILINEAR,
    seed: int = 0,
    v1: NDArray | None = None,
    v2: NDArray | None = None,
) -> ProbeReport:
    """Bilinear-form deviation of a cross-Gram of two independent designs.

    X is n x k and Y is n x p, both with independent N(0, 1/n) entries, so
    the cross-Gram has zero mean; the statistic is ``|v1' Y'X v2|`` for the
    fixed probe vectors (unit or zero; a zero vector degenerates the
    statistic to 0 and is accepted).
    """
    ns = _validate_grid(n_values, trials)
    if p < 1 or k < 1:
        raise ValueError(f"p and k must be >= 1, got p={p}, k={k}")
    v1 = _check_probe_vector(v1 if v1 is not None else _e1(p), p, "v1")
    v2 = _check_probe_vector(v2 if v2 is not None else _e1(k), k, "v2")
    medians = []
    for n in ns:
        stats = np.empty(trials)
        for t in range(trials):
            rng = derive_rng(seed, "probe-bilinear", p, k, n, t)
            x = rng.standard_normal((n, k)) / np.sqrt(n)
            y = rng.standard_normal((n, p)) / np.sqrt(n)
            stats[t] = bilinear_deviation(y.T @ x, 0.0, v1, v2)
        medians.append(float(np.median(stats)))
    return _report("bilinear_cross_gram_deviation", ns, medians, trials)


def probe_operator(
    k: int,
    m: int,
    n_values=DEFAULT_N_GRID,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    target: float = 1.0 / 54.0,
) -> ProbeReport:
    """Spectral-norm deviation of a cross-Gram of two independent designs.

    Also reports the smallest grid n whose median deviation reaches
    ``target`` (default 1/54, the operational threshold used when a unit
    eigenvalue margin must be protected).
    """
    ns = _validate_grid(n_values, trials)
    if k < 1 or m < 1:
        raise ValueError(f"k and m must be >= 1, got k={k}, m={m}")
    medians = []
    for n in ns:
        stats = np.empty(trials)
        for t in range(trials):
            rng = derive_rng(seed, "probe-operator", k, m, n, t)
            x = rng.standard_normal((n, k)) / np.sqrt(n)
            y = rng.standard_normal((n, m)) / np.sqrt(n)
            stats[t] = operator_deviation(y.T @ x, 0.0)
        medians.append(float(np.median(stats)))
    return _report("operator_cross_gram_deviation", ns, medians, trials, target=target)


def probe_column_projection(
    k: int,
    n_values=DEFAULT_N_GRID,
    trials: int = DEFAULT_TRIALS_PROJECTION,
    seed: int = 0,
) -> ProbeReport:
    """Norm of a random design applied to a fixed unit vector.

    X is n x k with N(0, 1/n) entries and the statistic is ``||X'v||`` for
    the fixed unit vector v = ones(n)/sqrt(n); typical size sqrt(k/n).
    """
    ns = _validate_grid(n_values, trials)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    medians = []
    for n in ns:
        v = np.full(n, 1.0 / np.sqrt(n))
        stats = np.empty(trials)
        for t in range(trials):
            rng = derive_rng(seed, "probe-projection", k, n, t)
            x = rng.standard_normal((n, k)) / np.sqrt(n)
            stats[t] = projection_stat(x, v)
        medians.append(float(np.median(stats)))
    return _report("fixed_vector_projection_norm", ns, medians, trials)


def _e1(d: int) -> NDArray:
    v = np.zeros(d)
    v[0] = 1.0
    return v
