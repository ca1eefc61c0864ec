"""Error metrics, support-recovery statistics, and scaling-collapse diagnostics."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from corrupt_sense.estimators import EstimatorKind

__all__ = [
    "CollapseFit",
    "SupportReport",
    "collapse_fit",
    "control_param",
    "l2_error",
    "support_report",
]


def l2_error(beta_hat: NDArray, beta_star: NDArray) -> float:
    """Euclidean distance between the fitted and true coefficient vectors."""
    a = np.asarray(beta_hat, dtype=float).reshape(-1)
    b = np.asarray(beta_star, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.linalg.norm(a - b))


@dataclass(frozen=True)
class SupportReport:
    """Set-overlap statistics between a selected support and the truth.

    Precision on an empty selection is 1 by convention (vacuously correct),
    so precision stays monotone as the selection shrinks and recall alone
    carries the miss signal.
    """

    exact_match: bool
    precision: float
    recall: float
    superset: bool


def support_report(selected: Iterable[int], truth: Iterable[int]) -> SupportReport:
    """Compare a selected index set against the true support."""
    sel = {int(i) for i in selected}
    tru = {int(i) for i in truth}
    hit = len(sel & tru)
    precision = hit / len(sel) if sel else 1.0
    recall = hit / len(tru) if tru else 1.0
    return SupportReport(
        exact_match=sel == tru,
        precision=precision,
        recall=recall,
        superset=tru <= sel,
    )


def control_param(
    kind: EstimatorKind,
    k: int,
    sigma_w: float = 0.0,
    rho: float = 0.0,
    missing_variant: str = "k_sqrt_rho_over_one_minus_rho",
) -> float:
    """The scalar each knowledge model's error is predicted to scale with.

    Additive-noise models: ``(sigma_w + sigma_w^2) * k`` when the noise
    covariance is known, ``(1 + sigma_w) * k`` when the design covariance is
    known, ``sigma_w * k`` with instruments.  Missing data: ``k *
    sqrt(rho) / (1 - rho)`` by default; the alternative ``rho * sqrt(k)``
    normalization is available via ``missing_variant="rho_sqrt_k"``.
    """
    if kind in (EstimatorKind.KNOWN_SIGMA_W, EstimatorKind.UPPER_BOUND_SIGMA_W):
        return (sigma_w + sigma_w**2) * k
    if kind is EstimatorKind.KNOWN_SIGMA_X:
        return (1.0 + sigma_w) * k
    if kind is EstimatorKind.INSTRUMENTAL_VARIABLE:
        return sigma_w * k
    if kind is EstimatorKind.MISSING_DATA:
        if missing_variant == "k_sqrt_rho_over_one_minus_rho":
            return k * np.sqrt(rho) / (1.0 - rho)
        if missing_variant == "rho_sqrt_k":
            return rho * np.sqrt(k)
        raise ValueError(f"unknown missing_variant {missing_variant!r}")
    if kind is EstimatorKind.CLEAN_LS:
        return 0.0
    raise ValueError(f"no control parameter for kind {kind!r}")


@dataclass(frozen=True)
class CollapseFit:
    """Origin-anchored proportionality diagnostics for grouped error curves.

    ``per_group_slope`` maps each group key to its through-origin
    least-squares slope.  ``pooled_r2`` is the uncentered R-squared of a
    single through-origin line fitted to all points at once.
    ``slope_dispersion`` is (max slope - min slope) / median slope.
    """

    per_group_slope: dict
    pooled_r2: float
    slope_dispersion: float
    pooled_slope: float


def collapse_fit(points: Iterable[tuple[object, float, float]]) -> CollapseFit:
    """Fit through-origin lines to grouped (control value, mean error) points.

    Parameters
    ----------
    points : iterable of (group, control_value, mean_error)
        At least 3 points per group and at least 2 groups.  Order is
        irrelevant.
    """
    groups: dict[object, list[tuple[float, float]]] = {}
    for g, x, y in points:
        groups.setdefault(g, []).append((float(x), float(y)))
    if len(groups) < 2:
        raise ValueError(f"need at least 2 groups, got {len(groups)}")
    for g, pts in groups.items():
        if len(pts) < 3:
            raise ValueError(f"group {g!r} has {len(pts)} points, need at least 3")

    # Canonical point and group order makes the result exactly independent of
    # input ordering (floating-point sums are order-sensitive).
    ordered = sorted(groups.items(), key=lambda kv: repr(kv[0]))
    slopes: dict = {}
    for g, pts in ordered:
        pts.sort()
        x = np.array([a for a, _ in pts])
        y = np.array([b for _, b in pts])
        xx = float(x @ x)
        if xx == 0.0:
            raise ValueError(f"group {g!r} has all-zero control values")
        slopes[g] = float(x @ y) / xx

    x_all = np.array([a for _, pts in ordered for a, _ in pts])
    y_all = np.array([b for _, pts in ordered for _, b in pts])
    pooled_slope = float(x_all @ y_all) / float(x_all @ x_all)
    ss_res = float(np.sum((y_all - pooled_slope * x_all) ** 2))
    ss_tot = float(np.sum(y_all**2))
    pooled_r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot

    vals = np.array(list(slopes.values()))
    med = float(np.median(vals))
    dispersion = float((vals.max() - vals.min()) / med) if med != 0 else float("inf")
    return CollapseFit(
        per_group_slope=slopes,
        pooled_r2=pooled_r2,
        slope_dispersion=dispersion,
        pooled_slope=pooled_slope,
    )
