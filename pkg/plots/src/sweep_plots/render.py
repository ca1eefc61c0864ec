"""Render sweep CSVs into the four standard figure kinds.

Rendering is deterministic: fixed canvas size, fixed hash salt for SVG ids,
and no timestamps in output metadata, so identical inputs give identical
image bytes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURE_KINDS = ("raw_curves", "collapse", "crossover", "support_rate")

EXPECTED_COLUMNS = [
    "regime",
    "estimator",
    "n",
    "p",
    "k",
    "sigma_w",
    "rho",
    "control_value",
    "mean_l2_error",
    "std_l2_error",
    "support_recovery_rate",
    "failure_rate",
    "trials",
    "wall_time_ms",
]

_NUMERIC = {
    "n",
    "p",
    "k",
    "sigma_w",
    "rho",
    "control_value",
    "mean_l2_error",
    "std_l2_error",
    "support_recovery_rate",
    "failure_rate",
    "trials",
    "wall_time_ms",
}

_RC = {
    "figure.figsize": (6.4, 4.8),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "svg.hashsalt": "sweep-plots",
}


class SchemaError(ValueError):
    """The input CSV does not carry the expected sweep columns."""


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: figure kind, input CSV, axes, grouping, output image."""

    figure_kind: str
    input_path: str
    output_path: str
    x: str | None = None
    group: str | None = None
    fmt: str = "svg"

    def __post_init__(self) -> None:
        if self.figure_kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.figure_kind!r}; expected one of {FIGURE_KINDS}"
            )
        if self.fmt not in ("svg", "png"):
            raise ValueError(f"format must be svg or png, got {self.fmt!r}")


def read_records(path: str) -> list[dict]:
    """Read sweep rows, checking the schema and typing the numeric columns."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != EXPECTED_COLUMNS:
            got = reader.fieldnames or []
            missing = [c for c in EXPECTED_COLUMNS if c not in got]
            extra = [c for c in got if c not in EXPECTED_COLUMNS]
            raise SchemaError(
                f"unexpected columns in {path}: missing {missing or 'none'}, "
                f"unrecognized {extra or 'none'}"
            )
        rows = []
        for row in reader:
            rows.append(
                {k: (float(v) if k in _NUMERIC else v) for k, v in row.items()}
            )
    if not rows:
        raise SchemaError(f"{path} has no data rows")
    return rows


def collapse_stats(points: list[tuple[object, float, float]]):
    """Origin-anchored per-group slopes, pooled uncentered R², slope dispersion.

    Mirrors the harness's collapse diagnostics so annotated numbers can be
    recomputed from the CSV alone.  Needs at least 2 groups with 3 points
    each; raises ValueError otherwise.
    """
    groups: dict[object, list[tuple[float, float]]] = {}
    for g, x, y in points:
        groups.setdefault(g, []).append((float(x), float(y)))
    if len(groups) < 2 or any(len(pts) < 3 for pts in groups.values()):
        raise ValueError("collapse fit needs >= 2 groups with >= 3 points each")
    slopes: dict[object, float] = {}
    for g, pts in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        pts.sort()
        sxx = sum(a * a for a, _ in pts)
        if sxx == 0.0:
            raise ValueError(f"group {g!r} has all-zero x values")
        slopes[g] = sum(a * b for a, b in pts) / sxx
    xs = [a for _, pts in sorted(groups.items(), key=lambda kv: repr(kv[0])) for a, _ in pts]
    ys = [b for _, pts in sorted(groups.items(), key=lambda kv: repr(kv[0])) for _, b in pts]
    pooled = sum(a * b for a, b in zip(xs, ys)) / sum(a * a for a in xs)
    ss_res = sum((b - pooled * a) ** 2 for a, b in zip(xs, ys))
    ss_tot = sum(b * b for b in ys)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    vals = sorted(slopes.values())
    med = vals[len(vals) // 2] if len(vals) % 2 else 0.5 * (
        vals[len(vals) // 2 - 1] + vals[len(vals) // 2]
    )
    dispersion = (max(vals) - min(vals)) / med if med else math.inf
    return slopes, r2, dispersion


def _group_label(row: dict, key: str) -> str:
    val = row[key]
    if isinstance(val, float) and val.is_integer():
        return f"{key}={int(val)}"
    return f"{key}={val}"


def _default_x(rows: list[dict]) -> str:
    # Whichever corruption axis actually varies; additive wins ties.
    if len({r["sigma_w"] for r in rows}) > 1:
        return "sigma_w"
    if len({r["rho"] for r in rows}) > 1:
        return "rho"
    return "sigma_w"


def _series(rows: list[dict], x: str, y: str, group: str):
    out: dict[object, list[tuple[float, float]]] = {}
    for row in rows:
        out.setdefault(row[group], []).append((row[x], row[y]))
    for pts in out.values():
        pts.sort()
    return dict(sorted(out.items(), key=lambda kv: repr(kv[0])))


def render(spec: PlotSpec) -> str:
    """Draw the figure described by ``spec`` and return the output path."""
    rows = read_records(spec.input_path)
    kind = spec.figure_kind
    if kind == "collapse":
        x = spec.x or "control_value"
        y = "mean_l2_error"
        group = spec.group or "k"
    elif kind == "crossover":
        x = spec.x or _default_x(rows)
        y = "mean_l2_error"
        group = spec.group or "estimator"
    elif kind == "support_rate":
        x = spec.x or _default_x(rows)
        y = "support_recovery_rate"
        group = spec.group or "k"
    else:
        x = spec.x or _default_x(rows)
        y = "mean_l2_error"
        group = spec.group or "k"
    for col in (x, group):
        if col not in EXPECTED_COLUMNS:
            raise SchemaError(f"no such column {col!r}; have {EXPECTED_COLUMNS}")

    series = _series(rows, x, y, group)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for gval, pts in series.items():
            xs = [a for a, _ in pts]
            ys = [b for _, b in pts]
            label = _group_label({group: gval}, group)
            if len(pts) == 1:
                ax.plot(xs, ys, marker="o", linestyle="none", label=label)
            else:
                ax.plot(xs, ys, marker="o", label=label)

        if kind == "collapse":
            try:
                slopes, r2, dispersion = collapse_stats(
                    [(g, a, b) for g, pts in series.items() for a, b in pts]
                )
            except ValueError:
                slopes = None
            if slopes is not None:
                x_max = max(a for pts in series.values() for a, _ in pts)
                for (gval, slope), line in zip(slopes.items(), ax.get_lines()):
                    ax.plot(
                        [0.0, x_max],
                        [0.0, slope * x_max],
                        linestyle="--",
                        linewidth=0.8,
                        color=line.get_color(),
                    )
                ax.text(
                    0.02,
                    0.98,
                    f"pooled R2 = {r2:.6f}\nslope dispersion = {dispersion:.6f}",
                    transform=ax.transAxes,
                    va="top",
                    fontsize=9,
                )

        ax.set_xlabel(x)
        ax.set_ylabel(y)
        ax.set_title(kind.replace("_", " "))
        ax.legend(fontsize=8)
        fig.tight_layout()
        metadata = {"Date": None} if spec.fmt == "svg" else {}
        fig.savefig(spec.output_path, format=spec.fmt, metadata=metadata)
        plt.close(fig)
    return spec.output_path
