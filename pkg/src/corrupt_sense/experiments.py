"""Monte-Carlo sweep harness: configs, presets, deterministic execution, CSV.

Every trial's randomness is derived from the sweep's base seed plus the cell
coordinates and trial index, never from the estimator being evaluated, so
all estimators in a cell score the exact same instances (paired trials) and
reruns are bitwise identical regardless of execution order or process count.

Solvability policy
------------------
Sweeps enforce the strong-convexity condition at the level the estimators'
guarantees assume: the corrected solve must clear half the smallest design
eigenvalue (for the Gram-correcting estimators) or a quarter of the squared
smallest cross-moment singular value (for instruments).  A trial whose
corrected matrix falls below that regime floor is the probabilistic failure
the guarantees permit at undersized sample counts: it is counted in
``failure_rate`` and excluded from the error moments instead of letting a
near-singular solve blow up the trial mean.  Support recovery never touches
the solve and is scored for every trial regardless.
"""

from __future__ import annotations

import concurrent.futures
import csv
import time
from dataclasses import dataclass, replace

import numpy as np

from corrupt_sense import datagen
from corrupt_sense import metrics
from corrupt_sense import omp as omp_mod
from corrupt_sense.estimators import (
    EstimatorKind,
    StrongConvexityViolation,
    build_clean_ls,
    build_iv,
    build_known_sigma_w,
    build_known_sigma_x,
    build_missing,
    solve_corrected,
)
from corrupt_sense.seeding import derive_entropy

__all__ = [
    "CSV_HEADER",
    "EstimatorSpec",
    "ExperimentConfig",
    "PRESET_NAMES",
    "ResultRecord",
    "TrialResult",
    "config_from_dict",
    "preset",
    "read_csv",
    "run_cell",
    "run_sweep",
    "write_csv",
]

CSV_HEADER = (
    "regime,estimator,n,p,k,sigma_w,rho,control_value,mean_l2_error,"
    "std_l2_error,support_recovery_rate,failure_rate,trials,wall_time_ms"
)

ESTIMATOR_TOKENS = ("sigma_w", "sigma_x", "iv", "missing", "clean_ls", "naive")


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator to evaluate per cell.

    ``sigma_w_factor`` deliberately mis-scales the noise level handed to the
    sigma_w estimator (the instance is still generated at the true level);
    factor 1 is the correctly-specified default.
    """

    kind: str
    sigma_w_factor: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ESTIMATOR_TOKENS:
            raise ValueError(
                f"unknown estimator kind {self.kind!r}; expected one of {ESTIMATOR_TOKENS}"
            )

    @property
    def name(self) -> str:
        if self.sigma_w_factor == 1.0:
            return self.kind
        return f"{self.kind}_x{self.sigma_w_factor:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    """A full sweep description: geometry grid, corruption family, estimators.

    ``regime`` is "low" (dense coefficients, ambient dimension equals k per
    cell) or "high" (sparse recovery at fixed ambient dimension ``p`` via
    greedy selection).  Exactly one noise axis is active: ``sigma_w_list``
    for the additive channel, ``rho_list`` for the missing channel.
    """

    name: str
    regime: str
    n: int
    k_list: tuple[int, ...]
    corruption: str  # "additive" | "missing" | "clean"
    sigma_w_list: tuple[float, ...] = (0.0,)
    rho_list: tuple[float, ...] = (0.0,)
    p: int | None = None
    sigma_e: float = 0.0
    sigma_x_offdiag: float = 0.0
    estimators: tuple[EstimatorSpec, ...] = (EstimatorSpec("sigma_w"),)
    iv_m_factor: int = 2
    trials: int = 50
    base_seed: int = 42
    scale: str = "desk"

    def __post_init__(self) -> None:
        if self.regime not in ("low", "high"):
            raise ValueError(f"regime must be 'low' or 'high', got {self.regime!r}")
        if self.corruption not in ("additive", "missing", "clean"):
            raise ValueError(f"unknown corruption family {self.corruption!r}")
        if not self.k_list:
            raise ValueError("k_list must be nonempty")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.regime == "high" and self.p is None:
            raise ValueError("high regime requires an explicit ambient dimension p")
        if not self.estimators:
            raise ValueError("estimators must be nonempty")
        axis = self.noise_axis()
        if not axis:
            raise ValueError("noise grid must be nonempty")
        for spec in self.estimators:
            if spec.kind == "missing" and self.corruption != "missing":
                raise ValueError("the missing-data estimator needs the missing channel")
            if spec.kind in ("sigma_w", "sigma_x", "iv") and self.corruption == "missing":
                raise ValueError(
                    f"estimator {spec.kind!r} applies to the additive channel"
                )

    def noise_axis(self) -> tuple[float, ...]:
        if self.corruption == "additive":
            return self.sigma_w_list
        if self.corruption == "missing":
            return self.rho_list
        return (0.0,)

    def cell_dim(self, k: int) -> int:
        return k if self.regime == "low" else int(self.p)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build a config from a plain key-value document (e.g. parsed JSON)."""
    doc = dict(doc)
    ests = []
    for entry in doc.pop("estimators", ["sigma_w"]):
        if isinstance(entry, str):
            ests.append(EstimatorSpec(entry))
        else:
            ests.append(EstimatorSpec(**entry))
    for key in ("k_list", "sigma_w_list", "rho_list"):
        if key in doc:
            doc[key] = tuple(doc[key])
    known = ExperimentConfig.__dataclass_fields__
    unknown = set(doc) - set(known)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(estimators=tuple(ests), **doc)


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one estimator on one instance.

    ``l2_error`` is None when the final solve failed; ``support_exact`` is
    None when no support information was produced (selection itself failed).
    Support recovery is scored from the selection stage, so a failed final
    solve still reports whether the support was right.
    """

    l2_error: float | None
    support_exact: bool | None


@dataclass(frozen=True)
class ResultRecord:
    """One aggregated sweep cell for one estimator."""

    regime: str
    estimator: str
    n: int
    p: int
    k: int
    sigma_w: float
    rho: float
    control_value: float
    mean_l2_error: float
    std_l2_error: float
    support_recovery_rate: float
    failure_rate: float
    trials: int
    wall_time_ms: float


_CONTROL_KIND = {
    "sigma_w": EstimatorKind.KNOWN_SIGMA_W,
    "naive": EstimatorKind.KNOWN_SIGMA_W,
    "sigma_x": EstimatorKind.KNOWN_SIGMA_X,
    "iv": EstimatorKind.INSTRUMENTAL_VARIABLE,
    "missing": EstimatorKind.MISSING_DATA,
    "clean_ls": EstimatorKind.CLEAN_LS,
}


def _trial_seed(config: ExperimentConfig, k: int, noise: float, trial: int) -> int:
    ent = derive_entropy(
        config.base_seed,
        "trial",
        config.regime,
        config.n,
        config.cell_dim(k),
        k,
        config.corruption,
        repr(float(noise)),
        trial,
    )
    # Fold the entropy words into one 64-bit instance seed.
    out = 0
    for w in ent:
        out = (out * 0x9E3779B97F4A7C15 + w) & 0xFFFFFFFFFFFFFFFF
    return out


def _corruption_for(config: ExperimentConfig, noise: float) -> datagen.CorruptionSpec:
    if config.corruption == "additive":
        return datagen.AdditiveNoise(sigma_w=noise)
    if config.corruption == "missing":
        return datagen.Missing(rho=noise)
    return datagen.Clean()


def _design_for(config: ExperimentConfig, dim: int) -> datagen.DesignSpec:
    if config.sigma_x_offdiag:
        return datagen.DesignSpec.constant_offdiag(
            dim, config.sigma_x_offdiag, config.sigma_e
        )
    return datagen.DesignSpec.identity(dim, config.sigma_e)


def _gram_floor(design: datagen.DesignSpec) -> float:
    """Regime floor for Gram-correcting estimators: half the smallest design eigenvalue."""
    sx = design.sigma_x
    if np.array_equal(sx, np.eye(sx.shape[0])):
        return 0.5
    return 0.5 * float(np.linalg.eigvalsh(sx)[0])


def _iv_floor(
    iv: datagen.IVSpec, design: datagen.DesignSpec, support: list[int] | None
) -> float | None:
    """Regime floor for the instrument estimator: a quarter of the squared
    smallest singular value of the expected cross-moment, restricted to the
    fitted columns.  None (solver default) when the mixing matrix is unknown.
    """
    if iv.gamma is None:
        return None
    cross = iv.gamma.T @ design.sigma_x
    if support is not None:
        cross = cross[:, support]
    smallest = float(np.linalg.svd(cross, compute_uv=False)[-1])
    return 0.25 * smallest**2


def _eval_low(
    spec: EstimatorSpec,
    inst: datagen.ProblemInstance,
    design: datagen.DesignSpec,
    config: ExperimentConfig,
    noise: float,
    iv_seed: int,
    gram_floor: float,
) -> TrialResult:
    z, y = inst.z, inst.y
    kind = spec.kind
    floor = gram_floor
    try:
        if kind == "sigma_w":
            used = (spec.sigma_w_factor * noise) ** 2 * np.eye(inst.p)
            est = build_known_sigma_w(z, y, used)
        elif kind == "sigma_x":
            est = build_known_sigma_x(z, y, design.sigma_x)
        elif kind == "iv":
            iv = datagen.gen_iv(inst.x, config.iv_m_factor * inst.k, iv_seed)
            est = build_iv(z, y, iv)
            floor = _iv_floor(iv, design, None)
        elif kind == "missing":
            est = build_missing(z, y, noise)
        elif kind == "naive":
            est = build_clean_ls(z, y)
        elif kind == "clean_ls":
            est = build_clean_ls(inst.x, y)
        else:  # pragma: no cover - guarded by EstimatorSpec
            raise ValueError(kind)
        beta_hat = solve_corrected(est, lambda_floor=floor)
    except StrongConvexityViolation:
        return TrialResult(l2_error=None, support_exact=None)
    err = metrics.l2_error(beta_hat, inst.beta_star)
    exact = metrics.support_report(
        np.flatnonzero(beta_hat), np.flatnonzero(inst.beta_star)
    ).exact_match
    return TrialResult(l2_error=err, support_exact=exact)


def _eval_high(
    spec: EstimatorSpec,
    inst: datagen.ProblemInstance,
    design: datagen.DesignSpec,
    config: ExperimentConfig,
    noise: float,
    iv_seed: int,
    selection_on_z: tuple[list[int], list] | None,
    selection_on_x: tuple[list[int], list] | None,
    gram_floor: float,
) -> TrialResult:
    if spec.kind == "clean_ls":
        selection = selection_on_x
        columns_from = inst.x
    else:
        selection = selection_on_z
        columns_from = inst.z
    if selection is None:
        return TrialResult(l2_error=None, support_exact=None)
    support, _ = selection
    exact = metrics.support_report(support, inst.support).exact_match

    floor = gram_floor
    if spec.kind == "sigma_w":
        final = omp_mod.FinalKnownSigmaW(sigma_w=spec.sigma_w_factor * noise)
    elif spec.kind == "sigma_x":
        final = omp_mod.FinalKnownSigmaX(sigma_x=design.sigma_x)
    elif spec.kind == "iv":
        iv = datagen.gen_iv(inst.x, config.iv_m_factor * inst.k, iv_seed)
        final = omp_mod.FinalIV(iv=iv)
        floor = _iv_floor(iv, design, support)
    elif spec.kind == "missing":
        final = omp_mod.FinalMissing(rho=noise)
    else:  # naive and clean_ls both finish with an uncorrected solve
        final = omp_mod.FinalCleanLS()

    z_sel = columns_from[:, support]
    try:
        est = omp_mod.restricted_estimate(z_sel, inst.y, support, final)
        coef = solve_corrected(est, lambda_floor=floor)
    except StrongConvexityViolation:
        return TrialResult(l2_error=None, support_exact=exact)
    beta_hat = np.zeros(inst.p)
    beta_hat[support] = coef
    return TrialResult(
        l2_error=metrics.l2_error(beta_hat, inst.beta_star), support_exact=exact
    )


def run_cell(
    config: ExperimentConfig, k: int, noise: float
) -> dict[str, list[TrialResult]]:
    """Run all trials of one grid cell for every configured estimator.

    The instance (and the greedy selection in the high regime) is shared by
    all estimators of a trial, so comparisons across estimators are paired.
    Solves run under the regime floors described in the module docstring;
    sub-floor trials come back with ``l2_error=None``.
    """
    dim = config.cell_dim(k)
    design = _design_for(config, dim)
    corruption = _corruption_for(config, noise)
    gram_floor = _gram_floor(design)
    needs_z_selection = config.regime == "high" and any(
        s.kind != "clean_ls" for s in config.estimators
    )
    needs_x_selection = config.regime == "high" and any(
        s.kind == "clean_ls" for s in config.estimators
    )
    out: dict[str, list[TrialResult]] = {s.name: [] for s in config.estimators}
    for trial in range(config.trials):
        seed = _trial_seed(config, k, noise, trial)
        inst = datagen.gen_instance(config.n, dim, k, design, corruption, seed)
        # gen_iv derives its own labeled sub-stream, so the instance seed is safe to reuse
        iv_seed = seed
        sel_z = sel_x = None
        if needs_z_selection:
            try:
                sel_z = omp_mod.select_support(inst.z, inst.y, k)
            except omp_mod.SingularGram:
                sel_z = None
        if needs_x_selection:
            try:
                sel_x = omp_mod.select_support(inst.x, inst.y, k)
            except omp_mod.SingularGram:
                sel_x = None
        for spec in config.estimators:
            if config.regime == "low":
                res = _eval_low(
                    spec, inst, design, config, noise, iv_seed, gram_floor
                )
            else:
                res = _eval_high(
                    spec, inst, design, config, noise, iv_seed, sel_z, sel_x,
                    gram_floor,
                )
            out[spec.name].append(res)
    return out


def _aggregate(
    config: ExperimentConfig,
    k: int,
    noise: float,
    spec: EstimatorSpec,
    results: list[TrialResult],
    wall_ms: float,
) -> ResultRecord:
    sigma_w = noise if config.corruption == "additive" else 0.0
    rho = noise if config.corruption == "missing" else 0.0
    errors = np.array([r.l2_error for r in results if r.l2_error is not None])
    flags = [r.support_exact for r in results if r.support_exact is not None]
    failures = sum(1 for r in results if r.l2_error is None)
    control = metrics.control_param(_CONTROL_KIND[spec.kind], k, sigma_w=sigma_w, rho=rho)
    return ResultRecord(
        regime=config.regime,
        estimator=spec.name,
        n=config.n,
        p=config.cell_dim(k),
        k=k,
        sigma_w=sigma_w,
        rho=rho,
        control_value=float(control),
        mean_l2_error=float(np.mean(errors)) if errors.size else float("nan"),
        std_l2_error=float(np.std(errors)) if errors.size else float("nan"),
        support_recovery_rate=float(np.mean(flags)) if flags else float("nan"),
        failure_rate=failures / config.trials,
        trials=config.trials,
        wall_time_ms=wall_ms,
    )


def _run_cell_timed(
    args: tuple[ExperimentConfig, int, float],
) -> tuple[dict[str, list[TrialResult]], float]:
    config, k, noise = args
    start = time.perf_counter()
    results = run_cell(config, k, noise)
    return results, (time.perf_counter() - start) * 1000.0


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    """Execute the full grid and aggregate one record per (cell, estimator).

    Output ordering follows the deterministic grid order (k outer, noise
    inner, estimators in configured order) regardless of ``jobs``.  Per-trial
    solve failures are counted into ``failure_rate`` rather than aborting.
    """
    cells = [(k, noise) for k in config.k_list for noise in config.noise_axis()]
    tasks = [(config, k, noise) for k, noise in cells]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell_timed, tasks))
    else:
        outcomes = [_run_cell_timed(t) for t in tasks]
    records = []
    for (k, noise), (results, cell_ms) in zip(cells, outcomes):
        per_record_ms = cell_ms / len(config.estimators)
        for spec in config.estimators:
            records.append(
                _aggregate(config, k, noise, spec, results[spec.name], per_record_ms)
            )
    return records


def strip_timing(records: list[ResultRecord]) -> list[ResultRecord]:
    """Zero the wall-time field so outputs can be compared byte for byte."""
    return [replace(r, wall_time_ms=0.0) for r in records]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(records: list[ResultRecord], path) -> None:
    """Write records in the fixed schema with round-trip-exact floats."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in records:
                fh.write(
                    ",".join(
                        [
                            r.regime,
                            r.estimator,
                            str(r.n),
                            str(r.p),
                            str(r.k),
                            _fmt(r.sigma_w),
                            _fmt(r.rho),
                            _fmt(r.control_value),
                            _fmt(r.mean_l2_error),
                            _fmt(r.std_l2_error),
                            _fmt(r.support_recovery_rate),
                            _fmt(r.failure_rate),
                            str(r.trials),
                            _fmt(r.wall_time_ms),
                        ]
                    )
                    + "\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path) -> list[ResultRecord]:
    """Read records written by :func:`write_csv`."""
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = CSV_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ValueError(
                f"unexpected CSV header in {path}: {reader.fieldnames}, "
                f"expected {expected}"
            )
        for row in reader:
            records.append(
                ResultRecord(
                    regime=row["regime"],
                    estimator=row["estimator"],
                    n=int(row["n"]),
                    p=int(row["p"]),
                    k=int(row["k"]),
                    sigma_w=float(row["sigma_w"]),
                    rho=float(row["rho"]),
                    control_value=float(row["control_value"]),
                    mean_l2_error=float(row["mean_l2_error"]),
                    std_l2_error=float(row["std_l2_error"]),
                    support_recovery_rate=float(row["support_recovery_rate"]),
                    failure_rate=float(row["failure_rate"]),
                    trials=int(row["trials"]),
                    wall_time_ms=float(row["wall_time_ms"]),
                )
            )
    return records


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = round((stop - start) / step) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def preset(name: str, scale: str = "desk", base_seed: int = 42) -> ExperimentConfig:
    """Named experiment protocols at desk scale (fast) or paper scale (faithful).

    Desk variants shrink the sample count and trial budget, never the
    dimension-to-sparsity geometry, so each finishes in well under a minute
    on one core.
    """
    if scale not in ("desk", "paper"):
        raise ValueError(f"scale must be 'desk' or 'paper', got {scale!r}")
    desk = scale == "desk"
    ks = tuple(range(2, 8))
    common = dict(name=name, base_seed=base_seed, scale=scale)

    if name == "fig1":
        return ExperimentConfig(
            regime="low",
            n=800 if desk else 3200,
            k_list=ks,
            corruption="additive",
            sigma_w_list=(0.0, 0.5, 1.0, 1.5, 2.0) if desk else _grid(0.0, 2.0, 0.2),
            estimators=(EstimatorSpec("sigma_w"),),
            trials=50 if desk else 200,
            **common,
        )
    if name == "fig2":
        return ExperimentConfig(
            regime="low",
            n=800 if desk else 3200,
            k_list=ks,
            corruption="additive",
            sigma_w_list=(0.0, 0.5, 1.0, 1.5, 2.0) if desk else _grid(0.0, 2.0, 0.2),
            estimators=(EstimatorSpec("sigma_x"), EstimatorSpec("iv")),
            trials=50 if desk else 100,
            **common,
        )
    if name == "fig3":
        return ExperimentConfig(
            regime="low",
            n=800 if desk else 3200,
            k_list=(7,),
            corruption="additive",
            sigma_w_list=_grid(0.5, 1.5, 0.1),
            estimators=(EstimatorSpec("sigma_w"), EstimatorSpec("sigma_x")),
            trials=100,
            **common,
        )
    if name == "fig4":
        return ExperimentConfig(
            regime="high",
            n=400,
            p=450,
            k_list=ks,
            corruption="additive",
            sigma_w_list=(0.0, 0.25, 0.5, 0.75, 1.0) if desk else _grid(0.0, 1.0, 0.1),
            estimators=(EstimatorSpec("sigma_w"),),
            trials=50 if desk else 200,
            **common,
        )
    if name == "fig5":
        return ExperimentConfig(
            regime="low",
            n=1000 if desk else 2000,
            k_list=ks,
            corruption="missing",
            rho_list=(0.0, 0.2, 0.4, 0.6) if desk else _grid(0.0, 0.8, 0.1),
            estimators=(EstimatorSpec("missing"),),
            trials=50 if desk else 200,
            **common,
        )
    if name in ("fig7", "fig7b"):
        return ExperimentConfig(
            regime="high",
            n=500,
            p=750,
            k_list=ks,
            corruption="missing",
            rho_list=(0.0, 0.25, 0.5) if desk else _grid(0.0, 0.5, 0.1),
            sigma_x_offdiag=0.2 if name == "fig7b" else 0.0,
            estimators=(EstimatorSpec("missing"),),
            trials=25 if desk else 50,
            **common,
        )
    if name == "fig8":
        return ExperimentConfig(
            regime="high",
            n=400,
            p=450,
            k_list=ks,
            corruption="additive",
            sigma_w_list=(0.25, 0.5, 0.75, 1.0) if desk else _grid(0.1, 1.0, 0.1),
            estimators=(
                EstimatorSpec("sigma_w"),
                EstimatorSpec("sigma_w", sigma_w_factor=0.5),
                EstimatorSpec("sigma_w", sigma_w_factor=2.0),
            ),
            trials=20,
            **common,
        )
    raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")


PRESET_NAMES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig7", "fig7b", "fig8")
