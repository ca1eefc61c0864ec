"""Command-line entry point: generate, fit, sweep, probe, presets.

Exit codes: 0 success, 1 runtime failure, 2 invalid flags, 3 configuration
or input-schema errors, 4 strong-convexity violation during a fit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from corrupt_sense import concentration, datagen, experiments, omp
from corrupt_sense.estimators import StrongConvexityViolation, solve_corrected

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_CONVEXITY = 4

SEED_ENV_VAR = "CORRUPT_SENSE_SEED"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is not None:
        try:
            return int(raw)
        except ValueError as exc:
            raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
    return 42


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrupt-sense",
        description="Corrected regression with noisy and missing covariates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a Monte-Carlo sweep and write CSV")
    src = p_sweep.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="named experiment protocol")
    src.add_argument("--config", help="JSON file mirroring the sweep config")
    p_sweep.add_argument("--out", required=True, help="output CSV path")
    p_sweep.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p_sweep.add_argument("--seed", type=int, default=None, help="base seed")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel cell workers")
    p_sweep.add_argument(
        "--no-timing",
        action="store_true",
        help="zero wall_time_ms so reruns are byte-identical",
    )

    p_fit = sub.add_parser("fit", help="fit one dataset from a CSV of (y, z1..zp)")
    p_fit.add_argument("--data", required=True, help="CSV with columns y,z1..zp")
    p_fit.add_argument(
        "--estimator",
        required=True,
        choices=("sigma-w", "sigma-x", "iv", "missing", "clean"),
    )
    p_fit.add_argument("--sigma-w", type=float, default=None, help="noise scale")
    p_fit.add_argument("--rho", type=float, default=None, help="erasure probability")
    p_fit.add_argument("--sigma-x-file", help="CSV with the p x p design covariance")
    p_fit.add_argument("--iv-file", help="CSV with the n x m instrument matrix")
    p_fit.add_argument(
        "--k", type=int, default=None, help="run greedy support selection first"
    )
    p_fit.add_argument(
        "--repair",
        action="store_true",
        help="clip non-positive eigenvalues instead of failing the solve",
    )
    p_fit.add_argument("--out", help="write the fit CSV here instead of stdout")

    p_probe = sub.add_parser("probe", help="run a concentration probe")
    p_probe.add_argument(
        "--lemma",
        required=True,
        choices=("maxdev", "bilinear", "operator", "projection"),
    )
    p_probe.add_argument("--p", type=int, default=20)
    p_probe.add_argument("--k", type=int, default=None)
    p_probe.add_argument("--m", type=int, default=5)
    p_probe.add_argument(
        "--n-grid", default="400,800,1600,3200", help="comma-separated sample counts"
    )
    p_probe.add_argument(
        "--trials",
        type=int,
        default=None,
        help="trials per grid point (default depends on the statistic)",
    )
    p_probe.add_argument("--seed", type=int, default=None)
    p_probe.add_argument("--out", help="write the report CSV here instead of stdout")

    p_gen = sub.add_parser("gen", help="generate a problem instance as a fit CSV")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--p", type=int, required=True)
    p_gen.add_argument("--k", type=int, required=True)
    p_gen.add_argument("--sigma-w", type=float, default=None)
    p_gen.add_argument("--rho", type=float, default=None)
    p_gen.add_argument("--sigma-e", type=float, default=0.0)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--truth-out", help="also write beta_star here")

    sub.add_parser("presets", help="list the named experiment protocols")
    return parser


def _cmd_sweep(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.preset:
        config = experiments.preset(args.preset, scale=args.scale, base_seed=seed)
    else:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        doc.setdefault("base_seed", seed)
        config = experiments.config_from_dict(doc)
    records = experiments.run_sweep(config, jobs=max(1, args.jobs))
    if args.no_timing:
        records = experiments.strip_timing(records)
    experiments.write_csv(records, args.out)
    for r in records:
        print(
            f"{r.estimator:>14s}  n={r.n} p={r.p} k={r.k} "
            f"sigma_w={r.sigma_w:g} rho={r.rho:g}  "
            f"mean_err={r.mean_l2_error:.4g} recovery={r.support_recovery_rate:.2f} "
            f"failures={r.failure_rate:.2f}"
        )
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _read_fit_data(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
    cols = header.split(",")
    p = len(cols) - 1
    if p < 1 or cols[0] != "y" or cols[1:] != [f"z{i}" for i in range(1, p + 1)]:
        raise ValueError(
            f"data CSV must have header y,z1..zp, got {header!r}"
        )
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if body.shape[1] != p + 1:
        raise ValueError(f"data rows have {body.shape[1]} fields, expected {p + 1}")
    return body[:, 1:], body[:, 0]


def _load_matrix(path: str, name: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except Exception as exc:
        raise ValueError(f"cannot parse {name} matrix from {path}: {exc}") from exc


def _fit_final_choice(args, p: int):
    if args.estimator == "sigma-w":
        if args.sigma_w is None:
            raise ValueError("--estimator sigma-w needs --sigma-w")
        if args.sigma_w < 0:
            raise ValueError("--sigma-w must be nonnegative")
        return omp.FinalKnownSigmaW(sigma_w=args.sigma_w)
    if args.estimator == "sigma-x":
        if not args.sigma_x_file:
            raise ValueError("--estimator sigma-x needs --sigma-x-file")
        sx = _load_matrix(args.sigma_x_file, "design covariance")
        if sx.shape != (p, p):
            raise ValueError(f"design covariance is {sx.shape}, expected {(p, p)}")
        return omp.FinalKnownSigmaX(sigma_x=sx)
    if args.estimator == "iv":
        if not args.iv_file:
            raise ValueError("--estimator iv needs --iv-file")
        u = _load_matrix(args.iv_file, "instrument")
        return omp.FinalIV(iv=datagen.IVSpec(u=u, m=u.shape[1]))
    if args.estimator == "missing":
        if args.rho is None:
            raise ValueError("--estimator missing needs --rho")
        if not 0.0 <= args.rho < 1.0:
            raise ValueError(f"--rho must be in [0, 1), got {args.rho}")
        return omp.FinalMissing(rho=args.rho)
    return omp.FinalCleanLS()


def _full_dim_estimate(args, z: np.ndarray, y: np.ndarray):
    final = _fit_final_choice(args, z.shape[1])
    support = list(range(z.shape[1]))
    return omp.restricted_estimate(z, y, support, final)


def _cmd_fit(args) -> int:
    z, y = _read_fit_data(args.data)
    n, p = z.shape
    lines = []
    if args.k is not None:
        if not 1 <= args.k <= min(n, p):
            raise ValueError(f"--k must be in [1, {min(n, p)}], got {args.k}")
        final = _fit_final_choice(args, p)
        fit = omp.mod_omp(z, y, args.k, final, repair=args.repair)
        order = {idx: pos + 1 for pos, idx in enumerate(fit.support)}
        lines.append("index,beta_hat,selection_order")
        for i in range(p):
            lines.append(f"{i},{fit.beta_hat[i]:.17g},{order.get(i, '')}")
    else:
        est = _full_dim_estimate(args, z, y)
        beta = solve_corrected(est, repair=args.repair)
        lines.append("index,beta_hat")
        for i in range(p):
            lines.append(f"{i},{beta[i]:.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_probe(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        grid = tuple(int(tok) for tok in args.n_grid.split(","))
    except ValueError as exc:
        raise ValueError(f"--n-grid must be comma-separated integers: {exc}") from exc
    if args.lemma == "maxdev":
        trials = args.trials if args.trials is not None else concentration.DEFAULT_TRIALS
        report = concentration.probe_max_deviation(
            args.p, np.eye(args.p), grid, trials, seed
        )
    elif args.lemma == "bilinear":
        k = args.k if args.k is not None else 10
        trials = (
            args.trials
            if args.trials is not None
            else concentration.DEFAULT_TRIALS_BILINEAR
        )
        report = concentration.probe_bilinear(args.p, k, grid, trials, seed)
    elif args.lemma == "operator":
        k = args.k if args.k is not None else 5
        trials = args.trials if args.trials is not None else concentration.DEFAULT_TRIALS
        report = concentration.probe_operator(k, args.m, grid, trials, seed)
    else:
        k = args.k if args.k is not None else 10
        trials = (
            args.trials
            if args.trials is not None
            else concentration.DEFAULT_TRIALS_PROJECTION
        )
        report = concentration.probe_column_projection(k, grid, trials, seed)

    lines = ["statistic,n,median,trials,scaling_exponent"]
    for n, med in zip(report.n_values, report.medians):
        lines.append(
            f"{report.statistic_name},{n},{med:.17g},{report.trials_per_point},"
            f"{report.scaling_exponent:.17g}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"scaling_exponent={report.scaling_exponent:.6g}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.sigma_w is not None and args.rho is not None:
        raise ValueError("choose one corruption channel: --sigma-w or --rho")
    if args.sigma_w is not None:
        corruption = datagen.AdditiveNoise(sigma_w=args.sigma_w)
    elif args.rho is not None:
        corruption = datagen.Missing(rho=args.rho)
    else:
        corruption = datagen.Clean()
    design = datagen.DesignSpec.identity(args.p, args.sigma_e)
    inst = datagen.gen_instance(args.n, args.p, args.k, design, corruption, seed)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("y," + ",".join(f"z{i}" for i in range(1, args.p + 1)) + "\n")
        for i in range(args.n):
            row = [f"{inst.y[i]:.17g}"] + [f"{v:.17g}" for v in inst.z[i]]
            fh.write(",".join(row) + "\n")
    if args.truth_out:
        with open(args.truth_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("index,beta_star\n")
            for i, b in enumerate(inst.beta_star):
                fh.write(f"{i},{b:.17g}\n")
    print(f"wrote {args.n}x{args.p} instance to {args.out}")
    return EXIT_OK


def _cmd_presets(_args) -> int:
    print(f"{'name':8s} {'regime':6s} {'desk geometry':34s} paper geometry")
    for name in experiments.PRESET_NAMES:
        desk = experiments.preset(name, "desk")
        paper = experiments.preset(name, "paper")

        def geo(c: experiments.ExperimentConfig) -> str:
            dims = f"n={c.n}" + (f" p={c.p}" if c.p else "")
            axis = "sigma_w" if c.corruption == "additive" else "rho"
            grid = c.noise_axis()
            return f"{dims} k={c.k_list[0]}..{c.k_list[-1]} {axis}x{len(grid)} trials={c.trials}"

        print(f"{name:8s} {desk.regime:6s} {geo(desk):34s} {geo(paper)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "sweep": _cmd_sweep,
        "fit": _cmd_fit,
        "probe": _cmd_probe,
        "gen": _cmd_gen,
        "presets": _cmd_presets,
    }
    try:
        return handlers[args.command](args)
    except StrongConvexityViolation as exc:
        print(
            f"error: strong convexity violated (lambda_min={exc.lambda_min:.6g}); "
            "collect more samples or rerun with --repair",
            file=sys.stderr,
        )
        return EXIT_CONVEXITY
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
