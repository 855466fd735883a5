"""Command-line interface: every experiment as a subcommand.

Exit codes: 0 all configured checks passed, 1 a check failed, 2 usage
error, 3 runtime error (budget/guard/tail failures). Reports are JSON and
carry the fully resolved configuration; curve files are CSV (or JSON with
--format json) with columns x, exact, limit, abs_error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import (
    exponential_tail_model,
    gaussian_pdf,
    gaussian_tail,
    gaussian_tail_asymptotic,
    gaussian_tail_model,
    gumbel_cdf,
    gumbel_density,
    gumbel_identity_residual,
    log_residual_density,
    shifted_log_residual_density,
)
from .errors import ExitGumbelError
from .evt import gnedenko_lhs, max_cdf, sample_normalized_max, solve_normalizers, standard_gaussian_sampler
from .exitsim import (
    ExitProblem,
    LinearDriftModel,
    limit_law_cdf,
    right_exit_probability,
    sample_conditioned_exits,
)
from .residual import scaled_residual, shifted_log_residual_cdf
from .stats import (
    EmpiricalSample,
    RngStream,
    integrate_adaptive_simpson,
    ks_one_sample,
    ks_two_sample_critical,
    write_sample_csv,
)

SEED_ENV_VAR = "EXITGUMBEL_SEED"

PASS = 0
CHECK_FAILED = 1
USAGE_ERROR = 2
RUNTIME_ERROR = 3


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 42
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_curve(path: Path, fmt: str, xs, exact, limit) -> None:
    xs = np.asarray(xs, dtype=float)
    exact = np.asarray(exact, dtype=float)
    limit = np.asarray(limit, dtype=float)
    err = np.abs(exact - limit)
    if fmt == "json":
        payload = {
            "x": xs.tolist(),
            "exact": exact.tolist(),
            "limit": limit.tolist(),
            "abs_error": err.tolist(),
        }
        _write_json(path.with_suffix(".json"), payload)
        return
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["x", "exact", "limit", "abs_error"])
        for row in zip(xs, exact, limit, err):
            writer.writerow([format(v, ".17g") for v in row])


def _grid(args) -> np.ndarray:
    lo, hi, step = args.grid_min, args.grid_max, args.grid_step
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
        raise UsageError("grid bounds and step must be finite")
    if step <= 0.0 or hi <= lo:
        raise UsageError("grid requires grid_min < grid_max and grid_step > 0")
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _resolved_config(args, **extra) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    config.update(extra)
    config["version"] = __version__
    return config


def _outdir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_exit_experiment(args) -> int:
    """Sample conditioned exits, compare with the limit law, write samples
    and a KS report."""
    out = _outdir(args)
    problem = ExitProblem(
        model=LinearDriftModel(beta=args.beta),
        epsilon=args.epsilon,
        a=args.a,
        step=args.step,
    )
    stream = RngStream(seed=args.seed)
    conditioned = sample_conditioned_exits(
        problem, args.n, stream, budget=args.budget, workers=args.workers
    )
    rows = [
        (idx, rec.tau, rec.side, rec.normalized_time)
        for idx, rec in zip(conditioned.attempt_indices, conditioned.records)
    ]
    samples_path = out / "exit_samples.csv"
    write_sample_csv(samples_path, rows)

    sample = EmpiricalSample.from_values(conditioned.normalized_times())
    ks = ks_one_sample(sample, lambda x: limit_law_cdf(args.beta, args.a, x))
    p_limit = right_exit_probability(args.beta, args.a)
    rate = conditioned.acceptance_rate
    rate_se = math.sqrt(p_limit * (1.0 - p_limit) / conditioned.attempts)
    ks_ok = ks <= args.ks_threshold
    rate_ok = abs(rate - p_limit) <= 3.0 * rate_se
    report = {
        "config": _resolved_config(args),
        "attempts": conditioned.attempts,
        "accepted": len(conditioned.records),
        "acceptance_rate": rate,
        "limit_acceptance_rate": p_limit,
        "acceptance_rate_within_3se": rate_ok,
        "ks_statistic": ks,
        "ks_threshold": args.ks_threshold,
        "samples_file": str(samples_path),
        "pass": bool(ks_ok),
    }
    _write_json(out / "exit_report.json", report)
    _emit(report)
    return PASS if ks_ok else CHECK_FAILED


def cmd_density_convergence(args) -> int:
    """Recentered conditional-density curves against the Gumbel density,
    one curve per threshold, with sup distances."""
    out = _outdir(args)
    xs = _grid(args)
    limit = np.asarray([gumbel_density(x) for x in xs])
    sups = {}
    for r in args.r:
        if r <= 0.0:
            raise UsageError(f"thresholds must be positive, got {r}")
        exact = np.asarray([shifted_log_residual_density(r, x) for x in xs])
        _write_curve(out / f"density_r{r:g}", args.format, xs, exact, limit)
        sups[r] = float(np.max(np.abs(exact - limit)))
    ordered = [sups[r] for r in sorted(args.r)]
    decreasing = all(b < a for a, b in zip(ordered, ordered[1:]))
    passed = decreasing and ordered[-1] <= args.tolerance
    report = {
        "config": _resolved_config(args),
        "sup_distance": {f"{r:g}": sups[r] for r in args.r},
        "strictly_decreasing_in_r": decreasing,
        "tolerance_at_largest_r": args.tolerance,
        "pass": passed,
    }
    _write_json(out / "density_report.json", report)
    _emit(report)
    return PASS if passed else CHECK_FAILED


def cmd_evt(args) -> int:
    """Normalizers, exceedance-count curves, normalized-max CDF curves, and
    an optional Monte Carlo KS cross-check of the exact finite-n law."""
    out = _outdir(args)
    for n in args.n:
        if n < 3:
            raise UsageError(f"block size n must be >= 3, got {n}")
    model = gaussian_tail_model()
    xs = _grid(args)
    limit_counts = np.exp(-xs)
    limit_gumbel = np.asarray([gumbel_cdf(x) for x in xs])
    normalizers = {}
    sups = {}
    for n in args.n:
        seq = solve_normalizers(model, n)
        normalizers[n] = {"scale": seq.scale, "center": seq.center}
        counts = np.asarray([gnedenko_lhs(model, seq, x) for x in xs])
        cdfs = np.asarray([max_cdf(model, seq, x) for x in xs])
        _write_curve(out / f"exceedance_n{n}", args.format, xs, counts, limit_counts)
        _write_curve(out / f"maxcdf_n{n}", args.format, xs, cdfs, limit_gumbel)
        sups[n] = float(np.max(np.abs(cdfs - limit_gumbel)))
    ordered = [sups[n] for n in sorted(args.n)]
    decreasing = all(b < a for a, b in zip(ordered, ordered[1:]))
    passed = decreasing

    mc_report = None
    if args.replicas > 0:
        seq = solve_normalizers(model, args.mc_n)
        sample = sample_normalized_max(
            standard_gaussian_sampler, seq, args.replicas, RngStream(seed=args.seed)
        )
        ks = ks_one_sample(sample, lambda x: max_cdf(model, seq, x))
        threshold = args.mc_ks_threshold
        if threshold is None:
            threshold = ks_two_sample_critical(args.replicas, args.replicas)
        mc_report = {
            "block_size": args.mc_n,
            "replicas": args.replicas,
            "ks_statistic": ks,
            "ks_threshold": threshold,
            "pass": ks <= threshold,
        }
        passed = passed and mc_report["pass"]

    report = {
        "config": _resolved_config(args),
        "normalizers": {str(n): normalizers[n] for n in args.n},
        "max_cdf_sup_distance": {str(n): sups[n] for n in args.n},
        "strictly_decreasing_in_n": decreasing,
        "monte_carlo": mc_report,
        "pass": passed,
    }
    _write_json(out / "evt_report.json", report)
    _emit(report)
    return PASS if passed else CHECK_FAILED


def cmd_residual(args) -> int:
    """Scaled residual tails and recentered log-residual CDFs against their
    limits, plus the memoryless exact fixed point."""
    out = _outdir(args)
    model = gaussian_tail_model() if args.model == "gaussian" else exponential_tail_model()
    xs = _grid(args)
    xs_pos = xs[xs >= 0.0] if np.any(xs >= 0.0) else xs
    sups_scaled = {}
    sups_shifted = {}
    for r in args.r:
        if r <= 0.0:
            raise UsageError(f"thresholds must be positive, got {r}")
        scaled = np.asarray([scaled_residual(model, r, x) for x in xs_pos])
        scaled_limit = np.exp(-xs_pos)
        _write_curve(out / f"residual_scaled_{model.name}_r{r:g}", args.format, xs_pos, scaled, scaled_limit)
        sups_scaled[r] = float(np.max(np.abs(scaled - scaled_limit)))

        shifted = np.asarray([shifted_log_residual_cdf(model, r, x) for x in xs])
        gumbel = np.asarray([gumbel_cdf(x) for x in xs])
        _write_curve(out / f"residual_shifted_{model.name}_r{r:g}", args.format, xs, shifted, gumbel)
        sups_shifted[r] = float(np.max(np.abs(shifted - gumbel)))

    exp_model = exponential_tail_model()
    fixed_point_dev = max(
        abs(shifted_log_residual_cdf(exp_model, r, x) - gumbel_cdf(x))
        for r in (1.0, 5.0, 30.0)
        for x in np.linspace(-2.0, 6.0, 81)
    )
    fixed_point_ok = fixed_point_dev <= 1e-13

    ordered = sorted(args.r)
    decreasing = all(
        sups_shifted[b] < sups_shifted[a] for a, b in zip(ordered, ordered[1:])
    )
    passed = (
        decreasing
        and sups_shifted[ordered[-1]] <= args.tolerance
        and sups_scaled[ordered[-1]] <= args.tolerance
        and fixed_point_ok
    )
    report = {
        "config": _resolved_config(args),
        "scaled_sup_distance": {f"{r:g}": sups_scaled[r] for r in args.r},
        "shifted_cdf_sup_distance": {f"{r:g}": sups_shifted[r] for r in args.r},
        "strictly_decreasing_in_r": decreasing,
        "exponential_fixed_point_deviation": fixed_point_dev,
        "exponential_fixed_point_ok": fixed_point_ok,
        "tolerance_at_largest_r": args.tolerance,
        "pass": passed,
    }
    _write_json(out / "residual_report.json", report)
    _emit(report)
    return PASS if passed else CHECK_FAILED


def _identity_checks(inject_failure: bool):
    checks = []

    grid = np.linspace(-5.0, 10.0, 61)
    fd = max(
        abs(
            (gumbel_cdf(x + 1e-5) - gumbel_cdf(x - 1e-5)) / 2e-5 - gumbel_density(x)
        )
        for x in grid
    )
    checks.append(("gumbel-cdf-density-consistency", fd, 1e-8))

    ident = max(abs(gumbel_identity_residual(x)) for x in grid)
    if inject_failure:
        ident += 1e-6  # test hook: force a visible failure
    checks.append(("gumbel-log-identity", ident, 1e-12))

    rs = np.linspace(0.0, 8.0, 81)
    sym = max(abs(gaussian_tail(-r) + gaussian_tail(r) - 1.0) for r in rs)
    checks.append(("gaussian-tail-symmetry", sym, 1e-13))

    grid_t = np.linspace(-8.0, 37.5, 301)
    tails = [gaussian_tail(r) for r in grid_t]
    monotone = all(b < a for a, b in zip(tails, tails[1:]))
    checks.append(("gaussian-tail-strictly-decreasing", 0.0 if monotone else 1.0, 0.5))

    mills_ok = True
    for r in np.linspace(2.0, 30.0, 57):
        ratio = r * gaussian_tail(r) / gaussian_pdf(r)
        if not (1.0 - 1.0 / (r * r) < ratio < 1.0):
            mills_ok = False
    checks.append(("mills-two-sided-bound", 0.0 if mills_ok else 1.0, 0.5))

    ratio_far = gaussian_tail(20.0) / gaussian_tail_asymptotic(20.0)
    ratio_near = gaussian_tail(5.0) / gaussian_tail_asymptotic(5.0)
    improving = abs(ratio_far - 1.0) < abs(ratio_near - 1.0)
    checks.append(("tail-asymptotic-ratio-improves", 0.0 if improving else 1.0, 0.5))

    worst_norm = 0.0
    for r in (0.0, 1.0, 2.0, 5.0):
        total = integrate_adaptive_simpson(
            lambda x: log_residual_density(r, x), -15.0, 25.0 + r, tol=1e-10
        )
        worst_norm = max(worst_norm, abs(total - 1.0))
    checks.append(("conditional-density-normalization", worst_norm, 1e-8))

    exp_model = exponential_tail_model()
    fp = max(
        abs(shifted_log_residual_cdf(exp_model, r, x) - gumbel_cdf(x))
        for r in (1.0, 5.0, 30.0)
        for x in np.linspace(-2.0, 6.0, 81)
    )
    checks.append(("exponential-fixed-point", fp, 1e-13))

    g = gaussian_tail_model()
    alg = max(
        abs(shifted_log_residual_cdf(g, r, x) - scaled_residual(g, r, math.exp(-x)))
        for r in (5.0, 20.0)
        for x in np.linspace(-2.0, 6.0, 81)
    )
    checks.append(("shifted-cdf-equals-scaled-residual", alg, 1e-13))

    return checks


def cmd_identity_suite(args) -> int:
    """Deterministic identity and invariant checks, one pass/fail row each."""
    out = _outdir(args)
    rows = []
    all_ok = True
    for name, value, bound in _identity_checks(args.inject_failure):
        ok = value <= bound
        all_ok = all_ok and ok
        rows.append({"check": name, "value": value, "bound": bound, "pass": bool(ok)})
    report = {
        "config": _resolved_config(args),
        "checks": rows,
        "pass": bool(all_ok),
    }
    _write_json(out / "identity_report.json", report)
    width = max(len(r["check"]) for r in rows)
    for r in rows:
        status = "PASS" if r["pass"] else "FAIL"
        print(f"{r['check']:<{width}}  {status}  value={r['value']:.3e}  bound={r['bound']:.1e}")
    print(f"identity suite: {'PASS' if all_ok else 'FAIL'}")
    return PASS if all_ok else CHECK_FAILED


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="base RNG seed (env EXITGUMBEL_SEED overrides the default 42)")
    parser.add_argument("--output-dir", type=str, default="exitgumbel-out", help="directory for files")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="curve file format")


def _add_grid(parser: argparse.ArgumentParser, lo: float, hi: float, step: float) -> None:
    parser.add_argument("--grid-min", type=float, default=lo)
    parser.add_argument("--grid-max", type=float, default=hi)
    parser.add_argument("--grid-step", type=float, default=step)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exitgumbel",
        description="Gumbel limit laws for conditioned exit times, Gaussian extremes, and residual life times.",
    )
    parser.add_argument("--version", action="version", version=f"exitgumbel {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("exit-experiment", help="conditioned exit times vs the closed-form limit law")
    p.add_argument("--beta", type=float, default=1.0, help="drift slope")
    p.add_argument("--epsilon", type=float, default=0.01, help="noise amplitude")
    p.add_argument("--a", type=float, default=1.0, help="start offset in noise units (start at -epsilon*a)")
    p.add_argument("--n", type=int, default=10_000, help="conditioned samples to accept")
    p.add_argument("--step", type=float, default=1e-3, help="integration step")
    p.add_argument("--ks-threshold", type=float, default=0.03)
    p.add_argument("--budget", type=int, default=10**9, help="attempt cap for rejection sampling")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    _add_common(p)
    p.set_defaults(func=cmd_exit_experiment)

    p = sub.add_parser("density-convergence", help="recentered conditional density vs the Gumbel density")
    p.add_argument("--r", type=float, nargs="+", required=True, help="thresholds")
    p.add_argument("--tolerance", type=float, default=0.01, help="sup bound at the largest threshold")
    _add_grid(p, -1.0, 5.0, 1e-3)
    _add_common(p)
    p.set_defaults(func=cmd_density_convergence)

    p = sub.add_parser("evt", help="Gaussian max normalization: deterministic curves and Monte Carlo maxima")
    p.add_argument("--n", type=int, nargs="+", required=True, help="block sizes (each >= 3)")
    p.add_argument("--replicas", type=int, default=0, help="Monte Carlo replicas (0 = skip sampling)")
    p.add_argument("--mc-n", type=int, default=10_000, help="block size for the Monte Carlo cross-check")
    p.add_argument("--mc-ks-threshold", type=float, default=None)
    _add_grid(p, -2.0, 4.0, 0.05)
    _add_common(p)
    p.set_defaults(func=cmd_evt)

    p = sub.add_parser("residual", help="residual life scaling and its log transform")
    p.add_argument("--model", choices=("gaussian", "exponential"), default="gaussian")
    p.add_argument("--r", type=float, nargs="+", required=True, help="thresholds")
    p.add_argument("--tolerance", type=float, default=0.01)
    _add_grid(p, -2.0, 6.0, 0.05)
    _add_common(p)
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("identity-suite", help="deterministic identity and invariant checks")
    p.add_argument("--inject-failure", action="store_true", help="test hook: perturb one check to verify failure detection")
    _add_common(p)
    p.set_defaults(func=cmd_identity_suite)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else USAGE_ERROR
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.seed < 0:
            raise UsageError(f"seed must be >= 0, got {args.seed}")
        return args.func(args)
    except UsageError as exc:
        _emit({"error": {"type": "UsageError", "message": str(exc)}})
        return USAGE_ERROR
    except ValueError as exc:
        _emit({"error": {"type": "ValueError", "message": str(exc)}})
        return USAGE_ERROR
    except ExitGumbelError as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}})
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
