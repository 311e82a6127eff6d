"""Command line front end.

Subcommands: binary-exact, mixture-mc, identity-check, rejection-demo,
fit-slope. Each writes CSV/JSON outputs under --out and prints a short
summary to stdout.

Exit codes: 0 success (and identity pass), 2 bad configuration, 3 a size cap
was hit, 4 a statistical guard tripped (underpowered run, identity failure).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

from ._version import __version__
from .errors import CapExceededError, IterationCapError, UnderpoweredRunError
from .experiments import (
    ExperimentConfig,
    SlopeFit,
    default_binary_config,
    default_identity_config,
    default_mixture_config,
    default_rejection_config,
    fit_slope,
    run_binary_exact,
    run_identity_check,
    run_mixture_mc,
    run_rejection_demo,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_GUARD = 4


def _fmt(value) -> str:
    # 17 significant digits: float64 round-trips exactly.
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return f"{float(value):.17g}"


def write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[name]) for name in fieldnames])


def _jsonable(obj):
    if isinstance(obj, SlopeFit):
        return dataclasses.asdict(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj


def write_manifest(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(cfg: ExperimentConfig, wall_time: float, extra: dict) -> dict:
    return {
        "version": __version__,
        "config": dataclasses.asdict(cfg),
        "seed": cfg.root_seed,
        "wall_time_seconds": wall_time,
        **extra,
    }


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats: {text!r}") from exc


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None, help="JSON config file; flags override it")
    sub.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
    sub.add_argument("--out", type=Path, default=None, help="output directory (default runs/<subcommand>)")
    sub.add_argument("--threads", type=int, default=None, help="worker threads for Monte Carlo reduction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posterior-debias",
        description="Bias-corrected posterior estimation experiments",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_bin = subs.add_parser(
        "binary-exact",
        help="exact bias/variance sweep for the two-atom posterior",
    )
    _add_common(p_bin)
    p_bin.add_argument("--n-grid", type=_int_list, default=None, help="comma-separated sample sizes")
    p_bin.add_argument("--k-values", type=_int_list, default=None, help="comma-separated correction orders")
    p_bin.add_argument("--q", type=float, default=None, help="prior mass on atom 1")
    p_bin.add_argument("--y-obs", type=float, default=None, help="observed value")
    p_bin.add_argument("--noise-var", type=float, default=None, help="observation noise variance")
    p_bin.add_argument("--drop-smallest", action="store_true", help="drop the smallest n from slope fits")

    p_mix = subs.add_parser(
        "mixture-mc",
        help="Monte Carlo bias/variance sweep for the Gaussian-mixture setting",
    )
    _add_common(p_mix)
    p_mix.add_argument("--n-grid", type=_int_list, default=None)
    p_mix.add_argument("--k-values", type=_int_list, default=None)
    p_mix.add_argument("--y-obs", type=float, default=None)
    p_mix.add_argument("--noise-var", type=float, default=None)
    p_mix.add_argument("--threshold", type=float, default=None, help="event is {x >= threshold}")
    p_mix.add_argument("--mix-weights", type=_float_list, default=None)
    p_mix.add_argument("--mix-means", type=_float_list, default=None)
    p_mix.add_argument("--mix-variances", type=_float_list, default=None)
    p_mix.add_argument(
        "--n-rule",
        choices=["n_pow3", "n_pow4", "fixed"],
        default=None,
        help="replicates per grid point; default n^3 for k=1, n^4 otherwise",
    )
    p_mix.add_argument("--n-fixed", type=int, default=None, help="replicates when --n-rule fixed")
    p_mix.add_argument("--mc-cap", type=int, default=None, help="hard cap on replicates per point")
    p_mix.add_argument("--inner-reps", type=int, default=None, help="chains per dataset")
    p_mix.add_argument("--drop-smallest", action="store_true")

    p_id = subs.add_parser(
        "identity-check",
        help="enumerate chains exhaustively and compare with the exact operator mean",
    )
    _add_common(p_id)
    p_id.add_argument("--n-grid", type=_int_list, default=None, help="sample sizes (keep small)")
    p_id.add_argument("--k-values", type=_int_list, default=None)
    p_id.add_argument("--m-values", type=_int_list, default=None, help="support sizes")
    p_id.add_argument(
        "--corrupt-weights",
        type=_float_list,
        default=None,
        help="override combination weights (negative control; fixes k to its length)",
    )

    p_rej = subs.add_parser(
        "rejection-demo",
        help="rejection-sample the clamped debiased posterior at one dataset",
    )
    _add_common(p_rej)
    p_rej.add_argument("--demo-n", type=int, default=None, help="sample size of the dataset")
    p_rej.add_argument("--demo-k", type=int, default=None, help="correction order")
    p_rej.add_argument("--demo-draws", type=int, default=None, help="accepted draws to collect")
    p_rej.add_argument("--q", type=float, default=None)
    p_rej.add_argument("--y-obs", type=float, default=None)
    p_rej.add_argument("--noise-var", type=float, default=None)

    p_fit = subs.add_parser(
        "fit-slope",
        help="fit log-log slope on columns of a results CSV",
    )
    _add_common(p_fit)  # --seed/--threads accepted for uniformity; the fit is deterministic
    p_fit.add_argument("csv", type=Path, help="CSV produced by binary-exact or mixture-mc")
    p_fit.add_argument("--x-col", default="n")
    p_fit.add_argument("--y-col", default="abs_bias")
    p_fit.add_argument(
        "--where",
        default=None,
        metavar="COL=VALUE",
        help="keep only rows with this exact column value, e.g. k=2",
    )
    p_fit.add_argument("--abs", action="store_true", help="take |y| before fitting")
    p_fit.add_argument("--drop-smallest", action="store_true")
    return parser


def _load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


_FLAG_FIELDS = {
    "n_grid",
    "k_values",
    "q",
    "y_obs",
    "noise_var",
    "threshold",
    "mix_weights",
    "mix_means",
    "mix_variances",
    "n_rule",
    "n_fixed",
    "mc_cap",
    "inner_reps",
    "m_values",
    "corrupt_weights",
    "demo_n",
    "demo_k",
    "demo_draws",
}


def _resolve_config(args: argparse.Namespace, factory) -> tuple[ExperimentConfig, Path]:
    """Defaults < config file < explicit flags."""
    overrides = _load_config_file(args.config)
    allowed = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"experiment"}
    unknown = set(overrides) - allowed - {"out"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    out_dir = overrides.pop("out", None)
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "drop_smallest", False):
        overrides["drop_smallest"] = True
    if args.seed is not None:
        overrides["root_seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    for key in ("n_grid", "k_values", "m_values", "mix_weights", "mix_means",
                "mix_variances", "corrupt_weights"):
        if key in overrides and overrides[key] is not None:
            overrides[key] = tuple(overrides[key])
    cfg = factory(**overrides)
    if args.out is not None:
        out = Path(args.out)
    elif out_dir is not None:
        out = Path(out_dir)
    else:
        out = Path("runs") / cfg.experiment
    return dataclasses.replace(cfg, out_dir=str(out)), out


def _cmd_binary_exact(args) -> int:
    cfg, out = _resolve_config(args, default_binary_config)
    start = time.perf_counter()
    rows, fits = run_binary_exact(cfg)
    wall = time.perf_counter() - start
    write_csv(out / "binary_exact.csv", ["n", "k", "abs_bias", "variance"], rows)
    write_manifest(out / "manifest.json", _manifest(cfg, wall, {"slope_fits": fits}))
    for k in cfg.k_values:
        bias_fit = fits[k]["abs_bias"]
        var_fit = fits[k]["variance"]
        bias_s = f"{bias_fit.slope:+.3f}" if bias_fit else "n/a"
        var_s = f"{var_fit.slope:+.3f}" if var_fit else "n/a"
        print(f"k={k}: |bias| slope {bias_s}, variance slope {var_s}")
    print(f"wrote {out / 'binary_exact.csv'} ({len(rows)} rows, {wall:.2f}s)")
    return EXIT_OK


def _cmd_mixture_mc(args) -> int:
    cfg, out = _resolve_config(args, default_mixture_config)
    start = time.perf_counter()
    rows, info = run_mixture_mc(cfg)
    wall = time.perf_counter() - start
    write_csv(
        out / "mixture_mc.csv",
        ["n", "k", "N", "inner_reps", "est_mean", "true_value", "est_bias",
         "est_variance", "std_error"],
        rows,
    )
    write_manifest(out / "manifest.json", _manifest(cfg, wall, info))
    for k in cfg.k_values:
        fit = info["fits"][k]
        print(
            f"k={k}: |bias| slope {fit['abs_bias'].slope:+.3f}, "
            f"variance slope {fit['est_variance'].slope:+.3f}"
        )
    if info["capped"]:
        capped = ", ".join(f"n={c['n']},k={c['k']}" for c in info["capped"])
        print(f"replicates capped at {cfg.mc_cap} for: {capped}")
    print(f"true value {info['true_value']:.12g}")
    print(f"wrote {out / 'mixture_mc.csv'} ({len(rows)} rows, {wall:.2f}s)")
    return EXIT_OK


def _cmd_identity_check(args) -> int:
    cfg, out = _resolve_config(args, default_identity_config)
    start = time.perf_counter()
    report = run_identity_check(cfg)
    wall = time.perf_counter() - start
    write_manifest(out / "identity_report.json", _manifest(cfg, wall, report))
    for case in report["cases"]:
        print(
            f"m={case['m']} n={case['n']} k={case['k']}: "
            f"discrepancy {case['discrepancy']:.3e}"
        )
    verdict = "PASS" if report["pass"] else "FAIL"
    print(
        f"identity check {verdict}: max discrepancy {report['max_discrepancy']:.3e} "
        f"(tolerance {report['tolerance']:.1e})"
    )
    return EXIT_OK if report["pass"] else EXIT_GUARD


def _cmd_rejection_demo(args) -> int:
    cfg, out = _resolve_config(args, default_rejection_config)
    start = time.perf_counter()
    report = run_rejection_demo(cfg)
    wall = time.perf_counter() - start
    write_manifest(out / "rejection_report.json", _manifest(cfg, wall, report))
    print(f"dataset counts {report['counts']} (n={report['n']}, k={report['k']})")
    print(f"plug-in proposal  {report['proposal']}")
    print(f"debiased target   {report['debiased_target']}")
    print(f"clamped target    {report['clamped_target']} (clamped mass {report['clamped_mass']:.3e})")
    print(
        f"ratio bound {report['ratio_bound']:.6f}, acceptance expected "
        f"{report['expected_acceptance_rate']:.4f} observed {report['observed_acceptance_rate']:.4f}"
    )
    print(f"empirical frequencies over {report['draws']} draws: {report['empirical_freq']}")
    return EXIT_OK


def _cmd_fit_slope(args) -> int:
    file_opts = _load_config_file(args.config)
    unknown = set(file_opts) - {"x_col", "y_col", "where", "abs", "drop_smallest"}
    if unknown:
        raise ValueError(f"unknown config keys for fit-slope: {sorted(unknown)}")
    x_col = args.x_col if args.x_col != "n" else file_opts.get("x_col", args.x_col)
    y_col = args.y_col if args.y_col != "abs_bias" else file_opts.get("y_col", args.y_col)
    where = args.where if args.where is not None else file_opts.get("where")
    take_abs = args.abs or bool(file_opts.get("abs", False))
    drop = args.drop_smallest or bool(file_opts.get("drop_smallest", False))
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{args.csv} has no data rows")
    if where:
        col, _, value = where.partition("=")
        if not value:
            raise ValueError("--where expects COL=VALUE")
        rows = [r for r in rows if col in r and float(r[col]) == float(value)]
        if not rows:
            raise ValueError(f"no rows match --where {where}")
    for col in (x_col, y_col):
        if col not in rows[0]:
            raise ValueError(f"column {col!r} not in {sorted(rows[0])}")
    xs = [float(r[x_col]) for r in rows]
    ys = [float(r[y_col]) for r in rows]
    if take_abs:
        ys = [abs(y) for y in ys]
    fit = fit_slope(xs, ys, drop_smallest=drop)
    payload = json.dumps(_jsonable(fit), indent=2, sort_keys=True)
    print(payload)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "slope_fit.json", "w") as fh:
            fh.write(payload + "\n")
    return EXIT_OK


_COMMANDS = {
    "binary-exact": _cmd_binary_exact,
    "mixture-mc": _cmd_mixture_mc,
    "identity-check": _cmd_identity_check,
    "rejection-demo": _cmd_rejection_demo,
    "fit-slope": _cmd_fit_slope,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapExceededError, IterationCapError) as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except UnderpoweredRunError as exc:
        print(f"underpowered run: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
