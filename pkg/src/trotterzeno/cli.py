"""Command line: ``trotterzeno run | list-experiments | validate``.

Exit codes: 0 on success (fit failures are reported in the JSON summary),
2 on configuration errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import config as cfgmod
from .exceptions import ConfigError, DenseLimitError, NumericalError, TruncationError
from .experiments import run_experiment

log = logging.getLogger("trotterzeno")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row.get(c, "")) for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def versions() -> dict:
    return {
        "trotterzeno": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _load(args) -> dict:
    if bool(args.config) == bool(args.experiment):
        raise ConfigError("give exactly one of --config or --experiment")
    raw = cfgmod.load_yaml(args.config) if args.config else cfgmod.load_catalog(args.experiment)
    return cfgmod.resolve(raw, seed=getattr(args, "seed", None), oracle_tol=getattr(args, "oracle_tol", None))


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out_dir or cfg.get("output", {}).get("dir", "results"))
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %s (%s)", cfg["name"], cfg["kind"])
    result = run_experiment(cfg, threads=args.threads, timing=not args.no_timing)
    stem = out / cfg["name"]
    write_csv(stem.with_suffix(".csv"), result.columns, result.rows)
    summary = {"name": cfg["name"], "kind": cfg["kind"], "report": result.report, "config": cfg, "versions": versions()}
    with open(stem.with_suffix(".json"), "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(_summary_line(cfg, result.report))
    print(f"wrote {stem.with_suffix('.csv')} and {stem.with_suffix('.json')}")
    return 0


def _summary_line(cfg: dict, report: dict) -> str:
    parts = [f"{cfg['name']}:"]
    for name, fit in report.get("fits", {}).items():
        if "slope" in fit:
            parts.append(f"{name} slope {fit['slope']:.3f} (R^2 {fit['r_squared']:.4f})")
        else:
            parts.append(f"{name} fit unavailable ({fit['error']})")
    for check in report.get("checks", []):
        flags = [k for k in ("holds", "within_tolerance", "bound_holds", "stable_within_20pct") if k in check]
        parts.append(f"{check['type']} " + ", ".join(f"{k}={check[k]}" for k in flags))
    return " ".join(parts)


def cmd_list(args) -> int:
    for name in cfgmod.catalog_names():
        raw = cfgmod.load_catalog(name)
        print(f"{name:<22} {raw.get('kind', '?'):<17} {raw.get('description', '')}")
    return 0


def cmd_validate(args) -> int:
    if not args.config and not args.experiment:
        for name in cfgmod.catalog_names():
            cfgmod.resolve(cfgmod.load_catalog(name))
            print(f"{name}: ok")
        return 0
    cfg = _load(args)
    print(f"{cfg['name']}: ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trotterzeno", description="Product-formula convergence experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", help="path to a YAML experiment config")
    run.add_argument("--experiment", help="name of a built-in experiment")
    run.add_argument("--out-dir", help="output directory (default: the config's output.dir, else ./results)")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--oracle-tol", type=float)
    run.add_argument("--no-timing", action="store_true", help="write 0 for wall times so output is byte-reproducible")
    run.set_defaults(func=cmd_run)

    lst = sub.add_parser("list-experiments", help="list built-in experiments")
    lst.set_defaults(func=cmd_list)

    val = sub.add_parser("validate", help="validate a config (or the whole catalog)")
    val.add_argument("--config")
    val.add_argument("--experiment")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DenseLimitError, TruncationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {_failing_operation(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _failing_operation(exc: BaseException) -> str:
    """Innermost function of this package on the traceback."""
    where = "unknown"
    tb = exc.__traceback__
    package = str(Path(__file__).parent)
    while tb is not None:
        if tb.tb_frame.f_code.co_filename.startswith(package):
            where = tb.tb_frame.f_code.co_name
        tb = tb.tb_next
    return where


if __name__ == "__main__":
    sys.exit(main())
