"""Command-line entry point.

    thermoflow run CONFIG [--out DIR] [--steps N] [--seed-check] [--threads N]
    thermoflow validate CONFIG
    thermoflow reference NAME | --list

Exit codes: 0 success, 1 a declared tolerance failed or the run went
unstable, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from thermoflow import io as tio
from thermoflow.cases import CaseError, derive_parameters, run_case
from thermoflow.config import ConfigError, parse_config, reference_config, reference_names


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermoflow",
                                     description="thermal-flow benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a case and write its outputs")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory override")
    run.add_argument("--steps", type=int, default=None, help="step-count override")
    run.add_argument("--seed-check", action="store_true",
                     help="run twice and verify byte-identical series output")
    run.add_argument("--threads", type=int, default=None,
                     help="worker-count hint forwarded to the solvers; results "
                          "are independent of it by contract")

    val = sub.add_parser("validate", help="parse and echo a configuration")
    val.add_argument("config")

    ref = sub.add_parser("reference", help="emit a built-in benchmark configuration")
    ref.add_argument("name", nargs="?")
    ref.add_argument("--list", action="store_true", dest="list_names")
    return parser


def _cmd_reference(args) -> int:
    if args.list_names or args.name is None:
        for name in reference_names():
            print(name)
        return 0
    try:
        sys.stdout.write(reference_config(args.name))
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    return 0


def _cmd_validate(args) -> int:
    try:
        cfg, _ = parse_config(args.config)
        derived = derive_parameters(cfg)
    except (ConfigError, CaseError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    print(f"ok: case={cfg.case} scheme={cfg.scheme} grid={cfg.nx}x{cfg.ny} "
          f"steps={cfg.steps}")
    for key, value in sorted(derived.echo.items()):
        print(f"  {key} = {value!r}")
    return 0


def _cmd_run(args) -> int:
    try:
        cfg, text = parse_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.steps is not None:
        cfg.steps = args.steps
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out_dir = args.out
    out_dir = Path(cfg.out_dir) if cfg.out_dir else Path(".")

    try:
        derived = derive_parameters(cfg)
    except (CaseError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    started = time.time()
    result = run_case(cfg, derived)
    elapsed = time.time() - started

    series_name = cfg.series_path or "series.csv"
    series_path = out_dir / series_name
    tio.write_series(result.series, series_path)

    seed_check = None
    if args.seed_check:
        repeat = run_case(cfg, derived)
        seed_check = tio.series_text(repeat.series) == tio.series_text(result.series)

    if cfg.snapshot_path and result.final_macro:
        tio.write_snapshot(result.final_macro, out_dir / cfg.snapshot_path,
                           title=f"{cfg.case} {cfg.scheme} final")
    for i, (t, macro) in enumerate(result.snapshots):
        stem = Path(cfg.snapshot_path or "snapshot.vtk")
        tio.write_snapshot(macro, out_dir / f"{stem.stem}_{i:04d}{stem.suffix}",
                           title=f"{cfg.case} {cfg.scheme} t={t}")

    checks = {ch: {"passed": ok, "value": val}
              for ch, (ok, val) in result.expectation_results.items()}
    all_ok = result.status == "ok" and all(c["passed"] for c in checks.values())
    manifest = {
        "config_digest": tio.config_digest(text),
        "case": cfg.case,
        "scheme": cfg.scheme,
        "grid": [cfg.nx, cfg.ny],
        "threads": cfg.threads,
        "derived": {k: _plain(v) for k, v in derived.echo.items()},
        "summary": {k: _plain(v) for k, v in result.summary.items()},
        "expectations": checks,
        "status": result.status,
        "failure_step": result.failure_step,
        "steps_run": result.steps_run,
        "steady": result.steady,
        "seed_check": seed_check,
        "wall_clock_s": round(elapsed, 3),
        "passed": bool(all_ok and (seed_check is not False)),
    }
    tio.write_manifest(out_dir / "manifest.json", manifest)

    for ch, info in sorted(checks.items()):
        print(f"{'PASS' if info['passed'] else 'FAIL'} {ch} = {info['value']}")
    if result.status != "ok":
        print(f"run unstable at step {result.failure_step}", file=sys.stderr)
    if seed_check is not None:
        print(f"seed-check: {'byte-identical' if seed_check else 'MISMATCH'}")
    print(f"done: {result.steps_run} steps in {elapsed:.1f}s, "
          f"series -> {series_path}")
    return 0 if manifest["passed"] else 1


def _plain(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return value


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_reference(args)


if __name__ == "__main__":
    sys.exit(main())
