"""Command-line interface.

Subcommands:
  run      execute one experiment config (replicates + artifacts)
  sweep    execute the cartesian grid of the config's sweep axes
  kinetic  solve the mean-field kinetic equation for a kernel config
  fit      fit a distribution family to a histogram.csv artifact
  oracle   three-way small-system check (exact chain / formula / simulation)

Exit codes: 0 success; 1 invalid config (with field diagnostics); 2 a fit,
verdict, or assertion failed while --assert was on; 3 unwritable output
directory. Threads come from --threads only; nothing is read from the
environment.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import stats
from .engine import EngineUnavailableError, available_engines
from .experiment import (
    ConfigFileError,
    config_hash,
    histogram_from_csv,
    load_document,
    oracle_check,
    run_experiment,
    run_sweep,
    spec_from_document,
)
from .kinetic import (
    KineticError,
    KineticGrid,
    build_kernel,
    cross_validation_ks,
    detailed_balance_residual,
    discrete_exponential,
    kernel_symmetry_check,
    stationary_solve,
)

__all__ = ["main"]

KINETIC_SCHEMA = "kinex-kinetic/1"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSERT = 2
EXIT_OUTPUT = 3


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="output directory for artifacts")
    parser.add_argument(
        "--assert",
        dest="assert_mode",
        action="store_true",
        help="exit 2 when any declared assertion or verdict fails",
    )
    parser.add_argument(
        "--threads", type=int, default=1, help="concurrent replicates/points (default 1)"
    )
    parser.add_argument(
        "--engine",
        choices=["compiled", "python"],
        help="force a simulation engine (default: compiled when built)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinex",
        description="Monte Carlo and kinetic-equation toolkit for money exchange models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True, help="experiment JSON document")
    _common_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep config")
    p_sweep.add_argument("--config", required=True, help="experiment JSON with sweep_axes")
    _common_flags(p_sweep)

    p_kin = sub.add_parser("kinetic", help="solve the mean-field kinetic equation")
    p_kin.add_argument("--config", required=True, help="kinetic JSON document")
    _common_flags(p_kin)

    p_fit = sub.add_parser("fit", help="fit a family to a histogram.csv artifact")
    p_fit.add_argument("histogram", help="path to a histogram.csv file")
    p_fit.add_argument(
        "--family",
        choices=["exponential", "gamma", "both"],
        default="exponential",
    )
    p_fit.add_argument(
        "--shift", type=float, default=0.0, help="lower support bound of the family"
    )
    _common_flags(p_fit)

    p_oracle = sub.add_parser("oracle", help="small-system three-way agreement check")
    p_oracle.add_argument("--agents", type=int, required=True)
    p_oracle.add_argument("--money", type=int, required=True)
    p_oracle.add_argument("--seed", type=int, default=None)
    _common_flags(p_oracle)

    p_engines = sub.add_parser("engines", help="list available simulation engines")
    _common_flags(p_engines)

    return parser


def _emit(doc: dict, out_path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out_path is None:
        print(text)
    else:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")


def _cmd_run(args) -> int:
    doc = load_document(args.config)
    spec = spec_from_document(doc)
    results = run_experiment(
        spec, out_dir=args.out, threads=args.threads, engine=args.engine
    )
    if args.out is None and spec.output_dir is None:
        print(json.dumps(results, indent=2, sort_keys=True))
    else:
        print(f"results written to {args.out or spec.output_dir}")
        print(f"config hash {results['config_hash']}")
        for row in results["assertions"]:
            status = "pass" if row["passed"] else "FAIL"
            print(f"  assert {row['name']}: {status} (observed {row['observed']})")
    if args.assert_mode and not results["assertions_passed"]:
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_sweep(args) -> int:
    doc = load_document(args.config)
    if args.out is None:
        raise ConfigFileError("--out", "sweep requires an output directory")
    summary = run_sweep(doc, out_dir=args.out, threads=args.threads, engine=args.engine)
    print(f"swept {len(summary['points'])} points -> {args.out}")
    for row in summary["points"]:
        temp = row["temperature"]
        temp_text = "n/a" if temp is None else f"{temp:.6g}"
        print(f"  point {row['point']}: {row['parameters']} temperature {temp_text}")
    if args.assert_mode and not summary["assertions_passed"]:
        return EXIT_ASSERT
    return EXIT_OK


def _kinetic_spec(doc: dict):
    from .experiment import _need, _reject_unknown  # shared validators

    _reject_unknown(
        doc,
        {"schema", "grid", "kernel", "initial", "initial_mean", "tolerance", "max_steps", "assertions"},
        "",
    )
    schema = _need(doc, "schema", "", str)
    if schema != KINETIC_SCHEMA:
        raise ConfigFileError("schema", f"expected {KINETIC_SCHEMA!r}, got {schema!r}")
    grid_doc = _need(doc, "grid", "", dict)
    _reject_unknown(grid_doc, {"step", "points", "floor", "bounded_above"}, "grid")
    kernel_doc = _need(doc, "kernel", "", dict)
    kind = _need(kernel_doc, "kind", "kernel", str)
    param_field = {
        "fixed_amount": "amount",
        "uniform_fraction": "scale",
        "proportional": "fraction",
        "zero": None,
    }
    if kind not in param_field:
        raise ConfigFileError("kernel.kind", f"unknown kernel {kind!r}")
    allowed = {"kind"} | ({param_field[kind]} if param_field[kind] else set())
    _reject_unknown(kernel_doc, allowed, "kernel")
    recipe = (kind,)
    if param_field[kind]:
        recipe = (kind, float(_need(kernel_doc, param_field[kind], "kernel", (int, float))))
    mean = float(_need(doc, "initial_mean", "", (int, float)))
    assertions = doc.get("assertions", {})
    known = {
        "converged",
        "symmetric",
        "ks_to_exponential_max",
        "ks_to_exponential_min",
        "detailed_balance_max",
        "detailed_balance_min",
    }
    for key in assertions:
        if key not in known:
            raise ConfigFileError(f"assertions.{key}", "unknown kinetic assertion")
    initial = doc.get("initial", "delta")
    if initial not in ("delta", "exponential"):
        raise ConfigFileError("initial", "must be 'delta' or 'exponential'")
    try:
        step = float(_need(grid_doc, "step", "grid", (int, float)))
        points = int(_need(grid_doc, "points", "grid", int))
        floor = float(grid_doc.get("floor", 0.0))
        bounded = bool(grid_doc.get("bounded_above", False))
        grid = KineticGrid.delta_at(
            mean, step=step, points=points, floor=floor, bounded_above=bounded
        )
        if initial == "exponential":
            grid.prob = discrete_exponential(grid, mean)
        grid.kernel = build_kernel(grid, recipe)
    except (ValueError, KineticError) as exc:
        raise ConfigFileError("grid", str(exc)) from exc
    return (
        grid,
        float(doc.get("tolerance", 1e-10)),
        int(doc.get("max_steps", 100_000)),
        assertions,
    )


def _cmd_kinetic(args) -> int:
    doc = load_document(args.config)
    grid, tolerance, max_steps, assertions = _kinetic_spec(doc)
    digest = hashlib.sha256(
        json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    initial_mean = grid.mean()
    result = stationary_solve(grid, tolerance=tolerance, max_steps=max_steps)
    grid = result.grid
    db = detailed_balance_residual(grid)
    sym = kernel_symmetry_check(grid.kernel, step=grid.step, floor=grid.floor)
    reference = discrete_exponential(grid, initial_mean)
    ks_exp = float(np.max(np.abs(np.cumsum(grid.prob) - np.cumsum(reference))))

    checks = []
    for name, expected in sorted(assertions.items()):
        observed: object
        if name == "converged":
            observed, ok = result.converged, result.converged == expected
        elif name == "symmetric":
            observed, ok = sym.symmetric, sym.symmetric == expected
        elif name == "ks_to_exponential_max":
            observed, ok = ks_exp, ks_exp < expected
        elif name == "ks_to_exponential_min":
            observed, ok = ks_exp, ks_exp > expected
        elif name == "detailed_balance_max":
            observed, ok = db.residual, db.residual < expected
        else:
            observed, ok = db.residual, db.residual > expected
        checks.append(
            {"name": name, "expected": expected, "observed": observed, "passed": bool(ok)}
        )

    report = {
        "schema": KINETIC_SCHEMA.replace("kinetic", "kinetic-results"),
        "config_hash": digest,
        "converged": result.converged,
        "steps": result.steps,
        "residual": result.residual,
        "tolerance": result.tolerance,
        "leaked": result.leaked,
        "range_doublings": result.range_doublings,
        "grid_points": grid.points,
        "mean_initial": initial_mean,
        "mean_drift": result.mean_drift,
        "ks_to_same_mean_exponential": ks_exp,
        "detailed_balance": {
            "residual": db.residual,
            "entries_checked": db.entries_checked,
            "excluded_zero_probability": db.excluded_zero_probability,
        },
        "kernel_symmetry": {
            "symmetric": sym.symmetric,
            "max_asymmetry": sym.max_asymmetry,
            "witness": sym.witness,
            "witness_rates": sym.witness_rates,
        },
        "assertions": checks,
        "assertions_passed": all(c["passed"] for c in checks),
    }

    if args.out is not None:
        import os

        os.makedirs(args.out, exist_ok=True)
        values = grid.values()
        with open(os.path.join(args.out, "stationary.csv"), "w", encoding="utf-8") as handle:
            handle.write("# schema: kinex-stationary/1\n")
            handle.write(f"# config_hash: {digest}\n")
            handle.write("# units: value money, probability dimensionless\n")
            handle.write("value,probability\n")
            for k in range(grid.points):
                handle.write(f"{values[k]!r},{grid.prob[k]!r}\n")
        _emit(report, os.path.join(args.out, "kinetic_results.json"))
        print(f"results written to {args.out}")
    else:
        _emit(report, None)
    if args.assert_mode and not report["assertions_passed"]:
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_fit(args) -> int:
    hist = histogram_from_csv(args.histogram)
    report: dict = {"source": args.histogram, "support_shift": args.shift, "fits": {}}
    failed = False
    families = ["exponential", "gamma"] if args.family == "both" else [args.family]
    for family in families:
        fitter = stats.fit_exponential if family == "exponential" else stats.fit_gamma
        try:
            fit = fitter(hist, support_shift=args.shift)
            from dataclasses import asdict

            report["fits"][family] = {
                k: (v.item() if isinstance(v, np.generic) else v)
                for k, v in asdict(fit).items()
            }
        except stats.FitError as exc:
            report["fits"][family] = {"error": str(exc)}
            failed = True
    _emit(report, None if args.out is None else args.out)
    if args.assert_mode and failed:
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_oracle(args) -> int:
    try:
        report = oracle_check(args.agents, args.money, seed=args.seed)
    except ValueError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(report, None if args.out is None else args.out)
    if args.assert_mode and not report["passed"]:
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_engines(args) -> int:
    for name in available_engines():
        print(name)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "kinetic": _cmd_kinetic,
        "fit": _cmd_fit,
        "oracle": _cmd_oracle,
        "engines": _cmd_engines,
    }
    try:
        return handlers[args.command](args)
    except ConfigFileError as exc:
        print(f"config error at {exc.field}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineUnavailableError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except stats.FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
