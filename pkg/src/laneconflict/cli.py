"""Command-line frontend: conflict tables, curves, grids, and simulations.

Every command snapshots its resolved configuration and seeds into a manifest
written next to the primary output, so any run can be reproduced from the
manifest alone.  Randomized commands require an explicit --seed; there is no
wall-clock seeding.  Exit codes: 0 success, 2 input error, 3 runtime/solver
failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .aoc import (
    aoc_analytical,
    aoc_curve,
    aoc_monte_carlo,
    gaps,
    write_curve_csv,
)
from .game import ModelKind, RewardMatrix, SocialModel, lane_change_matrix, load_matrix
from .planner import PlannerConfig
from .sim import (
    ScenarioConfig,
    conflict_grid,
    count_conflicts,
    run_experiment,
    run_sweep,
    write_trace_csv,
)
from .vehicle import ManeuverOffset, VehicleParams

KIND_ALIASES = {
    "baseline": ModelKind.BASELINE,
    "base": ModelKind.BASELINE,
    "pure_altruism": ModelKind.PURE_ALTRUISM,
    "pure": ModelKind.PURE_ALTRUISM,
    "altruism": ModelKind.ALTRUISM,
    "alt": ModelKind.ALTRUISM,
    "augmented_altruism": ModelKind.AUGMENTED_ALTRUISM,
    "augmented": ModelKind.AUGMENTED_ALTRUISM,
    "aug": ModelKind.AUGMENTED_ALTRUISM,
    "svo": ModelKind.SVO,
}

TABLE_KINDS = [
    ModelKind.BASELINE,
    ModelKind.PURE_ALTRUISM,
    ModelKind.SVO,
    ModelKind.ALTRUISM,
    ModelKind.AUGMENTED_ALTRUISM,
]

CURVE_KINDS = [ModelKind.ALTRUISM, ModelKind.SVO, ModelKind.AUGMENTED_ALTRUISM]


class InputError(ValueError):
    pass


def parse_kind(name: str) -> ModelKind:
    try:
        return KIND_ALIASES[name.strip().lower()]
    except KeyError:
        raise InputError(
            f"unknown model kind {name!r}; choose from "
            f"{sorted(set(KIND_ALIASES))}"
        ) from None


def parse_coeffs(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise InputError(f"bad coefficient list {text!r}: {exc}") from None


def read_matrix(path: str) -> RewardMatrix:
    if path == "default":
        return lane_change_matrix()
    p = Path(path)
    if not p.exists():
        raise InputError(f"matrix file not found: {path}")
    try:
        return load_matrix(json.loads(p.read_text()))
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"invalid matrix document {path}: {exc}") from None


def _scenario_from_config(doc: dict) -> ScenarioConfig:
    sc_kwargs = dict(doc.get("scenario", {}))
    planner_kwargs = dict(doc.get("planner", {}))
    penalty = planner_kwargs.pop("penalty", {})
    for key, attr in (
        ("initial", "penalty_initial"),
        ("growth", "penalty_growth"),
        ("rounds", "penalty_rounds"),
    ):
        if key in penalty:
            planner_kwargs[attr] = penalty[key]
    for key in ("weights", "accel_bounds", "steer_bounds", "x_bounds",
                "v_bounds", "theta_bounds", "ellipse"):
        if key in planner_kwargs:
            planner_kwargs[key] = tuple(planner_kwargs[key])
    for key in ("row_maneuvers", "col_maneuvers"):
        if key in sc_kwargs:
            sc_kwargs[key] = tuple(ManeuverOffset(*pair) for pair in sc_kwargs[key])
    if "matrix" in sc_kwargs:
        sc_kwargs["matrix"] = load_matrix(sc_kwargs["matrix"])
    if "vehicle" in sc_kwargs:
        sc_kwargs["vehicle"] = VehicleParams(**sc_kwargs["vehicle"])
    planner = PlannerConfig(**planner_kwargs) if planner_kwargs else None
    if planner is not None:
        sc_kwargs["planner"] = planner
    try:
        return ScenarioConfig(**sc_kwargs)
    except TypeError as exc:
        raise InputError(f"bad config: {exc}") from None


def load_scenario(args) -> ScenarioConfig:
    doc = {}
    if getattr(args, "config", None):
        p = Path(args.config)
        if not p.exists():
            raise InputError(f"config file not found: {args.config}")
        doc = json.loads(p.read_text())
    sc = _scenario_from_config(doc)
    if getattr(args, "matrix", None):
        sc = dataclasses.replace(sc, matrix=read_matrix(args.matrix))
    return sc


def write_manifest(out_path: Path, command: str, arguments: dict, seeds) -> str:
    manifest_path = Path(str(out_path) + ".manifest.json")
    payload = {
        "command": command,
        "version": __version__,
        "arguments": arguments,
        "seeds": seeds,
        "outputs": [out_path.name],
    }
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return manifest_path.name


def cmd_aoc_table(args) -> int:
    m = read_matrix(args.matrix)
    g = gaps(m)
    out = Path(args.out)
    manifest = write_manifest(
        out, "aoc-table", {"matrix": args.matrix, "gaps": [g.row_gap, g.col_gap]}, []
    )
    with open(out, "w", newline="") as fh:
        fh.write(f"# manifest: {manifest}\n")
        fh.write("model,aoc\n")
        for kind in TABLE_KINDS:
            value = aoc_analytical(kind, g).value
            fh.write(f"{kind.value},{format(value, '.9g')}\n")
            print(f"{kind.value}: {value:.6f}")
    return 0


def cmd_aoc_mc(args) -> int:
    m = read_matrix(args.matrix)
    kind = parse_kind(args.model)
    est = aoc_monte_carlo(kind, m, args.n, args.seed, jobs=args.jobs)
    out = Path(args.out)
    manifest = write_manifest(
        out,
        "aoc-mc",
        {"matrix": args.matrix, "model": kind.value, "n": args.n, "jobs": args.jobs},
        [args.seed],
    )
    payload = {
        "manifest": manifest,
        "model": kind.value,
        "n": args.n,
        "seed": args.seed,
        "estimate": est.estimate,
        "standard_error": est.standard_error,
    }
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"{kind.value}: {est.estimate:.6f} +- {est.standard_error:.6f}")
    return 0


def cmd_curve(args) -> int:
    if args.steps < 1 or args.a_min <= 0 or args.a_max < args.a_min or args.B <= 0:
        raise InputError("need positive gaps, a_max >= a_min and steps >= 1")
    kinds = (
        [parse_kind(k) for k in args.models.split(",")] if args.models else CURVE_KINDS
    )
    if args.steps == 1:
        a_values = [args.a_min]
    else:
        step_size = (args.a_max - args.a_min) / (args.steps - 1)
        a_values = [args.a_min + i * step_size for i in range(args.steps)]
    rows = aoc_curve(kinds, a_values, args.B)
    out = Path(args.out)
    manifest = write_manifest(
        out,
        "curve",
        {
            "B": args.B,
            "a_min": args.a_min,
            "a_max": args.a_max,
            "steps": args.steps,
            "models": [k.value for k in kinds],
        },
        [],
    )
    write_curve_csv(rows, out, manifest)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_conflict_grid(args) -> int:
    m = read_matrix(args.matrix)
    kind = parse_kind(args.model)
    coeffs = parse_coeffs(args.coeffs)
    grid = conflict_grid(kind, coeffs, m)
    n_conflict, n_clear = count_conflicts(grid)
    out = Path(args.out)
    manifest = write_manifest(
        out,
        "conflict-grid",
        {"matrix": args.matrix, "model": kind.value, "coeffs": coeffs},
        [],
    )
    payload = {
        "manifest": manifest,
        "model": kind.value,
        "coeffs": coeffs,
        "conflict": [[o.conflict for o in row] for row in grid],
        "category": [[o.category.value for o in row] for row in grid],
        "counts": {"conflict": n_conflict, "clear": n_clear},
    }
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"{kind.value}: {n_conflict} conflict / {n_clear} non-conflict cells")
    return 0


def _model_from_args(kind: ModelKind, coeffs: list[float]) -> SocialModel:
    if kind is ModelKind.BASELINE:
        return SocialModel.baseline()
    if len(coeffs) == 1:
        coeffs = coeffs * 2
    if len(coeffs) != 2:
        raise InputError("--coeffs must hold one or two values")
    return SocialModel.of_kind(kind, coeffs[0], coeffs[1])


def cmd_simulate(args) -> int:
    sc = load_scenario(args)
    kind = parse_kind(args.model)
    model = _model_from_args(kind, parse_coeffs(args.coeffs) if args.coeffs else [])
    trace: list = []
    record = run_experiment(model, sc, args.seed, trace=trace)
    out = Path(args.out)
    manifest = write_manifest(
        out,
        "simulate",
        {"model": kind.value, "coeffs": [model.c1, model.c2]},
        [args.seed],
    )
    payload = {"manifest": manifest, **record.to_dict()}
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.trace:
        write_trace_csv(trace, args.trace, manifest)
    status = "timeout" if record.timeout else f"R={record.signed_time:.3f}"
    print(
        f"{kind.value} ({model.c1:.3g},{model.c2:.3g}) seed={args.seed}: "
        f"{record.category.value}, {status}"
    )
    return 0


def cmd_sweep(args) -> int:
    sc = load_scenario(args)
    kind = parse_kind(args.model)
    coeffs = parse_coeffs(args.coeffs)
    grid = run_sweep(kind, coeffs, args.reps, sc, args.seed, jobs=args.jobs)
    out = Path(args.out)
    manifest = write_manifest(
        out,
        "sweep",
        {"model": kind.value, "coeffs": coeffs, "reps": args.reps, "jobs": args.jobs},
        [args.seed],
    )
    payload = {"manifest": manifest, **grid.to_dict()}
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    incomplete = sum(
        args.reps - c for row in grid.completed for c in row
    )
    failures = sum(f for row in grid.failed for f in row)
    print(
        f"{kind.value} sweep {len(coeffs)}x{len(coeffs)}, reps={args.reps}: "
        f"{incomplete} episode(s) timed out, {failures} cell(s) failed"
    )
    if failures:
        print("partial output: some cells aborted", file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laneconflict",
        description="Conflict analysis and lane-change simulation for "
        "altruism-weighted driving games",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aoc-table", help="closed-form conflict areas per model")
    p.add_argument("--matrix", required=True, help="matrix JSON path or 'default'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aoc_table)

    p = sub.add_parser("aoc-mc", help="Monte Carlo conflict-area estimate")
    p.add_argument("--matrix", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=10**5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aoc_mc)

    p = sub.add_parser("curve", help="conflict area versus the row gap")
    p.add_argument("--B", type=float, required=True, help="column gap")
    p.add_argument("--a-min", type=float, required=True)
    p.add_argument("--a-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--models", default=None, help="comma-separated kinds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("conflict-grid", help="decision outcomes on a coefficient grid")
    p.add_argument("--model", required=True)
    p.add_argument("--coeffs", required=True, help="comma-separated values")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_conflict_grid)

    p = sub.add_parser("simulate", help="run one seeded episode")
    p.add_argument("--model", required=True)
    p.add_argument("--coeffs", default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--matrix", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--trace", default=None, help="write per-step CSV here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of seeded episodes")
    p.add_argument("--model", required=True)
    p.add_argument("--coeffs", required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--matrix", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
