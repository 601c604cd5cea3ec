"""Command-line front end: ``switchdp train | simulate | sweep | oracle``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric or
training failure, 4 enumeration budget refused.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .control import ControllerConfig, UniformDisturbance, simulate, summarize, write_trace_csv
from .model import ArgumentError, SimulationError, SwitchDPError
from .oracle import DEFAULT_BUDGET, BudgetError, enumerate_optimal
from .training import TrainingError, train
from .valuestore import WeightFileError, load, save

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(payload: dict, path) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _vector(text: str):
    try:
        return [float(v) for v in str(text).split(",")]
    except ValueError:
        raise CommandError(f"cannot read state vector {text!r}", EXIT_CONFIG) from None


def _interval(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise CommandError(f"disturbance must look like LOW:HIGH, got {text!r}", EXIT_CONFIG) from None
    return lo, hi


def _experiment_from_weights(table):
    echo = table.metadata.get("config")
    if not isinstance(echo, dict):
        raise CommandError("weight file carries no config echo; train it with this tool", EXIT_CONFIG)
    exp = cfgmod.build(echo)
    if exp.cost.horizon != table.horizon:
        raise CommandError("weight horizon does not match its config echo", EXIT_CONFIG)
    return exp


def _controller(exp, args) -> ControllerConfig:
    threshold = exp.controller.threshold if args.threshold is None else args.threshold
    disturbance = exp.controller.disturbance
    if args.disturbance is not None:
        lo, hi = _interval(args.disturbance)
        disturbance = UniformDisturbance(lo, hi, args.disturbance_seed)
    return ControllerConfig(threshold=threshold, disturbance=disturbance)


def cmd_train(args) -> int:
    exp = cfgmod.build(cfgmod.read_document(args.config), seed=args.seed)
    started = time.perf_counter()
    table = train(exp.system, exp.cost, exp.basis, exp.training, metadata={"config": exp.document})
    wall = time.perf_counter() - started
    save(table, args.out)
    diag = table.diagnostics
    report = {
        "weights": str(args.out),
        "seed": exp.training.seed,
        "algorithm": exp.training.algorithm,
        "wall_time_seconds": wall,
        "config": exp.document,
    }
    if "max_residual" in diag:
        report["per_stage"] = [
            {"stage": k, "max_residual": diag["max_residual"][k].tolist(),
             "rms_residual": diag["rms_residual"][k].tolist(), "ridge": float(diag["ridge"][k])}
            for k in range(table.horizon + 1)]
    else:
        report["per_stage"] = [{"stage": k, "iterations": diag["iterations"][k].tolist()}
                               for k in range(table.horizon + 1)]
        report["non_converged"] = table.metadata.get("non_converged", [])
    _emit(report, args.report or Path(str(args.out) + ".report.json"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    table = load(args.weights)
    exp = _experiment_from_weights(table)
    ctrl = _controller(exp, args)
    trace = simulate(table, exp.cost, exp.system, _vector(args.x0), args.i_init, ctrl)
    if args.out:
        write_trace_csv(trace, args.out)
    _emit(summarize(trace, exp.tracked_axis, exp.target), args.summary)
    return EXIT_OK


def _axis_values(item):
    if isinstance(item, str):
        parts = item.split(":")
        if len(parts) != 3:
            raise CommandError(f"range {item!r} must look like START:STEP:STOP", EXIT_CONFIG)
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise CommandError(f"range {item!r} needs a positive step", EXIT_CONFIG)
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(count, 0))]
    if isinstance(item, list):
        return [float(v) for v in item]
    return [float(item)]


def sweep_points(spec: dict, state_dim: int, default_modes):
    """Expand ``[[segment]]`` tables into ``(x0, i_init)`` pairs.

    Each segment gives ``x0`` as one entry per state component: a number, a
    list of numbers, or a ``"START:STEP:STOP"`` range (inclusive). The grid is
    the Cartesian product of the components and of ``i_init``.
    """
    points = []
    for seg in spec.get("segment", []):
        axes = seg.get("x0")
        if not isinstance(axes, list) or len(axes) != state_dim:
            raise CommandError(f"each segment needs x0 with {state_dim} entries", EXIT_CONFIG)
        modes = seg.get("i_init", default_modes)
        modes = modes if isinstance(modes, list) else [modes]
        for combo in itertools.product(*(_axis_values(a) for a in axes)):
            for mode in modes:
                points.append((list(combo), int(mode)))
    return points


def cmd_sweep(args) -> int:
    table = load(args.weights)
    exp = _experiment_from_weights(table)
    spec = cfgmod.read_document(args.spec)
    default_modes = [args.i_init] if args.i_init is not None else list(range(1, exp.system.mode_count + 1))
    ctrl = _controller(exp, args)
    n = exp.system.state_dim
    header = [f"x0_{d}" for d in range(n)] + [
        "i_init", "total_cost", "switch_count", "terminal_tracking_error", "out_of_domain"]
    rows = []
    for x0, mode in sweep_points(spec, n, default_modes):
        outside = not bool(exp.system.in_domain(np.asarray(x0)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            trace = simulate(table, exp.cost, exp.system, x0, mode, ctrl)
        s = summarize(trace, exp.tracked_axis, exp.target)
        rows.append([repr(v) for v in x0] + [
            mode, repr(s["total_cost"]), s["switch_count"],
            repr(s["terminal_tracking_error"]) if "terminal_tracking_error" in s else "",
            int(outside)])
    with open(args.out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    sys.stdout.write(f"{len(rows)} rows written to {args.out}\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    exp = cfgmod.build(cfgmod.read_document(args.config))
    cost = exp.cost if args.horizon is None else exp.cost.with_horizon(args.horizon)
    x0 = _vector(args.x0)
    best, sequence = enumerate_optimal(exp.system, cost, x0, args.i_init, budget=args.budget)
    result = {"optimal_cost": best, "optimal_sequence": sequence, "horizon": cost.horizon}
    if args.weights:
        table = load(args.weights)
        if table.horizon != cost.horizon:
            raise CommandError(f"weights cover {table.horizon} stages, oracle uses {cost.horizon}",
                               EXIT_CONFIG)
        trace = simulate(table, cost, exp.system, x0, args.i_init, exp.controller)
        result.update(controller_cost=trace.total_cost, controller_sequence=trace.modes,
                      gap=trace.total_cost - best)
    _emit(result, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchdp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train value weights from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--seed", type=int, help="override [training] seed")
    p.add_argument("--report", help="training report path (default: OUT.report.json)")
    p.set_defaults(func=cmd_train)

    def control_flags(p):
        p.add_argument("--threshold", type=float, help="threshold-remedy switching rule")
        p.add_argument("--disturbance", help="uniform additive disturbance LOW:HIGH")
        p.add_argument("--disturbance-seed", type=int, default=0)

    p = sub.add_parser("simulate", help="closed-loop rollout with trained weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--x0", required=True, help="initial state, comma separated")
    p.add_argument("--i-init", type=int, required=True)
    p.add_argument("--out", help="trace CSV path")
    p.add_argument("--summary", help="summary JSON path (default: stdout)")
    control_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="closed-loop summary over a grid of initial conditions")
    p.add_argument("--weights", required=True)
    p.add_argument("--spec", required=True, help="TOML sweep specification")
    p.add_argument("--out", required=True)
    p.add_argument("--i-init", type=int, help="initial mode for segments that give none")
    control_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="exact optimum by exhaustive enumeration")
    p.add_argument("--config", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--i-init", type=int, required=True)
    p.add_argument("--horizon", type=int)
    p.add_argument("--weights", help="also run this controller and report the gap")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        code, message = exc.code, str(exc)
    except BudgetError as exc:
        code, message = EXIT_BUDGET, str(exc)
    except (TrainingError, SimulationError, FloatingPointError) as exc:
        code, message = EXIT_NUMERIC, str(exc)
    except (cfgmod.ConfigError, WeightFileError, ArgumentError, OSError) as exc:
        code, message = EXIT_CONFIG, str(exc)
    except SwitchDPError as exc:
        code, message = EXIT_NUMERIC, str(exc)
    sys.stderr.write(f"switchdp {args.command}: {message}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
