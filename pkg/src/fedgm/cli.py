"""Command line experiment driver.

Four subcommands cover the full workflow: ``gm-solve`` runs the smoothed
Weiszfeld solver on a CSV point set, ``simulate`` runs a seeded federated
experiment from a JSON config, ``sweep`` crosses one axis (corruption
level or aggregator) with the config's seeds, and ``report`` summarizes a
directory of trace CSVs.

Exit codes are stable: 0 success, 1 usage or validation failure, 2 budget
exhausted without meeting the relative-improvement tolerance. Outputs
contain no timing information, so identical configs give byte-identical
files.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import statistics
import sys

import numpy as np

from .corruption import CORRUPTION_KINDS, CorruptionSpec
from .fl_core import (
    AGGREGATOR_KINDS,
    TRACE_CSV_COLUMNS,
    AggregatorSpec,
    LocalSGD,
    LrSchedule,
    RoundConfig,
    RoundTrace,
    run_federated,
    trace_diverged,
)
from .geomed import WeightedPointSet, brute_force_gm, gm_objective, smoothed_weiszfeld
from .secure_avg import SecureAverageOracle
from .tasks import generate_ls_task

SUMMARY_SCHEMA_VERSION = 1

SWEEP_CSV_COLUMNS = ("axis", "value", "seed", "final_train_loss", "final_test_loss", "diverged")

# Learning-rate and local-pass defaults were tuned once on the uncorrupted
# synthetic least-squares task and are frozen across corruption settings.
DEFAULT_CONFIG: dict = {
    "task": {
        "d": 10,
        "devices": 100,
        "samples_per_device": 50,
        "noise_std": 0.1,
        "feature_bound": 1.0,
        "test_samples": 1000,
    },
    "corruption": {
        "kind": "none",
        "rho": 0.0,
    },
    "algorithm": {
        "aggregator": "mean",
        "budget": 3,
        "nu": 1e-6,
        "rel_tol": 1e-6,
        "groups": 1,
        "batch_size": 10,
        "epochs": 3,
        "gamma0": 18.0,
        "decay": 0.5,
        "decay_every": 50,
    },
    "run": {
        "rounds": 100,
        "seeds": [0, 1, 2, 3, 4],
        "outdir": "runs",
        "devices_per_round": 10,
        "oracle_mode": "plain",
        "halt_on_divergence": True,
    },
}


class UsageError(Exception):
    """Raised for anything that should terminate with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D102 (argparse override)
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def merge_config(user: dict) -> dict:
    """Overlay a user config onto the defaults, rejecting unknown keys."""
    if not isinstance(user, dict):
        raise UsageError("config root must be a JSON object")
    merged = copy.deepcopy(DEFAULT_CONFIG)
    for block, entries in user.items():
        if block not in merged:
            raise UsageError(f"unknown config block {block!r}")
        if not isinstance(entries, dict):
            raise UsageError(f"config block {block!r} must be an object")
        for key, value in entries.items():
            if key not in merged[block]:
                raise UsageError(f"unknown config key {block}.{key}")
            merged[block][key] = value
    return merged


def validate_config(config: dict) -> dict:
    """Range-check a merged config, returning it unchanged on success."""
    task, corr, algo, run = (
        config["task"],
        config["corruption"],
        config["algorithm"],
        config["run"],
    )
    try:
        for key in ("d", "devices", "samples_per_device", "test_samples"):
            if int(task[key]) != task[key] or task[key] < 1:
                raise ValueError(f"task.{key} must be a positive integer")
            task[key] = int(task[key])
        if task["noise_std"] < 0 or task["feature_bound"] <= 0:
            raise ValueError("task.noise_std must be >= 0 and task.feature_bound > 0")
        if corr["kind"] not in CORRUPTION_KINDS:
            raise ValueError(f"corruption.kind must be one of {CORRUPTION_KINDS}")
        if not 0.0 <= float(corr["rho"]) < 1.0:
            raise ValueError("corruption.rho must lie in [0, 1)")
        if corr["kind"] == "none" and corr["rho"] > 0.0:
            raise ValueError("corruption.rho > 0 needs an attack kind")
        if algo["aggregator"] not in AGGREGATOR_KINDS:
            raise ValueError(f"algorithm.aggregator must be one of {AGGREGATOR_KINDS}")
        # Construction performs the remaining numeric checks.
        AggregatorSpec(
            kind=algo["aggregator"],
            nu=float(algo["nu"]),
            budget=int(algo["budget"]),
            rel_tol=float(algo["rel_tol"]),
            groups=int(algo["groups"]),
        )
        LocalSGD(batch_size=int(algo["batch_size"]), epochs=int(algo["epochs"]))
        LrSchedule(
            gamma0=float(algo["gamma0"]),
            decay=float(algo["decay"]),
            decay_every=int(algo["decay_every"]),
        )
        if int(run["rounds"]) != run["rounds"] or run["rounds"] < 0:
            raise ValueError("run.rounds must be a nonnegative integer")
        run["rounds"] = int(run["rounds"])
        seeds = run["seeds"]
        if (
            not isinstance(seeds, list)
            or not seeds
            or any(int(s) != s for s in seeds)
        ):
            raise ValueError("run.seeds must be a nonempty list of integers")
        run["seeds"] = [int(s) for s in seeds]
        if int(run["devices_per_round"]) != run["devices_per_round"]:
            raise ValueError("run.devices_per_round must be an integer")
        run["devices_per_round"] = int(run["devices_per_round"])
        if not 1 <= run["devices_per_round"] <= task["devices"]:
            raise ValueError("run.devices_per_round must lie in [1, task.devices]")
        if run["oracle_mode"] not in ("plain", "masked"):
            raise ValueError("run.oracle_mode must be 'plain' or 'masked'")
        if not isinstance(run["halt_on_divergence"], bool):
            raise ValueError("run.halt_on_divergence must be a boolean")
        if int(algo["batch_size"]) > int(task["samples_per_device"]):
            raise ValueError("algorithm.batch_size exceeds samples_per_device")
    except (TypeError, KeyError) as exc:
        raise UsageError(f"malformed config value: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return config


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    return validate_config(merge_config(user))


def _round_config(config: dict) -> RoundConfig:
    algo, run = config["algorithm"], config["run"]
    return RoundConfig(
        devices_per_round=run["devices_per_round"],
        local=LocalSGD(batch_size=algo["batch_size"], epochs=algo["epochs"]),
        lr=LrSchedule(algo["gamma0"], algo["decay"], algo["decay_every"]),
        aggregator=AggregatorSpec(
            kind=algo["aggregator"],
            nu=algo["nu"],
            budget=algo["budget"],
            rel_tol=algo["rel_tol"],
            groups=algo["groups"],
        ),
        halt_on_divergence=run["halt_on_divergence"],
    )


def run_one_seed(config: dict, seed: int) -> tuple[list[RoundTrace], SecureAverageOracle]:
    """Run one seeded federated experiment described by a validated config."""
    t = config["task"]
    task, partition = generate_ls_task(
        d=t["d"],
        devices=t["devices"],
        samples_per_device=t["samples_per_device"],
        noise_std=t["noise_std"],
        feature_bound=t["feature_bound"],
        seed=seed,
        test_samples=t["test_samples"],
    )
    corruption = CorruptionSpec(
        kind=config["corruption"]["kind"],
        rho=float(config["corruption"]["rho"]),
        seed=seed,
    )
    oracle = SecureAverageOracle(config["run"]["oracle_mode"], seed=seed)
    traces = run_federated(
        task,
        partition,
        corruption,
        _round_config(config),
        rounds=config["run"]["rounds"],
        seed=seed,
        oracle=oracle,
    )
    return traces, oracle


def write_trace_csv(path: str, traces: list[RoundTrace]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_CSV_COLUMNS)
        for trace in traces:
            writer.writerow(trace.csv_row())


def _seed_summary(seed: int, traces: list[RoundTrace]) -> dict:
    last = traces[-1] if traces else None
    return {
        "seed": seed,
        "rounds_completed": len(traces),
        "final_train_loss": last.train_loss if last else None,
        "final_test_loss": last.test_loss if last else None,
        "final_dist_to_opt_sq": last.dist_to_opt_sq if last else None,
        "oracle_calls_total": sum(t.oracle_calls for t in traces),
        "diverged": trace_diverged(traces),
    }


def _aggregate(per_seed: list[dict], key: str) -> dict | None:
    values = [row[key] for row in per_seed if row[key] is not None]
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return None
    return {
        "min": min(finite),
        "max": max(finite),
        "mean": sum(finite) / len(finite),
    }


def write_summary_json(path: str, config: dict, per_seed: list[dict]) -> None:
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "config": config,
        "per_seed": per_seed,
        "aggregate": {
            "final_train_loss": _aggregate(per_seed, "final_train_loss"),
            "final_test_loss": _aggregate(per_seed, "final_test_loss"),
        },
        "diverged_seeds": sum(row["diverged"] for row in per_seed),
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    validate_config(config)
    outdir = config["run"]["outdir"]
    os.makedirs(outdir, exist_ok=True)
    per_seed = []
    for seed in config["run"]["seeds"]:
        traces, _ = run_one_seed(config, seed)
        write_trace_csv(os.path.join(outdir, f"{seed}.csv"), traces)
        per_seed.append(_seed_summary(seed, traces))
    write_summary_json(os.path.join(outdir, "summary.json"), config, per_seed)
    print(f"wrote {len(per_seed)} trace file(s) and summary.json to {outdir}")
    return 0


def _apply_overrides(config: dict, args: argparse.Namespace) -> None:
    if getattr(args, "rho", None) is not None:
        config["corruption"]["rho"] = args.rho
    if getattr(args, "corruption", None) is not None:
        config["corruption"]["kind"] = args.corruption
    if getattr(args, "aggregator", None) is not None:
        config["algorithm"]["aggregator"] = args.aggregator
    if getattr(args, "rounds", None) is not None:
        config["run"]["rounds"] = args.rounds
    if getattr(args, "seeds", None) is not None:
        try:
            config["run"]["seeds"] = [int(s) for s in args.seeds.split(",") if s]
        except ValueError as exc:
            raise UsageError(f"--seeds must be comma-separated integers: {exc}") from exc
    if getattr(args, "outdir", None) is not None:
        config["run"]["outdir"] = args.outdir


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    validate_config(config)
    raw_values = [v for v in args.values.split(",") if v]
    if not raw_values:
        raise UsageError("sweep needs at least one --values entry")
    outdir = config["run"]["outdir"]
    os.makedirs(outdir, exist_ok=True)
    rows = []
    for raw in raw_values:
        point = copy.deepcopy(config)
        if args.axis == "rho":
            try:
                value = float(raw)
            except ValueError as exc:
                raise UsageError(f"bad rho value {raw!r}") from exc
            point["corruption"]["rho"] = value
        else:
            point["algorithm"]["aggregator"] = raw
        validate_config(point)
        for seed in point["run"]["seeds"]:
            traces, _ = run_one_seed(point, seed)
            last = traces[-1] if traces else None
            rows.append(
                [
                    args.axis,
                    raw,
                    seed,
                    last.train_loss if last else "",
                    last.test_loss if last else "",
                    trace_diverged(traces),
                ]
            )
    path = os.path.join(outdir, "sweep.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_COLUMNS)
        writer.writerows(rows)
    print(f"wrote {len(rows)} sweep row(s) to {path}")
    return 0


def _read_trace_csv(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_CSV_COLUMNS:
            raise UsageError(f"{path}: unexpected columns {reader.fieldnames}")
        return list(reader)


def cmd_report(args: argparse.Namespace) -> int:
    groups: dict[str, list[str]] = {}
    for dirpath, _, filenames in sorted(os.walk(args.rundir)):
        traces = sorted(
            f for f in filenames if f.endswith(".csv") and f[: -len(".csv")].isdigit()
        )
        if traces:
            groups[dirpath] = [os.path.join(dirpath, f) for f in traces]
    if not groups:
        print("no runs found")
        return 1
    header = f"{'run':<40} {'seeds':>5} {'median_final_loss':>18} {'median_calls':>13} {'diverged':>9}"
    print(header)
    print("-" * len(header))
    for dirpath, files in groups.items():
        finals, call_totals, diverged = [], [], 0
        for path in files:
            rows = _read_trace_csv(path)
            call_totals.append(sum(int(r["oracle_calls"]) for r in rows))
            if rows:
                last = float(rows[-1]["train_loss"])
                finals.append(last)
                if not math.isfinite(last) or last > 1e12:
                    diverged += 1
        label = os.path.relpath(dirpath, args.rundir)
        final_txt = f"{statistics.median(finals):.6g}" if finals else "-"
        calls_txt = f"{statistics.median(call_totals):g}"
        print(f"{label:<40} {len(files):>5} {final_txt:>18} {calls_txt:>13} {diverged:>9}")
    return 0


def read_point_csv(path: str) -> WeightedPointSet:
    """Parse a point-set CSV: one point per row, last column its weight."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read input file: {exc}") from exc
    points, weights, width = [], [], None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            values = [float(cell) for cell in row]
        except ValueError as exc:
            raise UsageError(f"line {lineno}: not numeric: {exc}") from exc
        if len(values) < 2:
            raise UsageError(f"line {lineno}: need at least one coordinate plus a weight")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise UsageError(
                f"line {lineno}: expected {width} columns, found {len(values)}"
            )
        if not all(math.isfinite(v) for v in values):
            raise UsageError(f"line {lineno}: non-finite value")
        if values[-1] <= 0.0:
            raise UsageError(f"line {lineno}: weight must be positive")
        points.append(values[:-1])
        weights.append(values[-1])
    if not points:
        raise UsageError("input file holds no points")
    return WeightedPointSet(np.asarray(points), np.asarray(weights))


def cmd_gm_solve(args: argparse.Namespace) -> int:
    point_set = read_point_csv(args.input)
    result = smoothed_weiszfeld(
        point_set, nu=args.nu, budget=args.budget, rel_tol=args.rel_tol
    )
    payload = {"schema_version": SUMMARY_SCHEMA_VERSION, **result.to_json_dict()}
    if args.reference:
        z_ref = brute_force_gm(point_set)
        g_ref = gm_objective(z_ref, point_set)
        payload["reference_objective"] = g_ref
        payload["relative_gap"] = (result.g_value - g_ref) / max(abs(g_ref), 1e-300)
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if result.converged_by == "relative_improvement" else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedgm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_gm = sub.add_parser("gm-solve", help="solve one geometric-median instance from CSV")
    p_gm.add_argument("input", help="CSV file, one point per row, last column the weight")
    p_gm.add_argument("--nu", type=float, default=1e-6, help="smoothing parameter")
    p_gm.add_argument("--budget", type=int, default=50, help="max oracle calls")
    p_gm.add_argument("--rel-tol", type=float, default=1e-6, help="relative improvement stop")
    p_gm.add_argument(
        "--reference",
        action="store_true",
        help="also solve by an independent brute-force method and report the gap",
    )
    p_gm.add_argument("--output", help="write JSON here instead of stdout")
    p_gm.set_defaults(func=cmd_gm_solve)

    p_sim = sub.add_parser("simulate", help="run a seeded federated experiment")
    p_sim.add_argument("config", help="JSON config file")
    p_sim.add_argument("--rho", type=float, help="override corruption.rho")
    p_sim.add_argument(
        "--corruption", choices=CORRUPTION_KINDS, help="override corruption.kind"
    )
    p_sim.add_argument(
        "--aggregator", choices=AGGREGATOR_KINDS, help="override algorithm.aggregator"
    )
    p_sim.add_argument("--rounds", type=int, help="override run.rounds")
    p_sim.add_argument("--seeds", help="override run.seeds, comma separated")
    p_sim.add_argument("--outdir", help="override run.outdir")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="cross one axis with the config's seeds")
    p_sweep.add_argument("config", help="JSON config file")
    p_sweep.add_argument("--axis", choices=("rho", "aggregator"), required=True)
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated axis values, e.g. 0,0.1,0.25"
    )
    p_sweep.add_argument("--corruption", choices=CORRUPTION_KINDS)
    p_sweep.add_argument("--aggregator", choices=AGGREGATOR_KINDS)
    p_sweep.add_argument("--seeds", help="override run.seeds, comma separated")
    p_sweep.add_argument("--rounds", type=int, help="override run.rounds")
    p_sweep.add_argument("--outdir", help="override run.outdir")
    p_sweep.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="summarize a directory of trace CSVs")
    p_rep.add_argument("rundir", help="directory produced by simulate/sweep runs")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_entry()
