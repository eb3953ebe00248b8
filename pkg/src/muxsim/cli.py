"""Command-line front end: simulate | schedule | validate | gen-trace | predict | match.

Batch tool; every subcommand runs to completion and all randomness is seeded,
so identical invocations produce byte-identical outputs.  Exit codes: 0 on
success, 2 for input validation failures, 3 for runtime failures.
"""

import argparse
import csv
import dataclasses
import json
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List

from .config import ConfigError, config_from_dict, load_config
from .core import (ClusterTrace, OfflineWorkload, OnlineWorkload,
                   TraceValidationError, WorkloadProfile, load_trace, save_trace)
from .gen import gen_trace
from .gpu_state import HealthState
from .matching import BipartiteGraph, max_weight_matching
from .predictor import (PredictionTable, TableError, load_table, predict_point,
                        save_table, table_from_dict)
from .scheduler import POLICIES, SchedulerConfig, SchedulingAborted, schedule
from .simengine import RunReport, SimConfig, default_table, report_to_json, run

TIMESERIES_COLUMNS = ("time_s", "gpu_id", "gpu_util", "sm_activity",
                      "mem_usage", "sm_clock_mhz")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muxsim",
        description="Trace-driven simulator for safe GPU space-sharing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="replay a trace under a sharing policy")
    p.add_argument("--trace", required=True, help="trace JSON file")
    p.add_argument("--config", default=None, help="run configuration JSON file")
    p.add_argument("--seed", type=int, default=0,
                   help="base RNG seed (default %(default)s)")
    p.add_argument("--out", default=".",
                   help="output directory (default %(default)s)")
    p.add_argument("--policy", choices=POLICIES, default=None,
                   help="override the configured scheduling policy")
    p.add_argument("--sweep-seeds", type=int, default=1, metavar="N",
                   help="run N seeds starting at --seed (default %(default)s)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("schedule", help="run one scheduling round on a snapshot")
    p.add_argument("--snapshot", required=True, help="snapshot JSON file")
    p.add_argument("--seed", type=int, default=0,
                   help="RNG seed for randomized policies (default %(default)s)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("validate", help="validate a trace file")
    p.add_argument("--trace", required=True, help="trace JSON file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen-trace", help="generate a synthetic trace")
    p.add_argument("--spec", default=None,
                   help="generator spec JSON (defaults bundled)")
    p.add_argument("--seed", type=int, default=0,
                   help="generator seed (default %(default)s)")
    p.add_argument("--out", required=True, help="output trace path")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("predict", help="query or export a throughput table")
    p.add_argument("--table", default=None,
                   help="table JSON (defaults to the built-in model)")
    p.add_argument("--config", default=None,
                   help="config JSON for model parameters and axes")
    p.add_argument("--online-sm", type=float, default=None)
    p.add_argument("--offline-sm", type=float, default=None)
    p.add_argument("--sm-pct", type=float, default=None)
    p.add_argument("--save-table", default=None, metavar="PATH",
                   help="write the table in use to PATH")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("match", help="max-weight matching on an explicit edge list")
    p.add_argument("--weights", required=True,
                   help="JSON file holding [[left, right, weight], ...]")
    p.set_defaults(func=cmd_match)

    return parser


def _load_cfg(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else config_from_dict(None)
    if getattr(args, "policy", None):
        cfg = dataclasses.replace(
            cfg, scheduler=dataclasses.replace(cfg.scheduler, policy=args.policy))
    return cfg


def _write_outputs(report: RunReport, out_dir: str, suffix: str) -> str:
    report_path = os.path.join(out_dir, f"report{suffix}.json")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(report_to_json(report))
    rows = []
    for gid, series in report.timeseries.items():
        for r in series:
            rows.append((r["t_s"], gid, r["gpu_util"], r["sm_activity"],
                         r["mem_usage"], r["sm_clock_mhz"]))
    rows.sort(key=lambda r: (r[0], r[1]))
    ts_path = os.path.join(out_dir, f"timeseries{suffix}.csv")
    with open(ts_path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(TIMESERIES_COLUMNS)
        w.writerows(rows)
    return report_path


def cmd_simulate(args) -> int:
    trace = load_trace(args.trace)
    cfg = _load_cfg(args)
    if args.sweep_seeds < 1:
        raise ConfigError("--sweep-seeds must be >= 1")
    os.makedirs(args.out, exist_ok=True)
    seeds = list(range(args.seed, args.seed + args.sweep_seeds))
    if len(seeds) == 1:
        reports = {seeds[0]: run(trace, cfg, seed=seeds[0])}
    else:
        with ThreadPoolExecutor(max_workers=min(4, len(seeds))) as pool:
            futures = {s: pool.submit(run, trace, cfg, seed=s) for s in seeds}
            reports = {s: futures[s].result() for s in seeds}
    for s in seeds:
        suffix = "" if len(seeds) == 1 else f"-s{s}"
        path = _write_outputs(reports[s], args.out, suffix)
        print(f"wrote {path}")
    return 0


def _snapshot_profile(rec: str, entry: Dict) -> WorkloadProfile:
    sm = entry["sm_activity"]
    return WorkloadProfile(
        sm_activity=sm,
        gpu_utilization=min(1.0, 1.8 * float(sm)),
        sm_occupancy=0.5,
        iter_time_separate=0.1,
        mem_fraction=entry["mem_fraction"],
    )


def _parse_snapshot(doc: Dict):
    if not isinstance(doc, dict):
        raise TraceValidationError("snapshot: top level must be an object")
    keys = ("now", "scheduler", "gpu_states", "online", "offline",
            "table", "table_path")
    unknown = [k for k in doc if k not in keys]
    if unknown:
        raise TraceValidationError(f"snapshot: unknown fields {unknown}")
    for k in ("gpu_states", "online", "offline"):
        if k not in doc:
            raise TraceValidationError(f"snapshot: missing field '{k}'")

    now = float(doc.get("now", 0.0))
    try:
        scfg = SchedulerConfig(**{str(k): v for k, v in doc.get("scheduler", {}).items()})
    except TypeError as e:
        raise TraceValidationError(f"snapshot: scheduler section: {e}") from None

    states = {}
    for gid, name in doc["gpu_states"].items():
        try:
            states[str(gid)] = HealthState(str(name).lower())
        except ValueError:
            raise TraceValidationError(
                f"snapshot: gpu '{gid}' has unknown state {name!r}") from None

    online = []
    for entry in doc["online"]:
        rec = f"snapshot online '{entry.get('id', '?')}'"
        for k in ("id", "gpu_id", "sm_activity", "mem_fraction"):
            if k not in entry:
                raise TraceValidationError(f"{rec}: missing field '{k}'")
        prof = _snapshot_profile(rec, entry)
        online.append(OnlineWorkload(
            id=str(entry["id"]), gpu_id=str(entry["gpu_id"]),
            base_latency=0.02, latency_slo=0.2,
            qps_series=((0.0, 1.0),), profile_by_qps=((1.0, prof),)))

    offline = []
    for entry in doc["offline"]:
        rec = f"snapshot offline '{entry.get('id', '?')}'"
        for k in ("id", "sm_activity", "mem_fraction"):
            if k not in entry:
                raise TraceValidationError(f"{rec}: missing field '{k}'")
        offline.append(OfflineWorkload(
            id=str(entry["id"]),
            submit_time=float(entry.get("submit_s", 0.0)),
            work_separate=float(entry.get("work_s", 3600.0)),
            profile=_snapshot_profile(rec, entry)))

    if "table" in doc:
        table = table_from_dict(doc["table"])
    elif "table_path" in doc:
        table = load_table(doc["table_path"])
    else:
        table = default_table(SimConfig(scheduler=scfg))
    return now, scfg, states, online, offline, table


def cmd_schedule(args) -> int:
    with open(args.snapshot, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise TraceValidationError(
                f"snapshot '{args.snapshot}': invalid JSON ({e})") from e
    now, scfg, states, online, offline, table = _parse_snapshot(doc)
    rng = random.Random(f"{args.seed}-match")
    assignment = schedule(online, offline, states, table, scfg, now, rng=rng)
    print(f"pairs {len(assignment.pairs)}")
    for gpu_id, online_id, offline_id, sm in assignment.pairs:
        print(f"pair {gpu_id} {online_id} {offline_id} {sm!r}")
    for offline_id in assignment.unplaced:
        print(f"unplaced {offline_id}")
    return 0


def cmd_validate(args) -> int:
    load_trace(args.trace)
    print("ok")
    return 0


def cmd_gen_trace(args) -> int:
    spec = None
    if args.spec is not None:
        with open(args.spec, "r", encoding="utf-8") as f:
            try:
                spec = json.load(f)
            except json.JSONDecodeError as e:
                raise TraceValidationError(
                    f"spec '{args.spec}': invalid JSON ({e})") from e
    trace = gen_trace(spec, seed=args.seed)
    save_trace(trace, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    cfg = load_config(args.config) if args.config else config_from_dict(None)
    if args.table:
        table = load_table(args.table)
    else:
        table = default_table(cfg)
    coords = (args.online_sm, args.offline_sm, args.sm_pct)
    given = [c for c in coords if c is not None]
    if given and len(given) != 3:
        raise ConfigError("predict: --online-sm, --offline-sm and --sm-pct "
                          "must be given together")
    if args.save_table:
        save_table(table, args.save_table)
        print(f"wrote {args.save_table}")
    if len(given) == 3:
        value = predict_point(table, args.online_sm, args.offline_sm, args.sm_pct)
        print(f"{value!r}")
    elif not args.save_table:
        raise ConfigError("predict: nothing to do (give coordinates or --save-table)")
    return 0


def cmd_match(args) -> int:
    with open(args.weights, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"weights '{args.weights}': invalid JSON ({e})") from e
    if not isinstance(doc, list):
        raise ValueError("weights: top level must be a list of [left, right, weight]")
    weights = {}
    for entry in doc:
        try:
            left, right, w = entry
        except (TypeError, ValueError):
            raise ValueError(f"weights: bad entry {entry!r}") from None
        weights[(str(left), str(right))] = float(w)
    graph = BipartiteGraph(
        left=tuple(sorted({l for l, _r in weights})),
        right=tuple(sorted({r for _l, r in weights})),
        weights=weights)
    matching = max_weight_matching(graph)
    for left, right in matching.pairs:
        print(f"pair {left} {right}")
    print(f"total {matching.total_weight!r}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TraceValidationError, ConfigError, TableError, FileNotFoundError,
            IsADirectoryError, NotADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, SchedulingAborted) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
