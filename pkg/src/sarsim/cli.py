"""Command line: run, batch, replay and calibrate.

Exit codes: 0 success, 1 safety violation, 2 config or input error,
3 mission incomplete within the sim-time budget.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import json
import math
import statistics
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, build_setup, load_config
from .localization import CalibrationFitError, fit_calibration, load_samples_csv
from .missionlog import (
    LogParseError,
    altitude_csv,
    distance_csv,
    events_csv,
    final_states,
    read_jsonl,
    telemetry,
    timeline,
)
from .planner import PlannerError
from .sim import run_mission

EXIT_OK = 0
EXIT_UNSAFE = 1
EXIT_INPUT = 2
EXIT_INCOMPLETE = 3

SUMMARY_COLUMNS = (
    "seed",
    "complete",
    "completion_time_s",
    "completion_time_min",
    "picks_attempted",
    "picks_succeeded",
    "drop_zone_violations",
    "separation_violations",
    "min_pairwise_distance_m",
    "exit_code",
)


def _err(msg: str) -> None:
    print(f"sarsim: error: {msg}", file=sys.stderr)


def exit_code_for(metrics: dict) -> int:
    if metrics["drop_zone_violations"] or metrics["separation_violations"]:
        return EXIT_UNSAFE
    if not metrics["complete"]:
        return EXIT_INCOMPLETE
    return EXIT_OK


def _load(path: str | None) -> RunConfig:
    return load_config(path)


# ---------------------------------------------------------------------- run


def cmd_run(args) -> int:
    cfg = _load(args.config)
    setup = build_setup(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_mission(setup, args.seed)
    result.log.write(out / "mission.jsonl")
    m = result.metrics
    (out / "metrics.json").write_text(json.dumps(m, indent=2) + "\n")
    code = exit_code_for(m)
    if m["complete"]:
        status = f"complete in {m['completion_time_s']:.2f} s ({m['completion_time_s'] / 60:.2f} min)"
    else:
        status = f"incomplete: {m['objects_delivered']}/{m['objects_total']} delivered at {m['sim_time_s']:.1f} s"
    print(f"seed {args.seed}: {status}; picks {m['picks_succeeded']}/{m['picks_attempted']}; "
          f"violations a={m['drop_zone_violations']} b={m['separation_violations']}")
    print(f"wrote {out / 'mission.jsonl'} and {out / 'metrics.json'}")
    return code


# -------------------------------------------------------------------- batch


def parse_seed_range(text: str) -> list[int]:
    """``A..B`` (inclusive) or a single seed."""
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            a, b = int(lo), int(hi)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed range {text!r}, expected A..B") from None
        if b < a:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(a, b + 1))
    try:
        return [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from None


def _batch_one(cfg: RunConfig, seed: int) -> dict:
    return run_mission(build_setup(cfg, seed), seed).metrics


def run_batch(cfg: RunConfig, seeds: list[int], parallel: int = 1) -> list[dict]:
    """Per-seed metrics in seed order; each run owns its world."""
    if parallel <= 1:
        return [_batch_one(cfg, s) for s in seeds]
    with cf.ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_batch_one, [cfg] * len(seeds), seeds))


def _summary_row(m: dict) -> dict:
    t = m["completion_time_s"]
    return {
        "seed": m["seed"],
        "complete": m["complete"],
        "completion_time_s": "" if t is None else t,
        "completion_time_min": "" if t is None else round(t / 60.0, 4),
        "picks_attempted": m["picks_attempted"],
        "picks_succeeded": m["picks_succeeded"],
        "drop_zone_violations": m["drop_zone_violations"],
        "separation_violations": m["separation_violations"],
        "min_pairwise_distance_m": "" if m["min_pairwise_distance_m"] is None else m["min_pairwise_distance_m"],
        "exit_code": exit_code_for(m),
    }


def summarize(metrics: list[dict]) -> dict:
    times = [m["completion_time_s"] / 60.0 for m in metrics if m["complete"]]
    att = sum(m["picks_attempted"] for m in metrics)
    return {
        "runs": len(metrics),
        "complete": len(times),
        "mean_min": statistics.fmean(times) if times else math.nan,
        "std_min": statistics.stdev(times) if len(times) > 1 else 0.0,
        "pick_rate": sum(m["picks_succeeded"] for m in metrics) / att if att else math.nan,
        "unsafe": [m["seed"] for m in metrics if exit_code_for(m) == EXIT_UNSAFE],
        "incomplete": [m["seed"] for m in metrics if exit_code_for(m) == EXIT_INCOMPLETE],
    }


def cmd_batch(args) -> int:
    cfg = _load(args.config)
    build_setup(cfg)  # fail fast on bad configs, before any worker starts
    seeds = args.seeds
    t0 = time.perf_counter()
    metrics = run_batch(cfg, seeds, args.parallel)
    wall = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [_summary_row(m) for m in metrics]
    agg = summarize(metrics)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        w.writerow({"seed": "mean", "completion_time_min": round(agg["mean_min"], 4)})
        w.writerow({"seed": "std", "completion_time_min": round(agg["std_min"], 4)})
    for r in rows:
        t = r["completion_time_min"]
        shown = f"{t:7.3f} min" if t != "" else "   incomplete"
        print(f"seed {r['seed']:>5}  {shown}  picks {r['picks_succeeded']}/{r['picks_attempted']}  exit {r['exit_code']}")
    print(
        f"{agg['complete']}/{agg['runs']} complete; mean {agg['mean_min']:.3f} min, "
        f"std {agg['std_min']:.3f} min; pick success {agg['pick_rate']:.3f}; wall {wall:.1f} s"
    )
    print(f"wrote {out / 'summary.csv'}")
    if agg["unsafe"]:
        _err(f"safety violations in seeds {', '.join(map(str, agg['unsafe']))}")
        return EXIT_UNSAFE
    if agg["incomplete"]:
        _err(f"incomplete missions in seeds {', '.join(map(str, agg['incomplete']))}")
        return EXIT_INCOMPLETE
    return EXIT_OK


# ------------------------------------------------------------------- replay


def _trace_lines(records: list[dict], step_s: float = 1.0) -> list[tuple[float, int, str]]:
    """Picking telemetry thinned to one line per UAV per ``step_s``."""
    last: dict[int, float] = {}
    out = []
    for r in telemetry(records):
        if r.get("state") != "ObjectPicking":
            continue
        u = r["uav"]
        if r["t"] - last.get(u, -math.inf) < step_s - 1e-9:
            continue
        last[u] = r["t"]
        out.append((r["t"], u, f"  {r['mode']:<13} altitude {r['altitude']:6.2f} m  distance {r['distance']:6.3f} m"))
    return out


def cmd_replay(args) -> int:
    records = read_jsonl(args.log)
    lines = [(e.t, e.uav, e.text) for e in timeline(records)]
    lines += _trace_lines(records)
    lines.sort(key=lambda x: x[0])  # stable: timeline entries stay ahead of traces at equal t
    speed = args.speed
    if speed <= 0:
        raise ValueError("--speed must be positive")
    start = time.monotonic()
    for t, uav, text in lines:
        if not args.no_wait:
            delay = t / speed - (time.monotonic() - start)
            if delay > 0:
                time.sleep(delay)
        who = "world" if uav == 0 else f"uav {uav}"
        print(f"{t:9.2f}  {who:<6} {text}")
    print("final states: " + ", ".join(f"uav {u}: {s}" for u, s in sorted(final_states(records).items())))
    if args.export:
        out = Path(args.export)
        out.mkdir(parents=True, exist_ok=True)
        (out / "altitude.csv").write_text(altitude_csv(records))
        (out / "distance.csv").write_text(distance_csv(records))
        (out / "events.csv").write_text(events_csv(records))
        print(f"exported altitude.csv, distance.csv and events.csv to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- calibrate


def cmd_calibrate(args) -> int:
    samples = load_samples_csv(args.samples)
    model = fit_calibration(samples, args.h_c, args.units)
    print(f"a = {model.a:.10g}")
    print(f"b = {model.b:.10g}")
    print(f"rms residual = {model.rms_residual:.6g} {model.units} over {len(samples)} samples")
    print()
    print("# config snippet")
    print("calibration:")
    print(f"  a: {model.a!r}")
    print(f"  b: {model.b!r}")
    print(f"  h_c: {model.h_c!r}")
    print(f"  units: {model.units}")
    return EXIT_OK


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sarsim", description="Multi-UAV search-and-rescue mission simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    cfg_help = "run config (YAML); defaults to $SARSIM_CONFIG, then the packaged default"

    p = sub.add_parser("run", help="run one mission")
    p.add_argument("--config", help=cfg_help)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory for mission.jsonl and metrics.json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run a range of seeds and summarize")
    p.add_argument("--config", help=cfg_help)
    p.add_argument("--seeds", type=parse_seed_range, default=parse_seed_range("0..19"), help="A..B, inclusive")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", default=".", help="output directory for summary.csv")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("replay", help="print a mission log timeline")
    p.add_argument("log")
    p.add_argument("--speed", type=float, default=1.0, help="sim seconds per wall second")
    p.add_argument("--no-wait", action="store_true", help="print instantly")
    p.add_argument("--export", metavar="DIR", help="write altitude, distance and event CSVs")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("calibrate", help="fit the pixel-to-ground model")
    p.add_argument("--samples", required=True, help="CSV with header pixels,meters")
    p.add_argument("--h-c", type=float, default=5.0, help="calibration altitude, m")
    p.add_argument("--units", default="cm", choices=("cm", "m", "mm"), help="units of the measured column")
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
    except (LogParseError, CalibrationFitError, PlannerError) as exc:
        _err(str(exc))
    except OSError as exc:
        _err(f"{exc.filename or ''}: {exc.strerror}")
    except ValueError as exc:
        _err(str(exc))
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
