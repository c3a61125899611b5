"""Command-line harness: simulate | sweep | train | track | evaluate.

Every verb takes ``--scenario <path>`` plus optional ``--seed`` (overrides
the scenario's) and ``--out <dir>``.  All output files start with a
provenance header carrying the scenario hash and seed; identical
(scenario, seed) runs produce byte-identical files.  Exit codes: 0
success, 1 runtime failure, 2 configuration/parse failure.  Set
``TWINS_LOG`` to a logging level name for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import coupling as cp
from .env import ConfigError, MovingObject, World, run_scenario
from .report import AggregateReport, build_report
from .scenario import Scenario, load_scenario, make_reference_warehouse
from .scheduler import CalibrationError, PriorityPoller, calibrate_powers
from .tracker import Fingerprint, track, train_offline

log = logging.getLogger("twinsim")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def _write_csv(path: Path, scenario: Scenario, seed: int, header: str, rows):
    with open(path, "w") as fh:
        fh.write(f"# twinsim scenario_sha256={scenario.hash()} seed={seed}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, scenario: Scenario, seed: int, doc: dict):
    payload = {"scenario_sha256": scenario.hash(), "seed": seed, **doc}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _simulate(scenario: Scenario, seed: int):
    grid = scenario.grid()
    geometry = scenario.geometry()
    excitation = scenario.excitation()
    profile = scenario.detection()
    obj = scenario.moving_object()
    if not scenario.poll_budget_ok():
        log.warning("twin count exceeds the per-interval polling budget; "
                    "rounds will spill")
    powers = calibrate_powers(grid, geometry, excitation)
    world = World(grid, geometry, excitation, profile, obj,
                  scenario.tau_query, np.random.default_rng(seed))
    poller = PriorityPoller(grid, powers)
    slog = run_scenario(world, poller, scenario.duration, scenario.delta_t)
    return grid, obj, profile, slog


def cmd_simulate(scenario: Scenario, seed: int, out: Path) -> int:
    _grid, _obj, _profile, slog = _simulate(scenario, seed)
    _write_csv(out / "events.csv", scenario, seed, "t_s,twin_id,kind",
               [(e.t, e.twin_id, e.kind) for e in slog.events])
    _write_csv(out / "truth.csv", scenario, seed, "t_s,x,y",
               [(t, x, y) for t, x, y in slog.truth])
    _write_csv(out / "queries.csv", scenario, seed, "t_s,twin_id,p_tx_dbm,outcome",
               slog.query_trace)
    _write_csv(out / "intervals.csv", scenario, seed,
               "interval,t_end_s,spilled,jumping",
               [(r.index, r.t_end, int(r.spilled), " ".join(map(str, r.jumping)))
                for r in slog.intervals])
    print(f"simulate: {len(slog.intervals)} intervals, "
          f"{len(slog.events)} events, {slog.spill_count} spills")
    return EXIT_OK


SWEEP_KINDS = ("min_power_vs_d", "power_vs_D", "height", "mount_height", "placement")


def _sweep_rows(kind: str, scenario: Scenario, seed: int):
    geometry = scenario.geometry()
    excitation = scenario.excitation()
    if kind == "min_power_vs_d":
        distance = 2.0
        for d_mm in (6, 8, 10, 12, 15, 18, 20, 22, 24, 26):
            g = geometry.with_separation(d_mm / 1000.0)
            fore = cp.min_activation_power(g, excitation, distance, "fore")
            rear = cp.min_activation_power(g, excitation, distance, "rear")
            window = cp.critical_window(g, excitation, distance)
            yield (d_mm, _none(fore), _none(rear),
                   _none(rear - fore if fore is not None and rear is not None else None),
                   int(window is None))
    elif kind == "power_vs_D":
        for step in range(2, 29):
            distance = step * 0.25
            fore = cp.min_activation_power(geometry, excitation, distance, "fore")
            rear = cp.min_activation_power(geometry, excitation, distance, "rear")
            yield (distance, _none(fore), _none(rear), int(rear is not None))
    elif kind == "placement":
        from dataclasses import replace
        for pl in cp.Placement:
            g = replace(geometry, placement=pl)
            fore = cp.min_activation_power(g, excitation, 2.0, "fore")
            rear = cp.min_activation_power(g, excitation, 2.0, "rear")
            gap = (rear - fore) if fore is not None and rear is not None else None
            yield (pl.value, int(pl.shadowing), _none(fore), _none(rear), _none(gap))
    elif kind in ("height", "mount_height"):
        values = ([1.60, 1.65, 1.70, 1.75, 1.80] if kind == "height"
                  else [0.50, 0.60, 0.75, 0.90, 1.00])
        for v in values:
            doc = json.loads(json.dumps(scenario.doc))
            if kind == "height":
                doc["object"]["height"] = v
            else:
                for row in doc["twin_rows"]:
                    row["mount_height"] = v
            variant = Scenario(doc)
            grid, obj, profile, slog = _simulate(variant, seed)
            from .report import detection_stats
            detected, covered = detection_stats(slog, grid, obj, profile)
            rate = detected / covered if covered else float("nan")
            events = sum(1 for e in slog.events if e.kind == "jump")
            yield (v, detected, covered, rate, events)
    else:
        raise ConfigError(f"unknown sweep kind {kind!r}; choose from {SWEEP_KINDS}")


def _none(v):
    return "" if v is None else v


def cmd_sweep(kind: str, scenario: Scenario, seed: int, out: Path) -> int:
    headers = {
        "min_power_vs_d": "d_mm,fore_min_dbm,rear_min_dbm,gap_db,window_empty",
        "power_vs_D": "distance_m,fore_min_dbm,rear_min_dbm,rear_reachable",
        "placement": "placement,shadowing,fore_min_dbm,rear_min_dbm,gap_db",
        "height": ("object_height_m,detected_rounds,covered_rounds,"
                   "detection_rate,jump_events"),
        "mount_height": ("mount_height_m,detected_rounds,covered_rounds,"
                         "detection_rate,jump_events"),
    }
    if kind not in headers:
        raise ConfigError(f"unknown sweep kind {kind!r}; choose from {SWEEP_KINDS}")
    rows = list(_sweep_rows(kind, scenario, seed))
    _write_csv(out / f"sweep_{kind}.csv", scenario, seed, headers[kind], rows)
    print(f"sweep {kind}: {len(rows)} rows")
    return EXIT_OK


def cmd_train(scenario: Scenario, seed: int, out: Path) -> int:
    grid = scenario.grid()
    geometry = scenario.geometry()
    excitation = scenario.excitation()
    powers = calibrate_powers(grid, geometry, excitation)
    cfg = scenario.tracker_config()
    train = scenario.doc["train"]
    fp = train_offline(grid, geometry, excitation, scenario.detection(), powers,
                       cfg, runs_per_cell=train["runs_per_cell"], seed=seed,
                       tau_query=scenario.tau_query,
                       object_height=train.get("object_height", 1.70))
    path = out / "fingerprint.tsv"
    with open(path, "w") as fh:
        fh.write(f"# twinsim scenario_sha256={scenario.hash()} seed={seed}\n")
    _append_fingerprint(path, fp)
    print(f"train: {len(fp.trained_cells)} cells -> {path}")
    return EXIT_OK


def _append_fingerprint(path: Path, fp: Fingerprint):
    tmp = path.with_suffix(".body")
    fp.save(tmp)
    with open(path, "a") as dst, open(tmp) as src:
        dst.write(src.read())
    tmp.unlink()


def load_fingerprint(path) -> Fingerprint:
    """Read a fingerprint file, tolerating the CLI provenance header."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"fingerprint file not found: {path}")
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("# twinsim scenario"):
        import tempfile
        with open(path) as fh:
            fh.readline()
            body = fh.read()
        with tempfile.NamedTemporaryFile("w", suffix=".tsv", delete=False) as tf:
            tf.write(body)
            tmp = tf.name
        try:
            return Fingerprint.load(tmp)
        finally:
            os.unlink(tmp)
    return Fingerprint.load(path)


def _track_once(scenario: Scenario, fp: Fingerprint, seed: int):
    t0 = time.perf_counter()
    grid, obj, profile, slog = _simulate(scenario, seed)
    cfg = scenario.tracker_config()
    # tracker draws from its own stream so polling and filtering stay
    # independently replayable
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    points = track(slog.intervals, grid, fp, cfg, scenario.tracker_origin(), rng)
    report = build_report(points, slog, grid, obj, profile,
                          scenario.burn_in, runtime_s=time.perf_counter() - t0)
    return points, slog, report


def cmd_track(scenario: Scenario, fp_path, seed: int, out: Path) -> int:
    fp = load_fingerprint(fp_path)
    points, slog, report = _track_once(scenario, fp, seed)
    truth = {round(t, 9): (x, y) for t, x, y in slog.truth}
    rows = []
    for p in points:
        tx, ty = truth.get(round(p.t, 9), (float("nan"), float("nan")))
        err = math.hypot(p.x_est - tx, p.y_est - ty)
        rows.append((p.t, p.x_est, p.y_est, tx, ty, err))
    _write_csv(out / "trajectory.csv", scenario, seed,
               "t_s,x_est,y_est,x_true,y_true,error_m", rows)
    _write_json(out / "report.json", scenario, seed, report.to_doc())
    log.info("track runtime: %.2f s", report.runtime_s)
    print(f"track: mean error {report.mean_error_m:.3f} m, "
          f"max {report.max_error_m:.3f} m over {report.n_intervals} intervals")
    return EXIT_OK


def cmd_evaluate(scenario: Scenario, fp_path, seed: int, n_trials: int,
                 out: Path) -> int:
    if n_trials < 1:
        raise ConfigError("need at least one trial")
    fp = load_fingerprint(fp_path)
    agg = AggregateReport()
    for i in range(n_trials):
        trial_seed = seed + i
        _points, _slog, report = _track_once(scenario, fp, trial_seed)
        agg.add(trial_seed, report)
        log.info("trial %d (seed %d): mean %.3f m, %.2f s",
                 i, trial_seed, report.mean_error_m, report.runtime_s)
    doc = agg.to_doc()
    _write_json(out / "evaluation.json", scenario, seed, doc)
    print(f"evaluate: {n_trials} trials, mean error "
          f"{doc['mean_error_m']:.3f} +- {doc['mean_error_ci95_m']:.3f} m, "
          f"detection rate {doc['detection_rate']:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinsim",
        description="Device-free tracking simulator for coupled passive-tag pairs")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--out", default=".", help="output directory")

    common(sub.add_parser("simulate", help="run the event simulation"))
    p_sweep = sub.add_parser("sweep", help="parameter sweeps (plot-ready CSV)")
    p_sweep.add_argument("--kind", required=True, choices=SWEEP_KINDS)
    common(p_sweep)
    common(sub.add_parser("train", help="build the offline fingerprint"))
    p_track = sub.add_parser("track", help="simulate and track one run")
    p_track.add_argument("--fingerprint", required=True)
    common(p_track)
    p_eval = sub.add_parser("evaluate", help="multi-seed tracking evaluation")
    p_eval.add_argument("--fingerprint", required=True)
    p_eval.add_argument("--trials", type=int, default=20)
    common(p_eval)

    p_ref = sub.add_parser("reference-scenario",
                           help="print the shipped reference scenario JSON")
    p_ref.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("TWINS_LOG", "WARNING").upper()
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "reference-scenario":
            doc = make_reference_warehouse()
            if args.seed is not None:
                doc["seed"] = args.seed
            print(json.dumps(doc, indent=1, sort_keys=True))
            return EXIT_OK
        scenario = load_scenario(args.scenario)
        seed = args.seed if args.seed is not None else scenario.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.verb == "simulate":
            return cmd_simulate(scenario, seed, out)
        if args.verb == "sweep":
            return cmd_sweep(args.kind, scenario, seed, out)
        if args.verb == "train":
            return cmd_train(scenario, seed, out)
        if args.verb == "track":
            return cmd_track(scenario, args.fingerprint, seed, out)
        if args.verb == "evaluate":
            return cmd_evaluate(scenario, args.fingerprint, seed,
                                args.trials, out)
        raise ConfigError(f"unknown verb {args.verb}")
    except (ConfigError, CalibrationError, ValueError) as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - CLI boundary
        log.exception("runtime failure")
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
