"""Run metrics: localization error statistics and detection rates.

The localization error of an interval is the distance between the
filter estimate and the ground truth at that interval's end.  Reported
means skip the first ``burn_in`` intervals (filter settle-in).  The
detection rate counts polling rounds: of the rounds in which at least
one pair was interrogated while the body stood in its front zone, the
fraction in which at least one such pair was observed jumping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .env import (DetectionProfile, MovingObject, Region, ScenarioLog,
                  TwinsGrid, classify_region)

CDF_QUANTILES = [q / 20.0 for q in range(21)]  # 0, 0.05, ..., 1.0


@dataclass
class RunReport:
    n_intervals: int
    burn_in: int
    mean_error_m: float
    max_error_m: float
    error_cdf: list[tuple[float, float]]      # (quantile, error)
    detection_rate: float | None
    covered_rounds: int
    spill_count: int
    diverged_intervals: int
    runtime_s: float = 0.0                    # wall clock; never serialized

    def to_doc(self) -> dict:
        return {
            "n_intervals": self.n_intervals,
            "burn_in": self.burn_in,
            "mean_error_m": self.mean_error_m,
            "max_error_m": self.max_error_m,
            "error_cdf": [[q, e] for q, e in self.error_cdf],
            "detection_rate": self.detection_rate,
            "covered_rounds": self.covered_rounds,
            "spill_count": self.spill_count,
            "diverged_intervals": self.diverged_intervals,
        }


def _quantiles(sorted_vals: list[float]) -> list[tuple[float, float]]:
    n = len(sorted_vals)
    out = []
    for q in CDF_QUANTILES:
        idx = min(n - 1, max(0, math.ceil(q * n) - 1)) if q > 0 else 0
        out.append((q, sorted_vals[idx]))
    return out


def error_series(points, truth) -> list[float]:
    """Per-interval distance estimate-to-truth (timestamps must align)."""
    by_t = {round(t, 9): (x, y) for t, x, y in truth}
    errs = []
    for p in points:
        key = round(p.t, 9)
        if key not in by_t:
            continue
        tx, ty = by_t[key]
        errs.append(math.hypot(p.x_est - tx, p.y_est - ty))
    return errs


def detection_stats(log: ScenarioLog, grid: TwinsGrid,
                    obj: MovingObject | None,
                    profile: DetectionProfile) -> tuple[int, int]:
    """(rounds detected, rounds with front-zone coverage) from the trace."""
    if obj is None:
        return 0, 0
    per_round: dict[int, list] = {}
    bounds = [(rec.t_start, rec.t_end, rec.index) for rec in log.intervals]
    jumping_by_round = {rec.index: set(rec.jumping) for rec in log.intervals}
    for t, tid, _p, outcome in log.query_trace:
        for t0, t1, k in bounds:
            if t0 - 1e-9 <= t < t1 + 1e-9:
                per_round.setdefault(k, []).append((t, tid, outcome))
                break
    covered = detected = 0
    for k, rows in sorted(per_round.items()):
        front_tids = []
        for t, tid, outcome in rows:
            pos = obj.position_at(min(max(t, obj.t_start), obj.t_end))
            twin = grid.twins[tid]
            region, _ = classify_region(twin, grid.readers[twin.reader_id],
                                        pos, profile)
            if region is Region.FRONT:
                front_tids.append(tid)
        if not front_tids:
            continue
        covered += 1
        if any(tid in jumping_by_round[k] for tid in front_tids):
            detected += 1
    return detected, covered


def build_report(points, log: ScenarioLog, grid: TwinsGrid,
                 obj: MovingObject | None, profile: DetectionProfile,
                 burn_in: int, runtime_s: float = 0.0) -> RunReport:
    errs = error_series(points, log.truth)
    scored = errs[burn_in:] if len(errs) > burn_in else errs
    if not scored:
        raise ValueError("no scored intervals: run too short for the burn-in")
    mean_e = sum(scored) / len(scored)
    max_e = max(scored)
    detected, covered = detection_stats(log, grid, obj, profile)
    rate = (detected / covered) if covered else None
    return RunReport(
        n_intervals=len(points), burn_in=burn_in,
        mean_error_m=mean_e, max_error_m=max_e,
        error_cdf=_quantiles(sorted(scored)),
        detection_rate=rate, covered_rounds=covered,
        spill_count=log.spill_count,
        diverged_intervals=sum(1 for p in points if p.diverged),
        runtime_s=runtime_s)


@dataclass
class AggregateReport:
    trials: list[dict] = field(default_factory=list)

    def add(self, seed: int, report: RunReport):
        self.trials.append({"seed": seed, **report.to_doc()})

    def to_doc(self) -> dict:
        self.trials.sort(key=lambda t: t["seed"])
        means = [t["mean_error_m"] for t in self.trials]
        rates = [t["detection_rate"] for t in self.trials
                 if t["detection_rate"] is not None]
        n = len(means)
        mean = sum(means) / n
        if n > 1:
            var = sum((m - mean) ** 2 for m in means) / (n - 1)
            ci95 = 1.96 * math.sqrt(var / n)
        else:
            ci95 = 0.0
        return {
            "n_trials": n,
            "mean_error_m": mean,
            "mean_error_ci95_m": ci95,
            "max_error_m": max(t["max_error_m"] for t in self.trials),
            "detection_rate": (sum(rates) / len(rates)) if rates else None,
            "trials": self.trials,
        }
