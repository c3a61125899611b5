"""Discrete-time virtual warehouse.

A rectangular area is tiled into square cells; tag pairs sit in cells
along shelf rows, each facing a reader antenna across the aisle.  One
logical reader interrogates one pair at a time at that pair's critical
power.  A moving body inside a pair's coverage zone makes the shadowed
rear tag readable with a calibrated per-query probability (a *jump*);
the pair stays jumped until it is next queried with the body gone.

The stochastic jump model replaces full electromagnetic simulation: the
per-query Bernoulli parameters are calibrated against measured detection
rates, with piecewise-linear corrections for body height and for the
mounting height of the pair, and a linear decay of sensitivity with
distance from the pair inside the front zone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .coupling import ExcitationModel, TwinGeometry, critical_window


class ConfigError(ValueError):
    """Invalid scenario or deployment configuration."""


class Region(Enum):
    FRONT = "front"
    BEHIND = "behind"
    OUTSIDE = "outside"


class QueryOutcome(Enum):
    JUMPING = "jumping"
    QUIESCENT = "quiescent"
    NOT_IN_CRITICAL_STATE = "not_in_critical_state"


@dataclass(frozen=True)
class StateJumpEvent:
    """Rear tag of a pair became readable (`jump`) or fell silent (`restore`)."""

    t: float
    twin_id: int
    kind: str  # "jump" | "restore"


@dataclass(frozen=True)
class TwinRecord:
    twin_id: int
    x: float
    y: float
    mount_height: float
    reader_id: int


@dataclass(frozen=True)
class ReaderRecord:
    reader_id: int
    x: float
    y: float
    aim_x: float
    aim_y: float
    half_angle_deg: float = 35.0


class TwinsGrid:
    """Cell lattice over the area plus the deployed pairs and readers.

    Cells are squares of ``cell_edge``; two cells are adjacent when they
    share an edge (4-connectivity).  At most one pair per cell.
    """

    def __init__(self, area_w: float, area_h: float, cell_edge: float,
                 twins: list[TwinRecord], readers: list[ReaderRecord]):
        if area_w <= 0 or area_h <= 0 or cell_edge <= 0:
            raise ConfigError("area dimensions and cell edge must be positive")
        if not twins:
            raise ConfigError("deployment has no tag pairs")
        self.area_w = area_w
        self.area_h = area_h
        self.cell_edge = cell_edge
        self.nx = max(1, math.ceil(area_w / cell_edge - 1e-9))
        self.ny = max(1, math.ceil(area_h / cell_edge - 1e-9))
        self.twins = {t.twin_id: t for t in sorted(twins, key=lambda t: t.twin_id)}
        if len(self.twins) != len(twins):
            raise ConfigError("duplicate twin ids")
        self.readers = {r.reader_id: r for r in readers}
        if len(self.readers) != len(readers):
            raise ConfigError("duplicate reader ids")
        self._validate()
        self.cell_to_twin = {}
        for t in self.twins.values():
            cell = self.cell_of(t.x, t.y)
            if cell in self.cell_to_twin:
                raise ConfigError(
                    f"twins {self.cell_to_twin[cell]} and {t.twin_id} share cell {cell}")
            self.cell_to_twin[cell] = t.twin_id
        self.twin_cell = {tid: self.cell_of(t.x, t.y) for tid, t in self.twins.items()}

    def _validate(self):
        seen = {}
        offenders = []
        for t in self.twins.values():
            if not (0.0 <= t.x <= self.area_w and 0.0 <= t.y <= self.area_h):
                offenders.append(f"twin {t.twin_id} outside area")
            key = (round(t.x, 9), round(t.y, 9))
            if key in seen:
                offenders.append(f"twin {t.twin_id} overlaps twin {seen[key]}")
            seen[key] = t.twin_id
            if t.reader_id not in self.readers:
                offenders.append(f"twin {t.twin_id} references unknown reader {t.reader_id}")
            elif not self._in_lobe(self.readers[t.reader_id], t):
                offenders.append(f"twin {t.twin_id} outside lobe of reader {t.reader_id}")
        if offenders:
            raise ConfigError("invalid deployment: " + "; ".join(offenders))

    @staticmethod
    def _in_lobe(reader: ReaderRecord, twin: TwinRecord) -> bool:
        bx, by = reader.aim_x - reader.x, reader.aim_y - reader.y
        tx, ty = twin.x - reader.x, twin.y - reader.y
        nb, nt = math.hypot(bx, by), math.hypot(tx, ty)
        if nt == 0.0:
            return False
        if nb == 0.0:
            return True
        cosang = max(-1.0, min(1.0, (bx * tx + by * ty) / (nb * nt)))
        return math.degrees(math.acos(cosang)) <= reader.half_angle_deg + 1e-9

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ix = min(int(x / self.cell_edge), self.nx - 1)
        iy = min(int(y / self.cell_edge), self.ny - 1)
        return max(ix, 0), max(iy, 0)

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.cell_edge, (cell[1] + 0.5) * self.cell_edge)

    def in_area(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.nx and 0 <= cell[1] < self.ny

    def adjacent_cells(self, cell: tuple[int, int]):
        ix, iy = cell
        for c in ((ix - 1, iy), (ix + 1, iy), (ix, iy - 1), (ix, iy + 1)):
            if self.in_area(c):
                yield c

    def neighbor_twins(self, twin_id: int) -> list[int]:
        """Pairs in the 4-adjacent cells, ascending id."""
        out = []
        for c in self.adjacent_cells(self.twin_cell[twin_id]):
            tid = self.cell_to_twin.get(c)
            if tid is not None:
                out.append(tid)
        return sorted(out)

    def reader_distance(self, twin_id: int) -> float:
        t = self.twins[twin_id]
        r = self.readers[t.reader_id]
        return math.hypot(t.x - r.x, t.y - r.y)


@dataclass(frozen=True)
class MovingObject:
    """Piecewise-linear trajectory of the tracked body."""

    waypoints: tuple[tuple[float, float, float], ...]  # (t, x, y)
    height: float = 1.70
    max_speed: float = 2.5

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ConfigError("trajectory needs at least one waypoint")
        times = [w[0] for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("waypoint times must be strictly increasing")
        for (t0, x0, y0), (t1, x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            speed = math.hypot(x1 - x0, y1 - y0) / (t1 - t0)
            if speed > self.max_speed + 1e-9:
                raise ConfigError(
                    f"leg at t={t0} implies speed {speed:.2f} m/s > max {self.max_speed}")
        if self.height <= 0:
            raise ConfigError("object height must be positive")

    @property
    def t_start(self) -> float:
        return self.waypoints[0][0]

    @property
    def t_end(self) -> float:
        return self.waypoints[-1][0]

    @staticmethod
    def static(x: float, y: float, height: float = 1.70) -> "MovingObject":
        return MovingObject(((0.0, x, y), (1e9, x, y)), height=height)

    def position_at(self, t: float) -> tuple[float, float]:
        if not (self.t_start <= t <= self.t_end):
            raise ValueError(f"t={t} outside trajectory span "
                             f"[{self.t_start}, {self.t_end}]")
        pts = self.waypoints
        for (t0, x0, y0), (t1, x1, y1) in zip(pts, pts[1:]):
            if t <= t1:
                f = (t - t0) / (t1 - t0)
                return x0 + f * (x1 - x0), y0 + f * (y1 - y0)
        return pts[-1][1], pts[-1][2]


def _piecewise(knots: tuple[tuple[float, float], ...], v: float) -> float:
    """Linear interpolation through knots, clamped to the end values."""
    if v <= knots[0][0]:
        return knots[0][1]
    for (x0, y0), (x1, y1) in zip(knots, knots[1:]):
        if v <= x1:
            return y0 + (y1 - y0) * (v - x0) / (x1 - x0)
    return knots[-1][1]


@dataclass(frozen=True)
class DetectionProfile:
    """Per-query jump probabilities of the stochastic event model.

    ``p_front`` applies inside the front zone (between reader and pair,
    up to ``front_length`` out from the pair, ``front_width`` across),
    scaled down linearly to ``front_gradient_far`` at the zone's far end.
    ``p_behind`` covers ``behind_range`` on the far side.  ``p_false`` is
    the ambient rate everywhere else.  Body-height and mount-height
    multipliers apply to both zones.
    """

    p_front: float = 0.95
    p_behind: float = 0.60
    p_false: float = 0.01
    front_length: float = 2.0
    front_width: float = 1.0
    behind_range: float = 1.0
    front_gradient_far: float = 0.55
    height_curve: tuple[tuple[float, float], ...] = (
        (1.60, 0.85), (1.70, 0.92), (1.80, 0.97))
    mount_curve: tuple[tuple[float, float], ...] = (
        (0.50, 0.80), (0.75, 1.00), (1.00, 0.80))

    def __post_init__(self):
        for name in ("p_front", "p_behind", "p_false"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.front_length <= 0 or self.front_width <= 0 or self.behind_range <= 0:
            raise ConfigError("zone extents must be positive")
        if not (0.0 < self.front_gradient_far <= 1.0):
            raise ConfigError("front_gradient_far must be in (0, 1]")

    def height_multiplier(self, h: float) -> float:
        return min(1.0, max(0.0, _piecewise(self.height_curve, h)))

    def mount_multiplier(self, h: float) -> float:
        return min(1.0, max(0.0, _piecewise(self.mount_curve, h)))

    def jump_probability(self, region: Region, frac_along: float,
                         obj_height: float, mount_height: float) -> float:
        if region is Region.OUTSIDE:
            return self.p_false
        mult = (self.height_multiplier(obj_height)
                * self.mount_multiplier(mount_height))
        if region is Region.FRONT:
            grad = 1.0 + (self.front_gradient_far - 1.0) * frac_along
            return min(1.0, self.p_front * mult * grad)
        return min(1.0, self.p_behind * mult)


def classify_region(twin: TwinRecord, reader: ReaderRecord,
                    pos: tuple[float, float],
                    profile: DetectionProfile) -> tuple[Region, float]:
    """Locate a position relative to a pair's coverage zones.

    Returns the zone and, for the front zone, the fractional distance
    from the pair toward the zone's far end (0 at the pair).
    """
    dx, dy = reader.x - twin.x, reader.y - twin.y
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return Region.OUTSIDE, 0.0
    ux, uy = dx / dist, dy / dist
    rx, ry = pos[0] - twin.x, pos[1] - twin.y
    along = rx * ux + ry * uy
    lateral = abs(rx * uy - ry * ux)
    if lateral > profile.front_width / 2.0:
        return Region.OUTSIDE, 0.0
    front_len = min(profile.front_length, dist)
    if 0.0 <= along <= front_len:
        return Region.FRONT, along / front_len
    if -profile.behind_range <= along < 0.0:
        return Region.BEHIND, 0.0
    return Region.OUTSIDE, 0.0


@dataclass
class IntervalRecord:
    index: int
    t_start: float
    t_end: float
    jumping: tuple[int, ...]   # ascending twin ids observed jumping
    spilled: bool


@dataclass
class ScenarioLog:
    intervals: list[IntervalRecord] = field(default_factory=list)
    truth: list[tuple[float, float, float]] = field(default_factory=list)
    events: list[StateJumpEvent] = field(default_factory=list)
    query_trace: list[tuple[float, int, float, str]] = field(default_factory=list)
    spill_count: int = 0


class World:
    """Owns the simulation clock, pair states and the seeded RNG.

    Every interrogation consumes exactly one RNG draw and advances the
    clock by ``tau_query``, regardless of outcome, so a run is replayable
    from (config, seed) alone.  Queries are strictly sequential: only one
    pair is ever held at its critical power at a time.
    """

    def __init__(self, grid: TwinsGrid, geometry: TwinGeometry,
                 excitation: ExcitationModel, profile: DetectionProfile,
                 obj: MovingObject | None, tau_query: float,
                 rng: np.random.Generator):
        if tau_query <= 0:
            raise ConfigError("tau_query must be positive")
        self.grid = grid
        self.geometry = geometry
        self.excitation = excitation
        self.profile = profile
        self.obj = obj
        self.tau_query = tau_query
        self.rng = rng
        self.clock = 0.0
        self._busy_until = 0.0
        self.jumped = {tid: False for tid in grid.twins}
        self.events: list[StateJumpEvent] = []
        self.windows = {
            tid: critical_window(geometry, excitation, grid.reader_distance(tid))
            for tid in grid.twins
        }

    def object_position(self, t: float) -> tuple[float, float] | None:
        if self.obj is None:
            return None
        return self.obj.position_at(t)

    def query(self, twin_id: int, p_tx_dbm: float) -> QueryOutcome:
        if twin_id not in self.grid.twins:
            raise ConfigError(f"unknown twin id {twin_id}")
        t = self.clock
        assert t >= self._busy_until - 1e-12, "overlapping interrogations"
        self._busy_until = t + self.tau_query
        self.clock = self._busy_until
        u = float(self.rng.random())

        window = self.windows[twin_id]
        if window is None or not (window[0] <= p_tx_dbm < window[1]):
            return QueryOutcome.NOT_IN_CRITICAL_STATE

        twin = self.grid.twins[twin_id]
        pos = self.object_position(t)
        if pos is None:
            region, frac = Region.OUTSIDE, 0.0
        else:
            region, frac = classify_region(
                twin, self.grid.readers[twin.reader_id], pos, self.profile)

        if self.jumped[twin_id]:
            if region is Region.OUTSIDE:
                self.jumped[twin_id] = False
                self.events.append(StateJumpEvent(t, twin_id, "restore"))
                return QueryOutcome.QUIESCENT
            return QueryOutcome.JUMPING

        obj_height = self.obj.height if self.obj is not None else 1.70
        p = self.profile.jump_probability(region, frac, obj_height, twin.mount_height)
        if u < p:
            self.jumped[twin_id] = True
            self.events.append(StateJumpEvent(t, twin_id, "jump"))
            return QueryOutcome.JUMPING
        return QueryOutcome.QUIESCENT


def run_scenario(world: World, poller, duration: float,
                 delta_t: float = 1.0) -> ScenarioLog:
    """Drive polling rounds for ``duration`` seconds of simulated time.

    One round per ``delta_t`` interval; a round that takes longer than
    ``delta_t`` spills into the next interval (counted and flagged).
    Ground truth is sampled at each round's end.
    """
    if duration < 0:
        raise ConfigError("duration must be non-negative")
    if world.obj is not None and duration > world.obj.t_end:
        raise ConfigError(
            f"duration {duration} exceeds trajectory span (ends {world.obj.t_end})")
    log = ScenarioLog()
    k = 0
    while True:
        nominal = k * delta_t
        t_start = max(nominal, world.clock)
        if t_start >= duration:
            break
        world.clock = t_start
        jumping, trace = poller.poll_round(world)
        t_end = world.clock
        spilled = t_end > nominal + delta_t + 1e-12
        if spilled:
            log.spill_count += 1
        log.intervals.append(IntervalRecord(k, t_start, t_end, tuple(sorted(jumping)), spilled))
        log.query_trace.extend(trace)
        pos = world.object_position(min(t_end, world.obj.t_end)) if world.obj else None
        if pos is not None:
            log.truth.append((t_end, pos[0], pos[1]))
        k += 1
    log.events = list(world.events)
    return log
