"""Scenario files: schema, validation, and the builders behind them.

A scenario is one JSON document holding everything a run needs: area and
grid, pair geometry, excitation calibration, detection profile, shelf
rows with their facing readers, the walk, polling and tracker settings,
and the seed.  ``build()`` materializes the simulation objects;
``scenario_hash`` fingerprints the canonical document so every output
file can carry its provenance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

from .coupling import ExcitationModel, Placement, TagGeometry, TwinGeometry
from .env import (ConfigError, DetectionProfile, MovingObject, ReaderRecord,
                  TwinRecord, TwinsGrid)
from .tracker import TrackerConfig

SCHEMA_VERSION = 1
READER_GROUP = 4  # pairs per auto-generated reader antenna


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def canonical_dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def scenario_hash(doc: dict) -> str:
    return hashlib.sha256(canonical_dump(doc).encode()).hexdigest()


@dataclass
class Scenario:
    doc: dict[str, Any]
    path: str | None = None

    def __post_init__(self):
        self.validate()

    # -- access helpers -------------------------------------------------
    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    @property
    def duration(self) -> float:
        return float(self.doc["duration"])

    @property
    def delta_t(self) -> float:
        return float(self.doc["polling"]["delta_t"])

    @property
    def tau_query(self) -> float:
        return float(self.doc["polling"]["tau_query"])

    @property
    def burn_in(self) -> int:
        return int(self.doc["tracker"].get("burn_in", 3))

    def hash(self) -> str:
        return scenario_hash(self.doc)

    # -- validation ------------------------------------------------------
    def validate(self):
        doc = self.doc
        _require(isinstance(doc, dict), "scenario root must be an object")
        _require(doc.get("schema_version") == SCHEMA_VERSION,
                 f"schema_version must be {SCHEMA_VERSION}")
        for key in ("seed", "area", "grid", "geometry", "excitation",
                    "detection", "twin_rows", "polling", "tracker",
                    "train", "duration"):
            _require(key in doc, f"missing scenario section '{key}'")
        _require(isinstance(doc["seed"], int), "seed must be an integer")
        area = doc["area"]
        _require(area.get("width", 0) > 0 and area.get("height", 0) > 0,
                 "area.width and area.height must be positive")
        _require(doc["grid"].get("cell_edge", 0) > 0,
                 "grid.cell_edge must be positive")
        _require(doc["twin_rows"], "twin_rows must not be empty")
        for i, row in enumerate(doc["twin_rows"]):
            for k in ("y", "x_start", "count", "spacing", "mount_height", "facing_y"):
                _require(k in row, f"twin_rows[{i}] missing '{k}'")
            _require(row["count"] >= 1, f"twin_rows[{i}].count must be >= 1")
        _require(doc["polling"].get("tau_query", 0) > 0, "polling.tau_query must be positive")
        _require(doc["polling"].get("delta_t", 0) > 0, "polling.delta_t must be positive")
        obj = doc.get("object")
        if obj is not None:
            _require(len(obj.get("waypoints", [])) >= 1,
                     "object.waypoints must not be empty")
            _require(self.duration <= obj["waypoints"][-1][0] + 1e-9,
                     "duration exceeds the trajectory span")

    # -- builders ----------------------------------------------------------
    def geometry(self) -> TwinGeometry:
        g = self.doc["geometry"]
        tag = TagGeometry(loop_width=g["loop_width"], loop_length=g["loop_length"],
                          loop_gap=g["loop_gap"], dipole_length=g["dipole_length"],
                          frequency=g["frequency"])
        return TwinGeometry(tag, separation=g["separation"],
                            placement=Placement(g.get("placement", "a")))

    def excitation(self) -> ExcitationModel:
        return ExcitationModel(**self.doc["excitation"])

    def detection(self) -> DetectionProfile:
        d = dict(self.doc["detection"])
        for curve in ("height_curve", "mount_curve"):
            if curve in d:
                d[curve] = tuple((float(a), float(b)) for a, b in d[curve])
        return DetectionProfile(**d)

    def grid(self) -> TwinsGrid:
        doc = self.doc
        edge = doc["grid"]["cell_edge"]
        twins: list[TwinRecord] = []
        readers: list[ReaderRecord] = []
        tid = 0
        rid = 0
        for row in doc["twin_rows"]:
            xs = [row["x_start"] + i * row["spacing"] for i in range(row["count"])]
            row_reader_ids = []
            for g0 in range(0, len(xs), READER_GROUP):
                group = xs[g0:g0 + READER_GROUP]
                rx = sum(group) / len(group)
                readers.append(ReaderRecord(rid, rx, row["facing_y"],
                                            rx, row["y"]))
                row_reader_ids.extend([rid] * len(group))
                rid += 1
            for x, reader_id in zip(xs, row_reader_ids):
                twins.append(TwinRecord(tid, x, row["y"], row["mount_height"],
                                        reader_id))
                tid += 1
        return TwinsGrid(doc["area"]["width"], doc["area"]["height"],
                         edge, twins, readers)

    def moving_object(self) -> MovingObject | None:
        obj = self.doc.get("object")
        if obj is None:
            return None
        return MovingObject(tuple(tuple(map(float, w)) for w in obj["waypoints"]),
                            height=obj.get("height", 1.70),
                            max_speed=obj.get("speed", 1.5) * 1.05 + 0.1)

    def tracker_config(self) -> TrackerConfig:
        t = dict(self.doc["tracker"])
        t.pop("origin", None)
        t.pop("burn_in", None)
        if "init_velocity" in t:
            t["init_velocity"] = tuple(t["init_velocity"])
        t.setdefault("delta_t", self.delta_t)
        return TrackerConfig(**t)

    def tracker_origin(self) -> tuple[float, float]:
        origin = self.doc["tracker"].get("origin")
        if origin is not None:
            return float(origin[0]), float(origin[1])
        obj = self.doc.get("object")
        if obj is not None:
            w0 = obj["waypoints"][0]
            return float(w0[1]), float(w0[2])
        return 0.0, 0.0

    def poll_budget_ok(self) -> bool:
        """Round of N pairs fits one interval: N * tau_query <= delta_t."""
        n = sum(r["count"] for r in self.doc["twin_rows"])
        return n * self.tau_query <= self.delta_t + 1e-12


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}")
    return Scenario(doc, path=str(path))


def make_reference_warehouse(seed: int = 20140401) -> dict:
    """The shipped desk-scale warehouse: 30 m x 20 m, one monitored aisle.

    Two facing shelf rows 2 m apart carry 48 pairs each at 0.6 m
    spacing, readers mounted on the opposite shelf.  A 1.70 m body
    enters at the aisle's west end and walks it at 1.5 m/s.  96 pairs at
    a 5 ms interrogation keep each polling round inside the 0.5 s
    interval, so the jump streak left behind the walker stays short.
    """
    ex = ExcitationModel()
    y_a, y_b = 9.3, 11.3
    x_start, count, spacing = 0.9, 48, 0.6
    entry = (0.6, (y_a + y_b) / 2)
    exit_x = x_start + (count - 1) * spacing + 0.3
    speed = 1.5
    walk_t = round((exit_x - entry[0]) / speed, 3)
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "reference_warehouse",
        "seed": seed,
        "area": {"width": 30.0, "height": 20.0},
        "grid": {"cell_edge": 0.6},
        "geometry": {"loop_width": 0.005, "loop_length": 0.010,
                     "loop_gap": 0.002, "dipole_length": 0.16,
                     "frequency": 915e6, "separation": 0.010,
                     "placement": "a"},
        "excitation": {"loop_resistance": ex.loop_resistance, "kappa": ex.kappa,
                       "i_threshold": ex.i_threshold, "i_mutual": ex.i_mutual,
                       "gain_reader_dbi": ex.gain_reader_dbi,
                       "gain_tag_dbi": ex.gain_tag_dbi,
                       "coupling_gate": ex.coupling_gate},
        "detection": {"p_front": 0.95, "p_behind": 0.60, "p_false": 0.002,
                      "front_length": 2.0, "front_width": 1.0,
                      "behind_range": 1.0, "front_gradient_far": 0.55,
                      "height_curve": [[1.60, 0.85], [1.70, 0.92], [1.80, 0.97]],
                      "mount_curve": [[0.50, 0.80], [0.75, 1.00], [1.00, 0.80]]},
        "twin_rows": [
            {"y": y_a, "x_start": x_start, "count": count, "spacing": spacing,
             "mount_height": 0.75, "facing_y": y_b},
            {"y": y_b, "x_start": x_start, "count": count, "spacing": spacing,
             "mount_height": 0.75, "facing_y": y_a},
        ],
        "polling": {"tau_query": 0.005, "delta_t": 0.5},
        "object": {"height": 1.70, "speed": speed,
                   "waypoints": [[0.0, entry[0], entry[1]],
                                 [walk_t, exit_x, entry[1]]]},
        "tracker": {"n_particles": 500, "sigma_pos": 0.2, "sigma_vel": 0.1,
                    "obs_radius": 1.5, "obs_mode": "radius", "n_max": 10,
                    "alpha": 1.0, "init_spread": 0.5,
                    "init_velocity": [speed, 0.0],
                    "origin": [entry[0], entry[1]], "burn_in": 3},
        "train": {"runs_per_cell": 40, "object_height": 1.70},
        "duration": float(int(walk_t)),
    }
