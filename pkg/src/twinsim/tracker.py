"""Trajectory estimation from per-interval jump counts.

Offline, a static body is simulated at each grid cell and the per-pair
jump counts per interval are histogrammed into that cell's fingerprint:
``P(n_i | cell)`` for every pair within the observation radius, with
Laplace smoothing so no bin is ever zero.  Pairs outside the radius feed
one shared background histogram used for (cell, pair) combinations the
training never covered.

Online, each interval's observation is the jump-count vector of the
pairs around the coarse estimate, and a bootstrap particle filter runs
predict -> weight -> resample -> estimate.  Weights multiply the
per-pair fingerprint probabilities at each particle's cell (the
factorized observation likelihood); resampling is multinomial every
interval.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .env import DetectionProfile, MovingObject, TwinsGrid, World, run_scenario
from .locate import ActiveRegion, select_subgraph

FINGERPRINT_MAGIC = "twinsim-fingerprint v1"


@dataclass(frozen=True)
class TrackerConfig:
    n_particles: int = 500
    sigma_pos: float = 0.2          # position noise per interval (m)
    sigma_vel: float = 0.1          # velocity noise per interval (m/s)
    delta_t: float = 1.0
    obs_radius: float = 1.5         # pairs this close to the coarse estimate are observed
    obs_mode: str = "radius"        # "radius" | "patch3x3"
    n_max: int = 10
    alpha: float = 1.0              # Laplace smoothing
    init_spread: float = 0.5
    init_velocity: tuple[float, float] = (1.5, 0.0)

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.obs_mode not in ("radius", "patch3x3"):
            raise ValueError(f"unknown obs_mode {self.obs_mode!r}")
        if self.n_max < 1 or self.alpha <= 0:
            raise ValueError("n_max must be >= 1 and alpha > 0")


@dataclass(frozen=True)
class ObservationVector:
    """Jump counts per observed pair within one interval window."""

    counts: dict[int, int]

    def __post_init__(self):
        if any(n < 0 for n in self.counts.values()):
            raise ValueError("jump counts must be non-negative")


def twins_near(grid: TwinsGrid, point: tuple[float, float],
               mode: str, radius: float) -> list[int]:
    """Observed pair set around a point: radius rule or strict 3x3 patch."""
    if mode == "patch3x3":
        cx, cy = grid.cell_of(*point)
        out = []
        for iy in range(cy - 1, cy + 2):
            for ix in range(cx - 1, cx + 2):
                tid = grid.cell_to_twin.get((ix, iy))
                if tid is not None:
                    out.append(tid)
        return sorted(out)
    return sorted(
        tid for tid, t in grid.twins.items()
        if math.hypot(t.x - point[0], t.y - point[1]) <= radius)


def observe(records, window: tuple[float, float] | None,
            coarse: tuple[float, float], grid: TwinsGrid,
            cfg: TrackerConfig) -> ObservationVector:
    """Count jumps per in-scope pair over the interval records.

    ``records`` are interval records carrying ``t_end`` and ``jumping``;
    ``window`` optionally restricts them to ``window[0] < t_end <=
    window[1]``.  Counts are capped at ``n_max``.
    """
    ids = twins_near(grid, coarse, cfg.obs_mode, cfg.obs_radius)
    counts = {tid: 0 for tid in ids}
    for rec in records:
        if window is not None and not (window[0] < rec.t_end <= window[1]):
            continue
        for tid in rec.jumping:
            if tid in counts:
                counts[tid] = min(counts[tid] + 1, cfg.n_max)
    return ObservationVector(counts)


class Fingerprint:
    """Per-cell jump-count histograms plus the shared background.

    ``table`` is dense ``(nx*ny, n_twins, n_max+1)``: trained entries
    hold the smoothed histograms, everything else the background row, so
    particle scoring is one gather per observed pair.
    """

    def __init__(self, grid_shape: tuple[int, int], cell_edge: float,
                 twin_ids: tuple[int, ...], cfg: TrackerConfig,
                 runs_per_cell: int, table: np.ndarray,
                 background: np.ndarray, trained_cells: tuple[int, ...]):
        self.nx, self.ny = grid_shape
        self.cell_edge = cell_edge
        self.twin_ids = tuple(twin_ids)
        self.twin_index = {tid: i for i, tid in enumerate(self.twin_ids)}
        self.cfg = cfg
        self.runs_per_cell = runs_per_cell
        self.table = table
        self.background = background
        self.trained_cells = tuple(trained_cells)

    def cell_index(self, cell: tuple[int, int]) -> int:
        return cell[1] * self.nx + cell[0]

    def histogram(self, cell: tuple[int, int], twin_id: int) -> np.ndarray:
        return self.table[self.cell_index(cell), self.twin_index[twin_id]]

    def save(self, path):
        meta = {
            "nx": self.nx, "ny": self.ny, "cell_edge": self.cell_edge,
            "twin_ids": list(self.twin_ids),
            "runs_per_cell": self.runs_per_cell,
            "delta_t": self.cfg.delta_t, "obs_radius": self.cfg.obs_radius,
            "obs_mode": self.cfg.obs_mode, "n_max": self.cfg.n_max,
            "alpha": self.cfg.alpha,
            "trained_cells": list(self.trained_cells),
        }
        with open(path, "w") as fh:
            fh.write(f"# {FINGERPRINT_MAGIC}\n")
            fh.write("# meta " + json.dumps(meta, sort_keys=True) + "\n")
            fh.write("# background "
                     + " ".join(f"{v:.17g}" for v in self.background) + "\n")
            fh.write("cell_ix,cell_iy,twin_id,bin,probability\n")
            for ci in self.trained_cells:
                ix, iy = ci % self.nx, ci // self.nx
                for tj, tid in enumerate(self.twin_ids):
                    row = self.table[ci, tj]
                    if np.array_equal(row, self.background):
                        continue
                    for b, p in enumerate(row):
                        fh.write(f"{ix},{iy},{tid},{b},{p:.17g}\n")

    @classmethod
    def load(cls, path, cfg: TrackerConfig | None = None) -> "Fingerprint":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != f"# {FINGERPRINT_MAGIC}":
                raise ValueError(f"not a fingerprint file: {path}")
            meta = json.loads(fh.readline().split("# meta ", 1)[1])
            bg_line = fh.readline().split("# background ", 1)[1]
            background = np.array([float(v) for v in bg_line.split()])
            fh.readline()  # column header
            base = cfg or TrackerConfig()
            cfg = replace(base, delta_t=meta["delta_t"],
                          obs_radius=meta["obs_radius"],
                          obs_mode=meta["obs_mode"], n_max=meta["n_max"],
                          alpha=meta["alpha"])
            nx, ny = meta["nx"], meta["ny"]
            twin_ids = tuple(meta["twin_ids"])
            tindex = {tid: i for i, tid in enumerate(twin_ids)}
            table = np.tile(background, (nx * ny, len(twin_ids), 1))
            for line in fh:
                ix, iy, tid, b, p = line.strip().split(",")
                table[int(iy) * nx + int(ix), tindex[int(tid)], int(b)] = float(p)
        return cls((nx, ny), meta["cell_edge"], twin_ids, cfg,
                   meta["runs_per_cell"], table, background,
                   tuple(meta["trained_cells"]))


def trainable_cells(grid: TwinsGrid, cfg: TrackerConfig) -> list[tuple[int, int]]:
    """Cells worth fingerprinting: those with at least one in-scope pair."""
    out = []
    for iy in range(grid.ny):
        for ix in range(grid.nx):
            if twins_near(grid, grid.cell_center((ix, iy)),
                          cfg.obs_mode, cfg.obs_radius):
                out.append((ix, iy))
    return out


def train_offline(grid: TwinsGrid, geometry, excitation,
                  profile: DetectionProfile, powers: dict[int, float],
                  cfg: TrackerConfig, runs_per_cell: int, seed: int,
                  tau_query: float, object_height: float = 1.70,
                  cells: list[tuple[int, int]] | None = None) -> Fingerprint:
    """Build the fingerprint by simulating a static body at each cell center.

    Each cell gets an independent child RNG stream (cells processed in
    sorted order), so the result is deterministic in (config, seed).
    """
    from .scheduler import PriorityPoller

    if runs_per_cell < 1:
        raise ValueError("runs_per_cell must be >= 1")
    cells = sorted(cells) if cells is not None else trainable_cells(grid, cfg)
    for c in cells:
        if not grid.in_area(c):
            raise ValueError(f"cell {c} outside the grid")
    twin_ids = tuple(sorted(grid.twins))
    tindex = {tid: i for i, tid in enumerate(twin_ids)}
    n_bins = cfg.n_max + 1
    counts = np.zeros((grid.nx * grid.ny, len(twin_ids), n_bins))
    bg_counts = np.zeros(n_bins)
    seeds = np.random.SeedSequence(seed).spawn(len(cells))

    for cell, child in zip(cells, seeds):
        cx, cy = grid.cell_center(cell)
        world = World(grid, geometry, excitation, profile,
                      MovingObject.static(cx, cy, object_height),
                      tau_query, np.random.default_rng(child))
        poller = PriorityPoller(grid, powers)
        log = run_scenario(world, poller, duration=runs_per_cell * cfg.delta_t,
                           delta_t=cfg.delta_t)
        in_scope = set(twins_near(grid, (cx, cy), cfg.obs_mode, cfg.obs_radius))
        ci = cell[1] * grid.nx + cell[0]
        for rec in log.intervals:
            jumping = set(rec.jumping)
            for tid in twin_ids:
                n = min(1 if tid in jumping else 0, cfg.n_max)
                if tid in in_scope:
                    counts[ci, tindex[tid], n] += 1
                else:
                    bg_counts[n] += 1

    background = (bg_counts + cfg.alpha) / (bg_counts.sum() + cfg.alpha * n_bins)
    table = np.tile(background, (grid.nx * grid.ny, len(twin_ids), 1))
    trained = []
    for cell in cells:
        ci = cell[1] * grid.nx + cell[0]
        trained.append(ci)
        cx, cy = grid.cell_center(cell)
        for tid in twins_near(grid, (cx, cy), cfg.obs_mode, cfg.obs_radius):
            tj = tindex[tid]
            total = counts[ci, tj].sum()
            table[ci, tj] = (counts[ci, tj] + cfg.alpha) / (total + cfg.alpha * n_bins)
    return Fingerprint((grid.nx, grid.ny), grid.cell_edge, twin_ids, cfg,
                       runs_per_cell, table, background, tuple(trained))


@dataclass
class ParticleSet:
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    w: np.ndarray

    def __len__(self):
        return self.x.shape[0]

    def normalized(self, tol: float = 1e-9) -> bool:
        return abs(float(self.w.sum()) - 1.0) <= tol


def pf_init(n: int, origin: tuple[float, float], v0: tuple[float, float],
            spread: float, rng: np.random.Generator) -> ParticleSet:
    """Particles Gaussian-spread around the entry point, uniform weights."""
    if n < 1:
        raise ValueError("need at least one particle")
    x = origin[0] + rng.normal(0.0, spread, n) if spread > 0 else np.full(n, origin[0])
    y = origin[1] + rng.normal(0.0, spread, n) if spread > 0 else np.full(n, origin[1])
    return ParticleSet(x=np.asarray(x, float), y=np.asarray(y, float),
                       vx=np.full(n, v0[0], float), vy=np.full(n, v0[1], float),
                       w=np.full(n, 1.0 / n))


def pf_predict(ps: ParticleSet, dt: float, sigma_pos: float, sigma_vel: float,
               area: tuple[float, float], rng: np.random.Generator) -> ParticleSet:
    """Constant-velocity motion step; walls reflect. Weights untouched."""
    n = len(ps)
    noise_x = rng.normal(0.0, sigma_pos, n) if sigma_pos > 0 else np.zeros(n)
    noise_y = rng.normal(0.0, sigma_pos, n) if sigma_pos > 0 else np.zeros(n)
    noise_vx = rng.normal(0.0, sigma_vel, n) if sigma_vel > 0 else np.zeros(n)
    noise_vy = rng.normal(0.0, sigma_vel, n) if sigma_vel > 0 else np.zeros(n)
    kernels.predict_particles(ps.x, ps.y, ps.vx, ps.vy,
                              noise_x, noise_y, noise_vx, noise_vy,
                              dt, 0.0, area[0], 0.0, area[1])
    return ps


def _particle_cells(ps: ParticleSet, fp: Fingerprint) -> np.ndarray:
    ix = np.clip((ps.x / fp.cell_edge).astype(np.int64), 0, fp.nx - 1)
    iy = np.clip((ps.y / fp.cell_edge).astype(np.int64), 0, fp.ny - 1)
    return iy * fp.nx + ix


def pf_weight(ps: ParticleSet, obs: ObservationVector,
              fp: Fingerprint) -> tuple[ParticleSet, bool]:
    """Multiply weights by the factorized fingerprint likelihood.

    Returns ``(particles, diverged)``; diverged means every weight
    annihilated and the caller must reseed.  An empty observation leaves
    the weights unchanged (after renormalization).
    """
    ids = sorted(obs.counts)
    if ids:
        cell_idx = _particle_cells(ps, fp)
        obs_twins = np.array([fp.twin_index[t] for t in ids], dtype=np.int64)
        obs_counts = np.array(
            [min(obs.counts[t], fp.cfg.n_max) for t in ids], dtype=np.int64)
        like = kernels.weight_particles(cell_idx, fp.table, obs_twins, obs_counts)
        ps.w *= like
    total = float(ps.w.sum())
    if total <= 0.0 or not math.isfinite(total):
        return ps, True
    ps.w /= total
    return ps, False


def pf_resample(ps: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Multinomial resampling: N categorical draws, weights reset to 1/N."""
    if not ps.normalized(tol=1e-6):
        raise ValueError("weights must be normalized before resampling")
    n = len(ps)
    cdf = np.cumsum(ps.w)
    cdf /= cdf[-1]
    u = rng.random(n)
    idx = kernels.resample_indices(cdf, u)
    return ParticleSet(x=ps.x[idx].copy(), y=ps.y[idx].copy(),
                       vx=ps.vx[idx].copy(), vy=ps.vy[idx].copy(),
                       w=np.full(n, 1.0 / n))


def pf_estimate(ps: ParticleSet) -> tuple[float, float]:
    """Weight-averaged position."""
    if len(ps) == 0:
        raise ValueError("empty particle set")
    wsum = float(ps.w.sum())
    return (float(np.dot(ps.w, ps.x) / wsum), float(np.dot(ps.w, ps.y) / wsum))


def _reseed(ps: ParticleSet, region: ActiveRegion | None,
            area: tuple[float, float], cell_edge: float,
            rng: np.random.Generator) -> ParticleSet:
    """Divergence recovery: uniform positions over the active region."""
    n = len(ps)
    if region is not None and region.cells:
        cells = sorted(region.cells)
        pick = rng.integers(0, len(cells), n)
        offs = rng.random((n, 2))
        xs = np.array([cells[i][0] for i in pick], float)
        ys = np.array([cells[i][1] for i in pick], float)
        ps.x = (xs + offs[:, 0]) * cell_edge
        ps.y = (ys + offs[:, 1]) * cell_edge
    else:
        ps.x = rng.random(n) * area[0]
        ps.y = rng.random(n) * area[1]
    ps.w = np.full(n, 1.0 / n)
    return ps


@dataclass
class TrackPoint:
    t: float
    x_est: float
    y_est: float
    coarse: tuple[float, float] | None
    component_count: int
    diverged: bool


def track(intervals, grid: TwinsGrid, fp: Fingerprint, cfg: TrackerConfig,
          origin: tuple[float, float], rng: np.random.Generator,
          area: tuple[float, float] | None = None) -> list[TrackPoint]:
    """Online loop over interval records: coarse region, then the filter.

    Per interval: coarse estimate from the jump set (keeping the previous
    one when the set is empty), observation vector around it, then
    predict -> weight -> resample -> estimate.
    """
    area = area or (grid.area_w, grid.area_h)
    ps = pf_init(cfg.n_particles, origin, cfg.init_velocity, cfg.init_spread, rng)
    out: list[TrackPoint] = []
    coarse: tuple[float, float] | None = None
    t_prev = 0.0
    for rec in intervals:
        dt = max(rec.t_end - t_prev, 1e-9)
        t_prev = rec.t_end
        region = select_subgraph(rec.jumping, grid, prev_estimate=coarse)
        if region is not None:
            coarse = region.centroid
        if coarse is not None:
            obs = observe([rec], None, coarse, grid, cfg)
        else:
            obs = ObservationVector({})
        ps = pf_predict(ps, dt, cfg.sigma_pos, cfg.sigma_vel, area, rng)
        ps, diverged = pf_weight(ps, obs, fp)
        if diverged:
            ps = _reseed(ps, region, area, grid.cell_edge, rng)
        ps = pf_resample(ps, rng)
        ex, ey = pf_estimate(ps)
        out.append(TrackPoint(rec.t_end, ex, ey, coarse,
                              region.component_count if region else 0, diverged))
    return out
