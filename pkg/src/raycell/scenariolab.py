"""Experiment designs over the ray engine: coverage rasters, path-loss
versus distance statistics, and in-street obstruction studies."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import point_in_polygon, polygon_area
from .raytrace import RayTracer, TraceConfig, relative_power
from .scene import ObstructionBox, Scene, drop_users
from .simnet import SimConfig, attach_users, order_percentile

__all__ = [
    "ObstructionBox", "BinnedStats", "CoverageRaster", "ObstructionReport",
    "coverage_grid", "distance_binned_stats", "insert_obstruction",
    "obstruction_study", "filter_vegetation",
]

BIN_WIDTH_M = 5.0


@dataclass(frozen=True)
class CoverageRaster:
    """Relative-power raster on street-level grid points [dB]."""

    xs: np.ndarray            # (nx,) grid centers [m]
    ys: np.ndarray            # (ny,)
    rel_power_db: np.ndarray  # (ny, nx); NaN inside building footprints
    resolution_m: float
    frequency_ghz: float
    cell_index: int


@dataclass(frozen=True)
class DistanceBin:
    start_m: float
    count: int
    p10_db: float
    median_db: float
    p90_db: float


@dataclass(frozen=True)
class BinnedStats:
    bins: tuple


@dataclass(frozen=True)
class ObstructionReport:
    n_users: int
    baseline_outage_pct: float
    obstructed_outage_pct: float
    baseline_cell_edge_sinr_db: float
    obstructed_cell_edge_sinr_db: float

    @property
    def outage_delta_pct(self) -> float:
        return self.obstructed_outage_pct - self.baseline_outage_pct

    @property
    def cell_edge_sinr_delta_db(self) -> float:
        """Degradation of the 10% worst-user SINR; positive means worse."""
        return self.baseline_cell_edge_sinr_db - self.obstructed_cell_edge_sinr_db


def coverage_grid(scene: Scene, cell_index: int, frequency_ghz: float,
                  resolution_m: float = 2.0, rx_height_m: float = 2.0,
                  trace_config: TraceConfig | None = None) -> CoverageRaster:
    """Relative received power over the open-ground grid from one cell.

    Grid points inside a building footprint are no-data; everywhere else
    the full multipath trace runs and the power sum is referenced to free
    space at 1 m.
    """
    if resolution_m <= 0:
        raise ValueError("resolution must be > 0")
    cell = scene.cells[cell_index]
    base = trace_config or TraceConfig()
    tracer = RayTracer(scene, replace(base, frequency_ghz=frequency_ghz))
    xmin, ymin, xmax, ymax = scene.bounds
    xs = np.arange(xmin + resolution_m / 2.0, xmax, resolution_m)
    ys = np.arange(ymin + resolution_m / 2.0, ymax, resolution_m)
    tx3 = np.array([cell.position[0], cell.position[1], cell.height])
    raster = np.full((len(ys), len(xs)), np.nan)
    footprints = [b.footprint for b in scene.buildings]
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            if any(point_in_polygon((x, y), fp) for fp in footprints):
                continue
            rx3 = np.array([x, y, rx_height_m])
            if np.array_equal(rx3, tx3):
                continue
            paths = tracer.trace(tx3, rx3)
            raster[iy, ix] = relative_power(paths, frequency_ghz)
    return CoverageRaster(xs=xs, ys=ys, rel_power_db=raster,
                          resolution_m=resolution_m,
                          frequency_ghz=frequency_ghz, cell_index=cell_index)


def distance_binned_stats(scene: Scene, cells, frequency_ghz: float,
                          sample_points,
                          trace_config: TraceConfig | None = None) -> BinnedStats:
    """Median / p10 / p90 of relative power per 5 m horizontal-distance bin.

    Pools every (cell, sample point) pair; bin k covers [5k, 5k + 5).
    Empty bins report count 0. Receiver height is 2 m.
    """
    if not cells:
        raise ValueError("need at least one cell")
    base = trace_config or TraceConfig()
    tracer = RayTracer(scene, replace(base, frequency_ghz=frequency_ghz))
    dists, powers = [], []
    for cell in cells:
        tx3 = np.array([cell.position[0], cell.position[1], cell.height])
        for pt in sample_points:
            rx3 = np.array([pt[0], pt[1], 2.0])
            d = float(np.hypot(pt[0] - cell.position[0], pt[1] - cell.position[1]))
            if d < 1e-9:
                continue
            paths = tracer.trace(tx3, rx3)
            dists.append(d)
            powers.append(relative_power(paths, frequency_ghz))
    dists = np.asarray(dists)
    powers = np.asarray(powers)
    n_bins = int(math.floor(dists.max() / BIN_WIDTH_M)) + 1 if len(dists) else 0
    bins = []
    for k in range(n_bins):
        sel = (dists >= k * BIN_WIDTH_M) & (dists < (k + 1) * BIN_WIDTH_M)
        vals = powers[sel]
        if vals.size == 0:
            bins.append(DistanceBin(k * BIN_WIDTH_M, 0,
                                    float("nan"), float("nan"), float("nan")))
        else:
            bins.append(DistanceBin(
                k * BIN_WIDTH_M, int(vals.size),
                order_percentile(vals, 10.0),
                order_percentile(vals, 50.0),
                order_percentile(vals, 90.0)))
    return BinnedStats(bins=tuple(bins))


def insert_obstruction(scene: Scene, box: ObstructionBox) -> Scene:
    """New scene with the box as an opaque obstacle; the input is untouched.

    The box blocks transmission and diffracts over its top edge; facade
    reflections and around-the-ends corner paths stay off unless the box
    enables them.
    """
    fp = box.footprint()
    xmin, ymin, xmax, ymax = scene.bounds
    if (fp[:, 0].min() < xmin or fp[:, 0].max() > xmax
            or fp[:, 1].min() < ymin or fp[:, 1].max() > ymax):
        raise ValueError("obstruction box outside scene bounds")
    return scene.with_box(box)


def filter_vegetation(scene: Scene, min_footprint_area_m2: float) -> Scene:
    """Keep only vegetation blocks at or above a footprint-area threshold.

    Mirrors the difference between map products that carry only large
    vegetation blocks and ones with full per-tree detail.
    """
    kept = tuple(v for v in scene.vegetation
                 if polygon_area(v.footprint) >= min_footprint_area_m2)
    return replace(scene, vegetation=kept)


def _project_arc(breakline: np.ndarray, pt) -> float:
    """Arc-length coordinate of the closest point on a polyline."""
    best_d, best_s = float("inf"), 0.0
    s0 = 0.0
    pt = np.asarray(pt, dtype=float)
    for a, b in zip(breakline[:-1], breakline[1:]):
        e = b - a
        seg_len = float(np.hypot(*e))
        t = float(np.dot(pt - a, e)) / (seg_len * seg_len)
        t = min(max(t, 0.0), 1.0)
        d = float(np.hypot(*(a + t * e - pt)))
        if d < best_d:
            best_d, best_s = d, s0 + t * seg_len
        s0 += seg_len
    return best_s


def obstruction_study(scene: Scene, box: ObstructionBox, street_index: int,
                      config: SimConfig) -> ObstructionReport:
    """Paired baseline/obstructed runs for users on one street.

    Users drop on the selected breakline between the two cells flanking the
    box along it, attach to the better of those two cells, and inter-cell
    interference is forced to zero. Reported deltas are outage and the mean
    SINR of the 10% worst-served users, pooled over iterations.
    """
    if street_index < 0 or street_index >= len(scene.breaklines):
        raise ValueError("street selector matches no breakline")
    street = np.asarray(scene.breaklines[street_index], dtype=float)
    box_s = _project_arc(street, box.center)
    lateral_limit = 4.0 * max(box.width, box.length)
    flank_lo, flank_hi = None, None   # (gap, cell index, arc)
    for ci, cell in enumerate(scene.cells):
        s = _project_arc(street, cell.position)
        seg = _nearest_point(street, cell.position)
        if float(np.hypot(*(seg - cell.position))) > lateral_limit:
            continue
        if s < box_s and (flank_lo is None or box_s - s < flank_lo[0]):
            flank_lo = (box_s - s, ci, s)
        if s > box_s and (flank_hi is None or s - box_s < flank_hi[0]):
            flank_hi = (s - box_s, ci, s)
    if flank_lo is None or flank_hi is None:
        raise ValueError("box is not flanked by two cells along the street")

    lo_s, hi_s = flank_lo[2], flank_hi[2]
    sub = _clip_polyline(street, lo_s, hi_s)
    study_cells = (scene.cells[flank_lo[1]], scene.cells[flank_hi[1]])
    base_scene = replace(scene, breaklines=(sub,), cells=study_cells)
    obstructed_scene = insert_obstruction(base_scene, box)

    def run(s: Scene):
        table = config.effective_mcs()
        sinr_samples, outages, n = [], 0, 0
        for i in range(config.iterations):
            users = drop_users(s, config.density_per_km2, config.seed + i,
                               demand_mbps=config.demand_mbps,
                               antenna_gain_dbi=config.rx_gain_dbi)
            attachments = attach_users(
                s, users, config.pattern, config.budget,
                rx_gain_dbi=config.rx_gain_dbi,
                trace_config=config.effective_trace(),
                mcs_table=table)
            for a in attachments:
                # interference neglected: SINR equals SNR
                sinr_samples.append(a.snr_db)
                if a.snr_db < table.entries[0].sinr_req_db:
                    outages += 1
                n += 1
        sinr = np.asarray(sinr_samples)
        k = max(1, int(math.floor(0.10 * len(sinr))))
        finite = np.sort(sinr)[:k]
        finite = finite[np.isfinite(finite)]
        edge = float(finite.mean()) if finite.size else float("-inf")
        return 100.0 * outages / n, edge, n

    base_outage, base_edge, n_users = run(base_scene)
    obs_outage, obs_edge, _ = run(obstructed_scene)
    return ObstructionReport(
        n_users=n_users,
        baseline_outage_pct=base_outage,
        obstructed_outage_pct=obs_outage,
        baseline_cell_edge_sinr_db=base_edge,
        obstructed_cell_edge_sinr_db=obs_edge)


def _nearest_point(breakline: np.ndarray, pt) -> np.ndarray:
    pt = np.asarray(pt, dtype=float)
    best_d, best_p = float("inf"), breakline[0]
    for a, b in zip(breakline[:-1], breakline[1:]):
        e = b - a
        t = float(np.dot(pt - a, e)) / float(np.dot(e, e))
        t = min(max(t, 0.0), 1.0)
        p = a + t * e
        d = float(np.hypot(*(p - pt)))
        if d < best_d:
            best_d, best_p = d, p
    return best_p


def _clip_polyline(line: np.ndarray, s0: float, s1: float) -> np.ndarray:
    """Sub-polyline between two arc-length coordinates."""
    pts: list = []
    acc = 0.0
    for a, b in zip(line[:-1], line[1:]):
        seg_len = float(np.hypot(*(b - a)))
        lo, hi = acc, acc + seg_len
        if hi >= s0 and lo <= s1 and seg_len > 0:
            t_lo = min(max((s0 - lo) / seg_len, 0.0), 1.0)
            t_hi = min(max((s1 - lo) / seg_len, 0.0), 1.0)
            for t in (t_lo, t_hi):
                p = a + t * (b - a)
                if not pts or np.hypot(*(p - pts[-1])) > 1e-12:
                    pts.append(p)
        acc = hi
    return np.asarray(pts)
