"""World model: 2.5D buildings, vegetation, breaklines, cell sites.

Scenes are immutable after construction. Geometry lives on flat terrain at
z = 0; all lengths are meters. A scene-level index flattens every obstacle
footprint into one numpy edge table so that segment queries stay cheap when
the ray tracer fires them by the thousand.
"""
from __future__ import annotations

import json
import math
import weakref
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .geometry import (
    point_in_polygon,
    points_in_owners,
    polygon_area,
    polygon_is_simple,
    segment_edge_params,
)

# Vegetation specific attenuation defaults [dB/m]. The 60 GHz anchor follows
# the ITU vegetation curve; the sub-6 anchor keeps the log-frequency slope
# plausible for deciduous canopies in leaf.
DEFAULT_VEG_ATTENUATION = {2.4: 1.5, 60.0: 11.0}

VEG_CLASSES = ("woods", "tree", "hedge")

SNAP_TOLERANCE_M = 0.01


class SceneError(ValueError):
    """Scene parsing or invariant failure; carries every problem found."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _as_poly(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("polygon must be a sequence of [x, y] pairs")
    return arr


@dataclass(frozen=True, eq=False)
class Building:
    """Opaque prism: blocks transmission, reflects off facades, diffracts
    over its roof and around its vertical corner edges."""

    footprint: np.ndarray  # (V, 2) [m]
    height: float          # [m]


@dataclass(frozen=True, eq=False)
class VegBlock:
    """Vegetation prism attenuating by penetration length; never opaque."""

    footprint: np.ndarray
    height: float
    veg_class: str = "tree"
    specific_attenuation_db_per_m: dict = field(
        default_factory=lambda: dict(DEFAULT_VEG_ATTENUATION))

    def attenuation_at(self, frequency_ghz: float) -> float:
        """Specific attenuation [dB/m], log-frequency interpolated between
        the known entries (clamped outside their range)."""
        table = self.specific_attenuation_db_per_m
        if not table:
            raise ValueError("vegetation block has no attenuation entries")
        if frequency_ghz in table:
            return float(table[frequency_ghz])
        freqs = np.array(sorted(table))
        vals = np.array([table[f] for f in freqs])
        return float(np.interp(math.log10(frequency_ghz), np.log10(freqs), vals))


@dataclass(frozen=True, eq=False)
class CellSite:
    position: np.ndarray          # (2,) [m]
    height: float = 7.0           # above ground [m]
    pattern_id: str = "default"
    tx_power_dbm: float = 21.5


@dataclass(frozen=True, eq=False)
class ObstructionBox:
    """Bus-like opaque box dropped into a street for obstruction studies."""

    center: np.ndarray            # (2,) [m]
    length: float = 12.0          # along azimuth [m]
    width: float = 2.5
    height: float = 3.0
    azimuth_deg: float = 0.0
    reflective: bool = False      # allow facade reflections off the box
    around_ends: bool = False     # allow corner diffraction around the box

    def footprint(self) -> np.ndarray:
        c, s = math.cos(math.radians(self.azimuth_deg)), math.sin(math.radians(self.azimuth_deg))
        hl, hw = self.length / 2.0, self.width / 2.0
        local = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.asarray(self.center, dtype=float)


@dataclass(frozen=True, eq=False)
class UserTerminal:
    position: np.ndarray          # (2,) on a breakline [m]
    height: float = 2.0
    antenna_gain_dbi: float = 5.0
    demand_mbps: float = 15.0


@dataclass(frozen=True)
class ObstacleCrossing:
    """One footprint traversal of a 3D segment, measured along the segment."""

    obstacle: object
    kind: str                     # building | vegetation | box
    entry_s: float                # [m]
    exit_s: float                 # [m]
    penetration_length: float     # exit - entry when below the top, else 0
    top_height: float             # [m]

    @property
    def blocks(self) -> bool:
        return self.kind in ("building", "box") and self.penetration_length > 0.0


@dataclass(frozen=True, eq=False)
class Scene:
    """Immutable world model; safe for concurrent reads."""

    bounds: tuple                  # (xmin, ymin, xmax, ymax) [m]
    buildings: tuple = ()
    vegetation: tuple = ()
    breaklines: tuple = ()         # each entry (N, 2) ndarray
    cells: tuple = ()
    boxes: tuple = ()

    @property
    def area_km2(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return (xmax - xmin) * (ymax - ymin) / 1e6

    def contains_xy(self, pt) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= pt[0] <= xmax and ymin <= pt[1] <= ymax

    def with_box(self, box: ObstructionBox) -> "Scene":
        return replace(self, boxes=self.boxes + (box,))


@dataclass(frozen=True)
class TopologyIssue:
    cell_index: int
    level: str        # "error" (isolated) or "warning" (single LOS neighbor)
    message: str


# ---------------------------------------------------------------------------
# Scene index: flat edge table over every obstacle footprint
# ---------------------------------------------------------------------------

_KIND_BY_TYPE = {Building: "building", VegBlock: "vegetation", ObstructionBox: "box"}

_INDEX_CACHE: "weakref.WeakKeyDictionary[Scene, SceneIndex]" = weakref.WeakKeyDictionary()


def _is_convex(poly: np.ndarray) -> bool:
    e = np.roll(poly, -1, axis=0) - poly
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross >= -1e-12) or np.all(cross <= 1e-12))


class SceneIndex:
    """Derived numpy tables for one scene: obstacle edges flattened into one
    contiguous-per-owner table (so per-owner sums are reduceat slices),
    reflective facades, and diffraction-capable corner edges. Convex
    footprints take a fast single-interval path in segment queries."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self.obstacles = []    # (kind, footprint, top_height, source object)
        for b in scene.buildings:
            self.obstacles.append(("building", b.footprint, b.height, b))
        for v in scene.vegetation:
            self.obstacles.append(("vegetation", v.footprint, v.height, v))
        for x in scene.boxes:
            self.obstacles.append(("box", x.footprint(), x.height, x))

        n = len(self.obstacles)
        fa, fb, fh = [], [], []
        cx, ch, cowner = [], [], []
        polys = []
        for idx, (kind, poly, top, obj) in enumerate(self.obstacles):
            polys.append(poly)
            nxt = np.roll(poly, -1, axis=0)
            if kind == "building" or (kind == "box" and obj.reflective):
                fa.append(poly)
                fb.append(nxt)
                fh.append(np.full(len(poly), top))
            if kind == "building" or (kind == "box" and obj.around_ends):
                cx.append(poly)
                ch.append(np.full(len(poly), top))
                cowner.append(np.full(len(poly), idx))

        def cat(parts, width=None):
            if not parts:
                return np.zeros((0, width) if width else 0)
            return np.concatenate(parts)

        counts = np.array([len(p) for p in polys], dtype=int)
        self.edge_start = np.concatenate([[0], np.cumsum(counts)]).astype(int)
        ea = cat(polys, 2)
        eb = cat([np.roll(p, -1, axis=0) for p in polys], 2)
        self.edge_a = ea
        self.edge_b = eb
        self._eax, self._eay = ea[:, 0].copy(), ea[:, 1].copy()
        self._ebx, self._eby = eb[:, 0].copy(), eb[:, 1].copy()
        self._ex, self._ey = self._ebx - self._eax, self._eby - self._eay
        dy = self._eby - self._eay
        self._inv_dy = np.where(dy == 0.0, 0.0, 1.0 / np.where(dy == 0.0, 1.0, dy))
        self.obs_top = np.array([o[2] for o in self.obstacles])
        self.obs_blocks = np.array([o[0] in ("building", "box")
                                    for o in self.obstacles])
        self.obs_is_veg = np.array([o[0] == "vegetation" for o in self.obstacles])
        self.obs_convex = np.array([_is_convex(p) for p in polys]) \
            if polys else np.zeros(0, dtype=bool)

        self.facade_a = cat(fa, 2)
        self.facade_b = cat(fb, 2)
        self.facade_height = cat(fh)
        self.corner_xy = cat(cx, 2)
        self.corner_height = cat(ch)
        self.corner_owner = cat(cowner).astype(int) if cowner else np.zeros(0, int)

    @classmethod
    def for_scene(cls, scene: Scene) -> "SceneIndex":
        index = _INDEX_CACHE.get(scene)
        if index is None:
            index = cls(scene)
            _INDEX_CACHE[scene] = index
        return index

    # -- queries ------------------------------------------------------------

    def _inside_owners(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd containment of each point in each owner: (L, N) bools."""
        n = len(self.obstacles)
        x = pts[:, 0:1]
        y = pts[:, 1:2]
        cond = (self._eay[None, :] > y) != (self._eby[None, :] > y)
        xint = self._eax[None, :] + (y - self._eay[None, :]) \
            * self._ex[None, :] * self._inv_dy[None, :]
        hits = (cond & (x < xint)).astype(np.int8)
        counts = np.add.reduceat(hits, self.edge_start[:-1], axis=1)
        return (counts % 2).astype(bool)

    def batch_intervals(self, p2: np.ndarray, q2: np.ndarray) -> list:
        """Inside-intervals of L segments against every obstacle footprint.

        p2, q2 are (L, 2). Returns, per segment, a list of
        (owner index, t0, t1) fractions sorted by t0.
        """
        n_owner = len(self.obstacles)
        n_leg = len(p2)
        results: list = [[] for _ in range(n_leg)]
        if n_owner == 0 or n_leg == 0:
            return results
        d = q2 - p2                                     # (L, 2)
        apx = self._eax[None, :] - p2[:, 0:1]           # (L, E)
        apy = self._eay[None, :] - p2[:, 1:2]
        denom = d[:, 0:1] * self._ey[None, :] - d[:, 1:2] * self._ex[None, :]
        safe = np.abs(denom) > 1e-12
        inv = 1.0 / np.where(safe, denom, 1.0)
        t = (apx * self._ey[None, :] - apy * self._ex[None, :]) * inv
        u = (apx * d[:, 1:2] - apy * d[:, 0:1]) * inv
        valid = safe & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u < 1.0)
        inside_p = self._inside_owners(p2)
        inside_q = self._inside_owners(q2)
        hit_counts = np.add.reduceat(valid.astype(np.int8),
                                     self.edge_start[:-1], axis=1)
        touched = (hit_counts > 0) | inside_p | inside_q
        for li, oi in zip(*np.nonzero(touched)):
            sl = slice(self.edge_start[oi], self.edge_start[oi + 1])
            ts = np.sort(t[li, sl][valid[li, sl]])
            if self.obs_convex[oi]:
                if inside_p[li, oi]:
                    lo = 0.0
                elif ts.size:
                    lo = float(ts[0])
                else:
                    continue
                if inside_q[li, oi]:
                    hi = 1.0
                elif ts.size:
                    hi = float(ts[-1])
                else:
                    continue
                if hi - lo > 1e-12:
                    results[li].append((int(oi), lo, hi))
            else:
                cuts = np.unique(np.concatenate([[0.0, 1.0], ts]))
                mids = p2[li] + np.outer((cuts[:-1] + cuts[1:]) / 2.0, d[li])
                inside = self._midpoints_inside(mids, oi)
                run_start = None
                for k, flag in enumerate(inside):
                    if flag and run_start is None:
                        run_start = cuts[k]
                    if not flag and run_start is not None:
                        if cuts[k] - run_start > 1e-12:
                            results[li].append((int(oi), float(run_start),
                                                float(cuts[k])))
                        run_start = None
                if run_start is not None and cuts[-1] - run_start > 1e-12:
                    results[li].append((int(oi), float(run_start), float(cuts[-1])))
        for entry in results:
            entry.sort(key=lambda iv: iv[1])
        return results

    def _midpoints_inside(self, pts: np.ndarray, owner: int) -> np.ndarray:
        sl = slice(self.edge_start[owner], self.edge_start[owner + 1])
        x = pts[:, 0:1]
        y = pts[:, 1:2]
        cond = (self._eay[None, sl] > y) != (self._eby[None, sl] > y)
        xint = self._eax[None, sl] + (y - self._eay[None, sl]) \
            * self._ex[None, sl] * self._inv_dy[None, sl]
        return (np.count_nonzero(cond & (x < xint), axis=1) % 2).astype(bool)

    def crossings(self, a3, b3) -> list:
        """Ordered obstacle crossings of the 3D segment a3 -> b3."""
        a3 = np.asarray(a3, dtype=float)
        b3 = np.asarray(b3, dtype=float)
        length = float(np.linalg.norm(b3 - a3))
        if length == 0.0:
            raise ValueError("segment endpoints coincide")
        intervals = self.batch_intervals(a3[None, :2], b3[None, :2])[0]
        result = []
        for idx, t0, t1 in intervals:
            kind, _, top, obj = self.obstacles[idx]
            z0 = a3[2] + t0 * (b3[2] - a3[2])
            z1 = a3[2] + t1 * (b3[2] - a3[2])
            below = max(z0, z1) < top
            result.append(ObstacleCrossing(
                obstacle=obj, kind=kind,
                entry_s=t0 * length, exit_s=t1 * length,
                penetration_length=(t1 - t0) * length if below else 0.0,
                top_height=top))
        return result

    def hard_blocked(self, a3, b3) -> bool:
        return any(c.blocks for c in self.crossings(a3, b3))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def segment_obstacles(scene: Scene, a3, b3) -> list:
    """All obstacle crossings along the 3D segment a3 -> b3, sorted by entry.

    A building or box crossing with the segment below its top hard-blocks
    the segment; vegetation crossings carry their penetration length for
    attenuation. An empty list means free space.
    """
    return SceneIndex.for_scene(scene).crossings(a3, b3)


def _canonical_breaklines(scene: Scene):
    return sorted(scene.breaklines, key=lambda bl: tuple(np.asarray(bl).ravel()))


def total_breakline_length(scene: Scene) -> float:
    total = 0.0
    for bl in scene.breaklines:
        total += float(np.sum(np.linalg.norm(np.diff(bl, axis=0), axis=1)))
    return total


def drop_users(scene: Scene, density_per_km2: float, seed: int,
               demand_mbps: float = 15.0, antenna_gain_dbi: float = 5.0,
               height: float = 2.0) -> list:
    """Drop round(density x bounds area) users uniformly by breakline arc
    length. Deterministic per seed and invariant under breakline ordering
    (polylines are concatenated in canonical sorted order)."""
    if density_per_km2 <= 0:
        raise ValueError("density must be > 0")
    if not scene.breaklines:
        raise ValueError("scene has no breaklines to drop users on")
    n_users = int(round(density_per_km2 * scene.area_km2))
    segs_a, segs_b, lengths = [], [], []
    for bl in _canonical_breaklines(scene):
        bl = np.asarray(bl, dtype=float)
        segs_a.append(bl[:-1])
        segs_b.append(bl[1:])
        lengths.append(np.linalg.norm(bl[1:] - bl[:-1], axis=1))
    seg_a = np.concatenate(segs_a)
    seg_b = np.concatenate(segs_b)
    seg_len = np.concatenate(lengths)
    total = float(seg_len.sum())
    if total <= 0:
        raise ValueError("total breakline length is zero")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    rng = np.random.default_rng(seed)
    arcs = np.sort(rng.uniform(0.0, total, size=n_users))
    users = []
    for s in arcs:
        i = min(np.searchsorted(cum, s, side="right") - 1, len(seg_len) - 1)
        frac = (s - cum[i]) / seg_len[i]
        pos = seg_a[i] + frac * (seg_b[i] - seg_a[i])
        users.append(UserTerminal(position=pos, height=height,
                                  antenna_gain_dbi=antenna_gain_dbi,
                                  demand_mbps=demand_mbps))
    return users


def validate_topology(scene: Scene) -> list:
    """Check the LOS-neighbor placement rule between cell sites.

    A cell with no line-of-sight neighbor (any crossing with positive
    penetration breaks LOS) is flagged as an error; a cell with exactly one
    is a warning, since two neighbors are preferred for a mesh backhaul.
    """
    if not scene.cells:
        raise ValueError("scene has no cells")
    index = SceneIndex.for_scene(scene)
    issues = []
    for i, cell in enumerate(scene.cells):
        a3 = np.array([cell.position[0], cell.position[1], cell.height])
        neighbors = 0
        for j, other in enumerate(scene.cells):
            if i == j:
                continue
            b3 = np.array([other.position[0], other.position[1], other.height])
            if not any(c.penetration_length > 0 for c in index.crossings(a3, b3)):
                neighbors += 1
        if neighbors == 0:
            issues.append(TopologyIssue(i, "error", f"cell {i} has no LOS neighbor"))
        elif neighbors == 1:
            issues.append(TopologyIssue(
                i, "warning", f"cell {i} has a single LOS neighbor (two preferred)"))
    return issues


# ---------------------------------------------------------------------------
# Synthetic Manhattan generator
# ---------------------------------------------------------------------------

def generate_manhattan(blocks_x: int, blocks_y: int, street_width: float,
                       building_height: float, tree_spec: dict | None = None,
                       seed: int = 0, block_size: float = 80.0,
                       cells: str = "all") -> Scene:
    """Deterministic grid city with streets on all four sides of each block.

    Breaklines run along every street centerline. ``tree_spec`` (keys
    ``spacing``, ``radius``, ``height``) plants a tree row on both sides of
    every street, floor(length / spacing) trees per side. ``cells`` places
    lamppost sites at street intersections: "all", "alternate"
    (checkerboard), or "none". The seed is recorded for reproducibility but
    the layout itself is fully deterministic.
    """
    del seed  # reserved for randomized variants; layout is deterministic
    for name, val in [("blocks_x", blocks_x), ("blocks_y", blocks_y),
                      ("street_width", street_width),
                      ("building_height", building_height),
                      ("block_size", block_size)]:
        if val <= 0:
            raise ValueError(f"{name} must be > 0")

    pitch = block_size + street_width
    extent_x = blocks_x * pitch + street_width
    extent_y = blocks_y * pitch + street_width

    buildings = tuple(
        Building(footprint=np.array([
            [street_width + i * pitch, street_width + j * pitch],
            [street_width + i * pitch + block_size, street_width + j * pitch],
            [street_width + i * pitch + block_size, street_width + j * pitch + block_size],
            [street_width + i * pitch, street_width + j * pitch + block_size],
        ]), height=float(building_height))
        for j in range(blocks_y) for i in range(blocks_x))

    half = street_width / 2.0
    h_centers = [half + j * pitch for j in range(blocks_y + 1)]
    v_centers = [half + i * pitch for i in range(blocks_x + 1)]
    breaklines = tuple(
        [np.array([[0.0, y], [extent_x, y]]) for y in h_centers]
        + [np.array([[x, 0.0], [x, extent_y]]) for x in v_centers])

    vegetation = []
    if tree_spec is not None:
        spacing = float(tree_spec["spacing"])
        radius = float(tree_spec["radius"])
        tree_h = float(tree_spec["height"])
        if spacing <= 0 or radius <= 0 or tree_h <= 0:
            raise ValueError("tree_spec values must be > 0")
        offset = half - radius - 0.5  # trunk line, clear of the centerline
        def tree_at(cx, cy):
            fp = np.array([[cx - radius, cy - radius], [cx + radius, cy - radius],
                           [cx + radius, cy + radius], [cx - radius, cy + radius]])
            return VegBlock(footprint=fp, height=tree_h, veg_class="tree")
        for y in h_centers:
            count = int(math.floor(extent_x / spacing))
            for k in range(count):
                t = spacing / 2.0 + k * spacing
                vegetation.append(tree_at(t, y - offset))
                vegetation.append(tree_at(t, y + offset))
        for x in v_centers:
            count = int(math.floor(extent_y / spacing))
            for k in range(count):
                t = spacing / 2.0 + k * spacing
                vegetation.append(tree_at(x - offset, t))
                vegetation.append(tree_at(x + offset, t))

    cell_sites = []
    if cells not in ("all", "alternate", "none"):
        raise ValueError("cells must be one of: all, alternate, none")
    if cells != "none":
        for j, y in enumerate(h_centers):
            for i, x in enumerate(v_centers):
                if cells == "alternate" and (i + j) % 2:
                    continue
                # lamppost just off the intersection center
                cell_sites.append(CellSite(position=np.array([x + 1.0, y + 1.0])))

    return Scene(bounds=(0.0, 0.0, extent_x, extent_y),
                 buildings=buildings,
                 vegetation=tuple(vegetation),
                 breaklines=breaklines,
                 cells=tuple(cell_sites))


# ---------------------------------------------------------------------------
# Scene file I/O
# ---------------------------------------------------------------------------

_TOP_KEYS = {"bounds", "buildings", "vegetation", "breaklines", "cells"}
_BUILDING_KEYS = {"polygon", "height"}
_VEG_KEYS = {"polygon", "height", "class", "attenuation"}
_CELL_KEYS = {"position", "height", "pattern", "tx_power_dbm"}


def load_scene(document: str) -> Scene:
    """Parse and validate a scene JSON document.

    Unknown keys are rejected; every invariant violation found is reported
    at once with its entity locus.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SceneError([f"invalid JSON at line {exc.lineno}: {exc.msg}"]) from exc
    problems: list[str] = []
    if not isinstance(data, dict):
        raise SceneError(["top level must be an object"])
    for key in data:
        if key not in _TOP_KEYS:
            problems.append(f"unknown top-level key '{key}'")
    bounds = data.get("bounds")
    if (not isinstance(bounds, list) or len(bounds) != 4
            or not all(isinstance(v, (int, float)) for v in bounds)):
        problems.append("bounds must be [xmin, ymin, xmax, ymax]")
        bounds = (0.0, 0.0, 0.0, 0.0)
    elif bounds[0] >= bounds[2] or bounds[1] >= bounds[3]:
        problems.append("bounds must satisfy xmin < xmax and ymin < ymax")
    bounds = tuple(float(v) for v in bounds)

    def check_polygon(entity: str, raw) -> np.ndarray | None:
        try:
            poly = _as_poly(raw)
        except (ValueError, TypeError):
            problems.append(f"{entity}: polygon must be a list of [x, y] pairs")
            return None
        if len(poly) < 3:
            problems.append(f"{entity}: degenerate polygon ({len(poly)} vertices)")
            return None
        if not polygon_is_simple(poly):
            problems.append(f"{entity}: polygon is self-intersecting or degenerate")
            return None
        return poly

    def in_bounds(entity: str, pts: np.ndarray):
        xmin, ymin, xmax, ymax = bounds
        if (pts[:, 0].min() < xmin or pts[:, 0].max() > xmax
                or pts[:, 1].min() < ymin or pts[:, 1].max() > ymax):
            problems.append(f"{entity}: geometry outside bounds")

    buildings = []
    for i, entry in enumerate(data.get("buildings", [])):
        locus = f"buildings[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{locus}: must be an object")
            continue
        for key in entry:
            if key not in _BUILDING_KEYS:
                problems.append(f"{locus}: unknown key '{key}'")
        poly = check_polygon(locus, entry.get("polygon"))
        height = entry.get("height")
        if not isinstance(height, (int, float)) or height <= 0:
            problems.append(f"{locus}: height must be > 0")
        elif poly is not None:
            in_bounds(locus, poly)
            buildings.append(Building(footprint=poly, height=float(height)))

    vegetation = []
    for i, entry in enumerate(data.get("vegetation", [])):
        locus = f"vegetation[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{locus}: must be an object")
            continue
        for key in entry:
            if key not in _VEG_KEYS:
                problems.append(f"{locus}: unknown key '{key}'")
        poly = check_polygon(locus, entry.get("polygon"))
        height = entry.get("height")
        veg_class = entry.get("class", "tree")
        if veg_class not in VEG_CLASSES:
            problems.append(f"{locus}: class must be one of {VEG_CLASSES}")
        atten = {}
        raw_atten = entry.get("attenuation", {})
        if not isinstance(raw_atten, dict):
            problems.append(f"{locus}: attenuation must be a map frequency -> dB/m")
            raw_atten = {}
        for fkey, val in raw_atten.items():
            try:
                freq = float(fkey)
            except ValueError:
                problems.append(f"{locus}: bad attenuation frequency '{fkey}'")
                continue
            if not isinstance(val, (int, float)) or val < 0:
                problems.append(f"{locus}: attenuation at {fkey} GHz must be >= 0")
            else:
                atten[freq] = float(val)
        atten.setdefault(60.0, DEFAULT_VEG_ATTENUATION[60.0])
        if not isinstance(height, (int, float)) or height <= 0:
            problems.append(f"{locus}: height must be > 0")
        elif poly is not None:
            in_bounds(locus, poly)
            vegetation.append(VegBlock(footprint=poly, height=float(height),
                                       veg_class=veg_class,
                                       specific_attenuation_db_per_m=atten))

    breaklines = []
    for i, entry in enumerate(data.get("breaklines", [])):
        locus = f"breaklines[{i}]"
        try:
            line = _as_poly(entry)
        except (ValueError, TypeError):
            problems.append(f"{locus}: must be a list of [x, y] pairs")
            continue
        if len(line) < 2:
            problems.append(f"{locus}: needs at least 2 points")
            continue
        in_bounds(locus, line)
        breaklines.append(line)

    cell_sites = []
    for i, entry in enumerate(data.get("cells", [])):
        locus = f"cells[{i}]"
        if not isinstance(entry, dict):
            problems.append(f"{locus}: must be an object")
            continue
        for key in entry:
            if key not in _CELL_KEYS:
                problems.append(f"{locus}: unknown key '{key}'")
        pos = entry.get("position")
        if (not isinstance(pos, list) or len(pos) != 2
                or not all(isinstance(v, (int, float)) for v in pos)):
            problems.append(f"{locus}: position must be [x, y]")
            continue
        height = entry.get("height", 7.0)
        if not isinstance(height, (int, float)) or height <= 0:
            problems.append(f"{locus}: height must be > 0")
            continue
        pos = np.asarray(pos, dtype=float)
        in_bounds(locus, pos.reshape(1, 2))
        cell_sites.append(CellSite(
            position=pos, height=float(height),
            pattern_id=str(entry.get("pattern", "default")),
            tx_power_dbm=float(entry.get("tx_power_dbm", 21.5))))

    if problems:
        raise SceneError(problems)
    return Scene(bounds=bounds, buildings=tuple(buildings),
                 vegetation=tuple(vegetation), breaklines=tuple(breaklines),
                 cells=tuple(cell_sites))


def dump_scene(scene: Scene) -> str:
    """Serialize a scene back to its JSON document form."""
    doc = {
        "bounds": [round(v, 6) for v in scene.bounds],
        "buildings": [
            {"polygon": np.round(b.footprint, 6).tolist(), "height": round(b.height, 6)}
            for b in scene.buildings],
        "vegetation": [
            {"polygon": np.round(v.footprint, 6).tolist(), "height": round(v.height, 6),
             "class": v.veg_class,
             "attenuation": {f"{f:g}": round(a, 6)
                             for f, a in sorted(v.specific_attenuation_db_per_m.items())}}
            for v in scene.vegetation],
        "breaklines": [np.round(bl, 6).tolist() for bl in scene.breaklines],
        "cells": [
            {"position": np.round(c.position, 6).tolist(), "height": round(c.height, 6),
             "pattern": c.pattern_id, "tx_power_dbm": round(c.tx_power_dbm, 6)}
            for c in scene.cells],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
