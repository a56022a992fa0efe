"""Specular multipath engine over a 2.5D scene.

Emitted contributions per transmitter-receiver pair:

* the direct path when no opaque prism blocks it, carrying per-obstacle
  vegetation excess loss;
* when the direct path is blocked, a bent variant over the top edge of each
  blocking prism (one knife-edge screen per blocker, losses summed);
* image-method facade reflections up to second order, each bounce charged a
  fixed loss and each sub-segment checked for blockage and vegetation;
* single diffractions around the vertical corner edges of blocking
  buildings, scored with the same knife-edge approximation.

Vegetation is never opaque: each crossing contributes the cheaper of
through-foliage attenuation and diffraction over the canopy top.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import wrap_angle_deg
from .scene import ObstacleCrossing, Scene, SceneIndex

SPEED_OF_LIGHT = 299792458.0  # [m/s]

_TRIM = 1e-7   # relative end trim when re-testing legs that touch geometry
_MIN_EDGE_Z = 0.01


def fspl(frequency_ghz: float, distance_m: float) -> float:
    """Free-space path loss 20 log10(4 pi d f / c) [dB]."""
    if frequency_ghz <= 0 or distance_m <= 0:
        raise ValueError("frequency and distance must be > 0")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_ghz * 1e9
                             / SPEED_OF_LIGHT)


def knife_edge_loss(nu) -> float:
    """Single knife-edge diffraction loss J(nu) [dB].

    J(nu) = 6.9 + 20 log10(sqrt((nu - 0.1)^2 + 1) + nu - 0.1) for nu > -0.78
    and 0 dB below; the seam at -0.78 is continuous to within 0.01 dB.
    """
    v = np.asarray(nu, dtype=float)
    arg = np.sqrt((v - 0.1) ** 2 + 1.0) + v - 0.1
    loss = np.where(v > -0.78, 6.9 + 20.0 * np.log10(np.maximum(arg, 1e-30)), 0.0)
    return float(loss) if loss.ndim == 0 else loss


def fresnel_nu(clearance_m: float, d1_m: float, d2_m: float,
               frequency_ghz: float) -> float:
    """Fresnel diffraction parameter for a screen between two path legs.

    clearance_m is the obstruction depth of the edge relative to the
    straight line (positive when the edge cuts the line).
    """
    lam = SPEED_OF_LIGHT / (frequency_ghz * 1e9)
    d1 = max(d1_m, 1e-9)
    d2 = max(d2_m, 1e-9)
    return clearance_m * math.sqrt(2.0 * (d1 + d2) / (lam * d1 * d2))


@dataclass(frozen=True)
class TraceConfig:
    frequency_ghz: float = 60.0
    max_reflection_order: int = 2
    enable_edge_diffraction: bool = True
    max_paths: int = 25
    reflection_loss_db: float = 10.0
    min_path_power_rel_db: float = 40.0
    combine_reflection_diffraction: bool = False
    enable_diffuse: bool = False   # reserved; rejected as unsupported

    def __post_init__(self):
        if self.max_reflection_order < 0:
            raise ValueError("max_reflection_order must be >= 0")
        if self.max_reflection_order > 2:
            raise ValueError("reflection orders above 2 are not supported")
        if self.reflection_loss_db < 0:
            raise ValueError("reflection_loss_db must be >= 0")
        if self.enable_diffuse:
            raise ValueError("diffuse scattering is not supported")


@dataclass(frozen=True, eq=False)
class PathContribution:
    """One specular multipath component from Tx to Rx."""

    kind: str                    # direct | over-top | corner | reflection-N | ...
    vertices: np.ndarray         # (N, 3) polyline Tx .. Rx [m]
    unfolded_length: float       # [m]
    aod_az_deg: float
    aod_el_deg: float
    aoa_az_deg: float
    aoa_el_deg: float
    fspl_db: float
    reflection_db: float = 0.0
    diffraction_db: float = 0.0
    vegetation_db: float = 0.0

    @property
    def total_isotropic_loss(self) -> float:
        return self.fspl_db + self.reflection_db + self.diffraction_db + self.vegetation_db


def _angles(direction) -> tuple:
    dx, dy, dz = direction
    az = wrap_angle_deg(math.degrees(math.atan2(dy, dx)))
    el = math.degrees(math.atan2(dz, math.hypot(dx, dy)))
    return az, el


def _make_path(kind, vertices, frequency_ghz, reflection_db=0.0,
               diffraction_db=0.0, vegetation_db=0.0) -> PathContribution:
    verts = np.asarray(vertices, dtype=float)
    legs = np.diff(verts, axis=0)
    length = float(np.sum(np.linalg.norm(legs, axis=1)))
    aod_az, aod_el = _angles(legs[0])
    aoa_az, aoa_el = _angles(-legs[-1])
    return PathContribution(
        kind=kind, vertices=verts, unfolded_length=length,
        aod_az_deg=aod_az, aod_el_deg=aod_el,
        aoa_az_deg=aoa_az, aoa_el_deg=aoa_el,
        fspl_db=fspl(frequency_ghz, length),
        reflection_db=reflection_db, diffraction_db=diffraction_db,
        vegetation_db=vegetation_db)


def vegetation_excess_loss(crossings, tx3, rx3, frequency_ghz: float) -> float:
    """Total vegetation excess loss along one straight segment [dB].

    Each vegetation crossing contributes the weaker of transmission through
    the foliage (specific attenuation times penetration length) and
    diffraction over the canopy top, modeled as a knife-edge screen at the
    crossing midpoint. Per-obstacle minima add up across obstacles.
    """
    tx3 = np.asarray(tx3, dtype=float)
    rx3 = np.asarray(rx3, dtype=float)
    length = float(np.linalg.norm(rx3 - tx3))
    total = 0.0
    for c in crossings:
        if c.kind != "vegetation":
            raise ValueError("vegetation_excess_loss expects vegetation crossings")
        through = c.obstacle.attenuation_at(frequency_ghz) * c.penetration_length
        s_mid = 0.5 * (c.entry_s + c.exit_s)
        z_mid = tx3[2] + (rx3[2] - tx3[2]) * s_mid / length
        nu = fresnel_nu(c.top_height - z_mid, s_mid, length - s_mid, frequency_ghz)
        total += min(through, knife_edge_loss(nu))
    return total


def relative_power(paths, frequency_ghz: float) -> float:
    """Isotropic received power referenced to free space at 1 m [dB].

    Non-coherent power sum over paths; -inf (no coverage) for an empty list.
    """
    if not paths:
        return float("-inf")
    losses = np.array([p.total_isotropic_loss for p in paths])
    return float(10.0 * np.log10(np.sum(10.0 ** (-losses / 10.0)))
                 + fspl(frequency_ghz, 1.0))


def write_path_dump(paths, fileobj) -> None:
    """Debug CSV, one row per contribution."""
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["kind", "vertices", "unfolded_length", "aod_az", "aod_el",
                     "aoa_az", "aoa_el", "fspl_db", "refl_db", "diff_db",
                     "veg_db", "total_db"])
    for p in paths:
        writer.writerow([
            p.kind, len(p.vertices), f"{p.unfolded_length:.3f}",
            f"{p.aod_az_deg:.2f}", f"{p.aod_el_deg:.2f}",
            f"{p.aoa_az_deg:.2f}", f"{p.aoa_el_deg:.2f}",
            f"{p.fspl_db:.2f}", f"{p.reflection_db:.2f}",
            f"{p.diffraction_db:.2f}", f"{p.vegetation_db:.2f}",
            f"{p.total_isotropic_loss:.2f}"])


def _cross2(ax, ay, bx, by):
    return ax * by - ay * bx


class RayTracer:
    """Reusable tracer for one scene and configuration.

    Mirror images of each transmitter across every facade are cached, so
    tracing one cell against many receivers stays cheap. The tracer holds
    no mutable per-call state beyond those caches and is safe to use from
    one worker at a time.
    """

    def __init__(self, scene: Scene, config: TraceConfig | None = None):
        self.scene = scene
        self.config = config or TraceConfig()
        self.index = SceneIndex.for_scene(scene)
        self._image_cache: dict = {}

    # -- leg helpers ---------------------------------------------------------

    def _legs_state(self, legs_a, legs_b):
        """(blocked, vegetation_db) per leg for a batch of path legs.

        Endpoints are trimmed a hair so legs that terminate exactly on a
        facade or corner do not collide with their own geometry.
        """
        legs_a = np.asarray(legs_a, dtype=float).reshape(-1, 3)
        legs_b = np.asarray(legs_b, dtype=float).reshape(-1, 3)
        d = legs_b - legs_a
        a = legs_a + _TRIM * d
        b = legs_b - _TRIM * d
        blocked = np.zeros(len(a), dtype=bool)
        veg = np.zeros(len(a))
        index = self.index
        freq = self.config.frequency_ghz
        for li, intervals in enumerate(index.batch_intervals(a[:, :2], b[:, :2])):
            if not intervals:
                continue
            length = float(np.linalg.norm(b[li] - a[li]))
            za, zb = a[li, 2], b[li, 2]
            for oi, t0, t1 in intervals:
                top = index.obs_top[oi]
                below = max(za + t0 * (zb - za), za + t1 * (zb - za)) < top
                if index.obs_blocks[oi]:
                    if below:
                        blocked[li] = True
                        break
                elif index.obs_is_veg[oi] and below:
                    obstacle = index.obstacles[oi][3]
                    pen = (t1 - t0) * length
                    through = obstacle.attenuation_at(freq) * pen
                    s_mid = 0.5 * (t0 + t1) * length
                    z_mid = za + (zb - za) * 0.5 * (t0 + t1)
                    nu = fresnel_nu(top - z_mid, s_mid, length - s_mid, freq)
                    veg[li] += min(through, knife_edge_loss(nu))
        return blocked, veg

    def _leg_state(self, a3, b3):
        """(blocked, vegetation_db) for one path leg, endpoints trimmed."""
        blocked, veg = self._legs_state(np.asarray(a3)[None, :],
                                        np.asarray(b3)[None, :])
        return bool(blocked[0]), float(veg[0])

    # -- mirror image caches ---------------------------------------------------

    def _images(self, tx2):
        key = (float(tx2[0]), float(tx2[1]))
        cached = self._image_cache.get(key)
        if cached is not None:
            return cached
        fa, fb = self.index.facade_a, self.index.facade_b
        if len(fa) == 0:
            img1 = np.zeros((0, 2))
            img2 = np.zeros((0, 0, 2))
        else:
            e = fb - fa
            ee = np.sum(e * e, axis=1)
            t1 = np.sum((tx2 - fa) * e, axis=1) / ee
            foot1 = fa + t1[:, None] * e
            img1 = 2.0 * foot1 - tx2
            p = img1[:, None, :]                      # (F, 1, 2)
            a = fa[None, :, :]
            ev = e[None, :, :]
            t2 = np.sum((p - a) * ev, axis=2) / ee[None, :]
            foot2 = a + t2[..., None] * ev
            img2 = 2.0 * foot2 - p                    # (F, F, 2)
        self._image_cache[key] = (img1, img2)
        return img1, img2

    # -- path families ---------------------------------------------------------

    def _direct_or_over_top(self, tx3, rx3):
        crossings = self.index.crossings(tx3, rx3)
        blockers = [c for c in crossings if c.blocks]
        veg = [c for c in crossings if c.kind == "vegetation"]
        veg_db = vegetation_excess_loss(veg, tx3, rx3, self.config.frequency_ghz)
        if not blockers:
            return [_make_path("direct", [tx3, rx3], self.config.frequency_ghz,
                               vegetation_db=veg_db)], blockers
        # bent variant over the top edge of every blocking prism; each screen
        # scored against the straight line, excess losses summed
        length = float(np.linalg.norm(rx3 - tx3))
        vertices = [tx3]
        diff_db = 0.0
        for c in sorted(blockers, key=lambda c: c.entry_s):
            s_mid = 0.5 * (c.entry_s + c.exit_s)
            frac = s_mid / length
            apex_xy = tx3[:2] + frac * (rx3[:2] - tx3[:2])
            z_line = tx3[2] + frac * (rx3[2] - tx3[2])
            nu = fresnel_nu(c.top_height - z_line, s_mid, length - s_mid,
                            self.config.frequency_ghz)
            diff_db += knife_edge_loss(nu)
            vertices.append(np.array([apex_xy[0], apex_xy[1], c.top_height]))
        vertices.append(rx3)
        path = _make_path("over-top", vertices, self.config.frequency_ghz,
                          diffraction_db=diff_db, vegetation_db=veg_db)
        return [path], blockers

    def _corner_paths(self, tx3, rx3, blockers):
        owners = {id(c.obstacle) for c in blockers}
        if not owners or len(self.index.corner_xy) == 0:
            return []
        line = rx3[:2] - tx3[:2]
        line_len = float(np.hypot(*line))
        candidates = []
        for k in range(len(self.index.corner_xy)):
            owner_idx = self.index.corner_owner[k]
            if id(self.index.obstacles[owner_idx][3]) not in owners:
                continue
            c_xy = self.index.corner_xy[k]
            h_edge = self.index.corner_height[k]
            d1h = float(np.hypot(*(c_xy - tx3[:2])))
            d2h = float(np.hypot(*(rx3[:2] - c_xy)))
            if d1h < 1e-9 or d2h < 1e-9:
                continue
            z_bend = tx3[2] + (rx3[2] - tx3[2]) * d1h / (d1h + d2h)
            z_bend = min(max(z_bend, _MIN_EDGE_Z), h_edge)
            # lateral obstruction depth of the corner edge vs the direct line
            lateral = abs(_cross2(line[0], line[1],
                                  c_xy[0] - tx3[0], c_xy[1] - tx3[1])) / line_len
            candidates.append((np.array([c_xy[0], c_xy[1], z_bend]), lateral))
        if not candidates:
            return []
        legs_a = []
        legs_b = []
        for bend, _ in candidates:
            legs_a += [tx3, bend]
            legs_b += [bend, rx3]
        blocked, veg = self._legs_state(legs_a, legs_b)
        out = []
        for k, (bend, lateral) in enumerate(candidates):
            if blocked[2 * k] or blocked[2 * k + 1]:
                continue
            d1 = float(np.linalg.norm(bend - tx3))
            d2 = float(np.linalg.norm(rx3 - bend))
            nu = fresnel_nu(lateral, d1, d2, self.config.frequency_ghz)
            out.append(_make_path("corner", [tx3, bend, rx3],
                                  self.config.frequency_ghz,
                                  diffraction_db=knife_edge_loss(nu),
                                  vegetation_db=veg[2 * k] + veg[2 * k + 1]))
        return out

    def _first_order_reflections(self, tx3, rx3):
        fa, fb = self.index.facade_a, self.index.facade_b
        if len(fa) == 0:
            return []
        img1, _ = self._images(tx3[:2])
        e = fb - fa
        d = rx3[:2] - img1
        ap = fa - img1
        denom = _cross2(d[:, 0], d[:, 1], e[:, 0], e[:, 1])
        ok = np.abs(denom) > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t = _cross2(ap[:, 0], ap[:, 1], e[:, 0], e[:, 1]) / denom
            u = _cross2(ap[:, 0], ap[:, 1], d[:, 0], d[:, 1]) / denom
        side_tx = _cross2(e[:, 0], e[:, 1], tx3[0] - fa[:, 0], tx3[1] - fa[:, 1])
        side_rx = _cross2(e[:, 0], e[:, 1], rx3[0] - fa[:, 0], rx3[1] - fa[:, 1])
        z_p = tx3[2] + t * (rx3[2] - tx3[2])
        cand = (ok & (t > 0) & (t < 1) & (u > 0) & (u < 1)
                & (side_tx * side_rx > 0)
                & (z_p > 0) & (z_p < self.index.facade_height))
        points = [np.array([img1[i, 0] + t[i] * d[i, 0],
                            img1[i, 1] + t[i] * d[i, 1], z_p[i]])
                  for i in np.nonzero(cand)[0]]
        if not points:
            return []
        legs_a = []
        legs_b = []
        for p3 in points:
            legs_a += [tx3, p3]
            legs_b += [p3, rx3]
        blocked, veg = self._legs_state(legs_a, legs_b)
        out = []
        for k, p3 in enumerate(points):
            if blocked[2 * k] or blocked[2 * k + 1]:
                continue
            out.append(_make_path("reflection-1", [tx3, p3, rx3],
                                  self.config.frequency_ghz,
                                  reflection_db=self.config.reflection_loss_db,
                                  vegetation_db=veg[2 * k] + veg[2 * k + 1]))
        return out

    def _second_order_reflections(self, tx3, rx3):
        fa, fb = self.index.facade_a, self.index.facade_b
        n_f = len(fa)
        if n_f < 2:
            return []
        img1, img2 = self._images(tx3[:2])
        e = fb - fa
        fh = self.index.facade_height
        # stage 1: last bounce on facade j, from image2[i, j] toward rx
        d = rx3[:2][None, None, :] - img2                   # (F, F, 2)
        a_j = fa[None, :, :]
        e_j = e[None, :, :]
        ap = a_j - img2
        denom = _cross2(d[..., 0], d[..., 1], e_j[..., 0], e_j[..., 1])
        ok = np.abs(denom) > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t2 = _cross2(ap[..., 0], ap[..., 1], e_j[..., 0], e_j[..., 1]) / denom
            u2 = _cross2(ap[..., 0], ap[..., 1], d[..., 0], d[..., 1]) / denom
            z2 = tx3[2] + t2 * (rx3[2] - tx3[2])
            cand = (ok & (t2 > 0) & (t2 < 1) & (u2 > 0) & (u2 < 1)
                    & (z2 > 0) & (z2 < fh[None, :]))
        side_rx = _cross2(e[:, 0], e[:, 1], rx3[0] - fa[:, 0], rx3[1] - fa[:, 1])
        cand &= ~np.eye(n_f, dtype=bool)
        candidates = []
        for i, j in zip(*np.nonzero(cand)):
            p2_xy = img2[i, j] + t2[i, j] * d[i, j]
            p2 = np.array([p2_xy[0], p2_xy[1], z2[i, j]])
            # stage 2: first bounce on facade i, from image1[i] toward p2
            dv = p2_xy - img1[i]
            apv = fa[i] - img1[i]
            den = _cross2(dv[0], dv[1], e[i, 0], e[i, 1])
            if abs(den) < 1e-12:
                continue
            t1 = _cross2(apv[0], apv[1], e[i, 0], e[i, 1]) / den
            u1 = _cross2(apv[0], apv[1], dv[0], dv[1]) / den
            if not (0 < t1 < 1 and 0 < u1 < 1):
                continue
            z1 = tx3[2] + t1 * (p2[2] - tx3[2])
            if not (0 < z1 < fh[i]):
                continue
            p1 = np.array([img1[i, 0] + t1 * dv[0], img1[i, 1] + t1 * dv[1], z1])
            side_tx_i = _cross2(e[i, 0], e[i, 1], tx3[0] - fa[i, 0], tx3[1] - fa[i, 1])
            side_p2_i = _cross2(e[i, 0], e[i, 1], p2[0] - fa[i, 0], p2[1] - fa[i, 1])
            if side_tx_i * side_p2_i <= 0:
                continue
            side_p1_j = _cross2(e[j, 0], e[j, 1], p1[0] - fa[j, 0], p1[1] - fa[j, 1])
            if side_p1_j * side_rx[j] <= 0:
                continue
            candidates.append((p1, p2))
        if not candidates:
            return []
        legs_a = []
        legs_b = []
        for p1, p2 in candidates:
            legs_a += [tx3, p1, p2]
            legs_b += [p1, p2, rx3]
        blocked, veg = self._legs_state(legs_a, legs_b)
        out = []
        for k, (p1, p2) in enumerate(candidates):
            if blocked[3 * k] or blocked[3 * k + 1] or blocked[3 * k + 2]:
                continue
            out.append(_make_path("reflection-2", [tx3, p1, p2, rx3],
                                  self.config.frequency_ghz,
                                  reflection_db=2 * self.config.reflection_loss_db,
                                  vegetation_db=veg[3 * k] + veg[3 * k + 1] + veg[3 * k + 2]))
        return out

    def _combined_paths(self, tx3, rx3):
        """First-order reflection combined with one corner diffraction."""
        out = []
        out.extend(self._reflect_then_diffract(tx3, rx3, reflect_first=True))
        out.extend(self._reflect_then_diffract(rx3, tx3, reflect_first=False))
        return out

    def _reflect_then_diffract(self, src3, dst3, reflect_first: bool):
        fa, fb = self.index.facade_a, self.index.facade_b
        if len(fa) == 0 or len(self.index.corner_xy) == 0:
            return []
        img1, _ = self._images(src3[:2])
        e = fb - fa
        out = []
        for i in range(len(fa)):
            virt = np.array([img1[i, 0], img1[i, 1], src3[2]])
            blockers = [c for c in self.index.crossings(virt, dst3) if c.blocks]
            owners = {id(c.obstacle) for c in blockers}
            if not owners:
                continue
            line = dst3[:2] - virt[:2]
            line_len = float(np.hypot(*line))
            for k in range(len(self.index.corner_xy)):
                owner_idx = self.index.corner_owner[k]
                if id(self.index.obstacles[owner_idx][3]) not in owners:
                    continue
                c_xy = self.index.corner_xy[k]
                h_edge = self.index.corner_height[k]
                d1h = float(np.hypot(*(c_xy - virt[:2])))
                d2h = float(np.hypot(*(dst3[:2] - c_xy)))
                if d1h < 1e-9 or d2h < 1e-9:
                    continue
                z_bend = virt[2] + (dst3[2] - virt[2]) * d1h / (d1h + d2h)
                z_bend = min(max(z_bend, _MIN_EDGE_Z), h_edge)
                bend = np.array([c_xy[0], c_xy[1], z_bend])
                # reflection point on facade i along the unfolded leg virt->bend
                dv = bend[:2] - virt[:2]
                apv = fa[i] - virt[:2]
                den = _cross2(dv[0], dv[1], e[i, 0], e[i, 1])
                if abs(den) < 1e-12:
                    continue
                t = _cross2(apv[0], apv[1], e[i, 0], e[i, 1]) / den
                u = _cross2(apv[0], apv[1], dv[0], dv[1]) / den
                if not (0 < t < 1 and 0 < u < 1):
                    continue
                z_p = virt[2] + t * (bend[2] - virt[2])
                if not (0 < z_p < self.index.facade_height[i]):
                    continue
                side_src = _cross2(e[i, 0], e[i, 1], src3[0] - fa[i, 0], src3[1] - fa[i, 1])
                side_bend = _cross2(e[i, 0], e[i, 1], bend[0] - fa[i, 0], bend[1] - fa[i, 1])
                if side_src * side_bend <= 0:
                    continue
                p3 = np.array([virt[0] + t * dv[0], virt[1] + t * dv[1], z_p])
                legs = ((src3, p3), (p3, bend), (bend, dst3))
                veg_total = 0.0
                blocked_any = False
                for leg_a, leg_b in legs:
                    blocked, veg = self._leg_state(leg_a, leg_b)
                    if blocked:
                        blocked_any = True
                        break
                    veg_total += veg
                if blocked_any:
                    continue
                lateral = abs(_cross2(line[0], line[1], c_xy[0] - virt[0],
                                      c_xy[1] - virt[1])) / line_len
                d1 = float(np.linalg.norm(bend - virt))
                d2 = float(np.linalg.norm(dst3 - bend))
                nu = fresnel_nu(lateral, d1, d2, self.config.frequency_ghz)
                verts = [src3, p3, bend, dst3]
                kind = "reflection-1+corner"
                if not reflect_first:
                    verts = verts[::-1]
                    kind = "corner+reflection-1"
                out.append(_make_path(kind, verts, self.config.frequency_ghz,
                                      reflection_db=self.config.reflection_loss_db,
                                      diffraction_db=knife_edge_loss(nu),
                                      vegetation_db=veg_total))
        return out

    # -- entry point -----------------------------------------------------------

    def trace(self, tx3, rx3) -> list:
        tx3 = np.asarray(tx3, dtype=float)
        rx3 = np.asarray(rx3, dtype=float)
        if np.array_equal(tx3, rx3):
            raise ValueError("tx and rx coincide")
        for name, p in (("tx", tx3), ("rx", rx3)):
            if not self.scene.contains_xy(p[:2]):
                raise ValueError(f"{name} endpoint outside scene bounds")
        paths, blockers = self._direct_or_over_top(tx3, rx3)
        if self.config.enable_edge_diffraction and blockers:
            paths.extend(self._corner_paths(tx3, rx3, blockers))
        if self.config.max_reflection_order >= 1:
            paths.extend(self._first_order_reflections(tx3, rx3))
        if self.config.max_reflection_order >= 2:
            paths.extend(self._second_order_reflections(tx3, rx3))
        if self.config.combine_reflection_diffraction:
            paths.extend(self._combined_paths(tx3, rx3))
        paths.sort(key=lambda p: (p.total_isotropic_loss, p.unfolded_length, p.kind))
        if paths:
            cutoff = paths[0].total_isotropic_loss + self.config.min_path_power_rel_db
            paths = [p for p in paths if p.total_isotropic_loss <= cutoff]
        return paths[:self.config.max_paths]


def trace_paths(scene: Scene, tx3, rx3, config: TraceConfig | None = None) -> list:
    """Trace every specular contribution between two 3D points."""
    return RayTracer(scene, config).trace(tx3, rx3)
