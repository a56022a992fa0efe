"""Planar geometry kernels for the 2.5D scene model.

Footprints are (V, 2) float arrays in meters, implicitly closed (last vertex
connects back to the first). The heavy query, one segment against every
obstacle footprint at once, is vectorized over a flat edge table that the
scene index builds once.
"""
from __future__ import annotations

import numpy as np

_EPS = 1e-12


def wrap_angle_deg(angle):
    """Wrap an angle in degrees to (-180, 180]."""
    a = np.asarray(angle, dtype=float)
    w = (a + 180.0) % 360.0 - 180.0
    w = np.where(w == -180.0, 180.0, w)
    return float(w) if w.ndim == 0 else w


def polygon_area(poly: np.ndarray) -> float:
    """Unsigned area of a polygon via the shoelace formula [m^2]."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_cross(p1, p2, q1, q2) -> bool:
    """True if segments p1-p2 and q1-q2 properly intersect or overlap."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    # collinear overlap check
    def on(a, b, c):
        return (abs(_orient(a, b, c)) < _EPS
                and min(a[0], b[0]) - _EPS <= c[0] <= max(a[0], b[0]) + _EPS
                and min(a[1], b[1]) - _EPS <= c[1] <= max(a[1], b[1]) + _EPS)
    return on(p1, p2, q1) or on(p1, p2, q2) or on(q1, q2, p1) or on(q1, q2, p2)


def polygon_is_simple(poly: np.ndarray) -> bool:
    """True for a non-self-intersecting polygon with >= 3 distinct vertices."""
    n = len(poly)
    if n < 3:
        return False
    if polygon_area(poly) < _EPS:
        return False
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        if np.hypot(*(a2 - a1)) < _EPS:
            return False
        for j in range(i + 1, n):
            # skip edges sharing a vertex
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(a1, a2, poly[j], poly[(j + 1) % n]):
                return False
    return True


def point_in_polygon(pt, poly: np.ndarray) -> bool:
    """Even-odd containment test for a single polygon."""
    x, y = float(pt[0]), float(pt[1])
    ax, ay = poly[:, 0], poly[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    cond = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (y - ay) * (bx - ax) / (by - ay)
    hits = cond & (x < xint)
    return bool(np.count_nonzero(hits) % 2)


def mirror_point(p, a, b):
    """Mirror 2D point p across the infinite line through a and b."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    e = np.asarray(b, dtype=float) - a
    t = np.dot(p - a, e) / np.dot(e, e)
    foot = a + t * e
    return 2.0 * foot - p


def segment_edge_params(p, q, edge_a: np.ndarray, edge_b: np.ndarray):
    """Intersection parameters of segment p->q with a batch of edges.

    Returns (t, u, valid): t along p->q, u along each edge, and a mask of
    proper hits with t in [0, 1] and u in [0, 1). The half-open edge
    interval counts a crossing through a shared footprint vertex once.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(q, dtype=float) - p
    e = edge_b - edge_a
    ap = edge_a - p
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    tnum = ap[:, 0] * e[:, 1] - ap[:, 1] * e[:, 0]
    unum = ap[:, 0] * d[1] - ap[:, 1] * d[0]
    ok = np.abs(denom) > _EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(ok, tnum / denom, np.nan)
        u = np.where(ok, unum / denom, np.nan)
    valid = ok & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u < 1.0)
    return t, u, valid


def points_in_owners(pt, edge_a: np.ndarray, edge_b: np.ndarray,
                     edge_owner: np.ndarray, n_owners: int) -> np.ndarray:
    """Even-odd containment of one point against every owner polygon.

    Edges of all polygons are flattened into one table; the crossing counts
    are re-aggregated per owner. Returns a boolean array of length n_owners.
    """
    x, y = float(pt[0]), float(pt[1])
    ay, by = edge_a[:, 1], edge_b[:, 1]
    cond = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = edge_a[:, 0] + (y - ay) * (edge_b[:, 0] - edge_a[:, 0]) / (by - ay)
    hits = cond & (x < xint)
    counts = np.bincount(edge_owner[hits], minlength=n_owners)
    return (counts % 2).astype(bool)
