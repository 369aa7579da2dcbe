"""Planar convex-polygon primitives used by the 2.5-D world model.

Polygons are sequences of (x, y) vertices in counter-clockwise order.
Everything here is pure and deterministic; no numpy, the polygons involved
are tiny (4-8 vertices).
"""

from __future__ import annotations

import math

Point = tuple[float, float]
Polygon = tuple[Point, ...]

EPS = 1e-9


def rotate(p: Point, yaw: float) -> Point:
    c, s = math.cos(yaw), math.sin(yaw)
    return (p[0] * c - p[1] * s, p[0] * s + p[1] * c)


def transform(poly: Polygon, x: float, y: float, yaw: float) -> Polygon:
    """Rotate a local polygon by yaw and translate it to (x, y)."""
    return tuple((rx + x, ry + y) for rx, ry in (rotate(p, yaw) for p in poly))


def rectangle(w: float, d: float) -> Polygon:
    """Axis-aligned w-by-d rectangle centered on the origin, CCW."""
    hw, hd = w / 2.0, d / 2.0
    return ((-hw, -hd), (hw, -hd), (hw, hd), (-hw, hd))


def polygon_area(poly: Polygon) -> float:
    s = 0.0
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return abs(s) / 2.0


def centroid(poly: Polygon) -> Point:
    sx = sum(p[0] for p in poly)
    sy = sum(p[1] for p in poly)
    return (sx / len(poly), sy / len(poly))


def _project(poly: Polygon, axis: Point) -> tuple[float, float]:
    dots = [p[0] * axis[0] + p[1] * axis[1] for p in poly]
    return min(dots), max(dots)


def polygons_overlap(a: Polygon, b: Polygon, margin: float = 0.0) -> bool:
    """Separating-axis overlap test for two convex polygons.

    Touching boundaries (within EPS) do not count as overlap, so abutting
    footprints are legal.  A positive margin inflates both shapes.
    """
    for poly in (a, b):
        n = len(poly)
        for i in range(n):
            ex = poly[(i + 1) % n][0] - poly[i][0]
            ey = poly[(i + 1) % n][1] - poly[i][1]
            axis = (-ey, ex)
            norm = math.hypot(*axis)
            if norm < EPS:
                continue
            axis = (axis[0] / norm, axis[1] / norm)
            amin, amax = _project(a, axis)
            bmin, bmax = _project(b, axis)
            if amax + margin <= bmin + EPS or bmax + margin <= amin + EPS:
                return False
    return True


def point_in_polygon(p: Point, poly: Polygon, tol: float = EPS) -> bool:
    """Point containment for a convex CCW polygon (boundary counts as inside)."""
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        cross = (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1)
        if cross < -tol:
            return False
    return True


def polygon_contains(outer: Polygon, inner: Polygon, tol: float = EPS) -> bool:
    """True when every vertex of inner lies inside the convex outer polygon."""
    return all(point_in_polygon(p, outer, tol) for p in inner)


def clip_polygon(subject: Polygon, clip: Polygon) -> Polygon:
    """Sutherland-Hodgman intersection of two convex CCW polygons."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            return ()
        cx1, cy1 = clip[i]
        cx2, cy2 = clip[(i + 1) % n]

        def inside(p: Point) -> bool:
            return (cx2 - cx1) * (p[1] - cy1) - (cy2 - cy1) * (p[0] - cx1) >= -EPS

        def intersect(a: Point, b: Point) -> Point:
            dx, dy = b[0] - a[0], b[1] - a[1]
            denom = (cx2 - cx1) * dy - (cy2 - cy1) * dx
            if abs(denom) < EPS:
                return b
            t = -((cx2 - cx1) * (a[1] - cy1) - (cy2 - cy1) * (a[0] - cx1)) / denom
            return (a[0] + t * dx, a[1] + t * dy)

        result: list[Point] = []
        for j, cur in enumerate(output):
            prev = output[j - 1]
            if inside(cur):
                if not inside(prev):
                    result.append(intersect(prev, cur))
                result.append(cur)
            elif inside(prev):
                result.append(intersect(prev, cur))
        output = result
    return tuple(output)


def overlap_area(a: Polygon, b: Polygon) -> float:
    inter = clip_polygon(a, b)
    if len(inter) < 3:
        return 0.0
    return polygon_area(inter)


def dist_point_segment(p: Point, a: Point, b: Point) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    l2 = dx * dx + dy * dy
    if l2 < EPS:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / l2))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def dist_to_boundary(p: Point, poly: Polygon) -> float:
    n = len(poly)
    return min(dist_point_segment(p, poly[i], poly[(i + 1) % n]) for i in range(n))


def segment_prism_interval(
    a: tuple[float, float, float],
    b: tuple[float, float, float],
    poly: Polygon,
    z0: float,
    z1: float,
) -> tuple[float, float] | None:
    """Parameter interval of segment a->b inside a convex vertical prism.

    The prism is poly extruded from z0 to z1.  Returns (tmin, tmax) with
    0 <= tmin < tmax <= 1, or None when the segment misses the prism.
    Uses Cyrus-Beck clipping against the edge half-planes plus the z slab.
    """
    tmin, tmax = 0.0, 1.0
    dx, dy, dz = b[0] - a[0], b[1] - a[1], b[2] - a[2]

    # z slab
    if abs(dz) < EPS:
        if not (z0 - EPS <= a[2] <= z1 + EPS):
            return None
    else:
        t_lo = (z0 - a[2]) / dz
        t_hi = (z1 - a[2]) / dz
        if t_lo > t_hi:
            t_lo, t_hi = t_hi, t_lo
        tmin = max(tmin, t_lo)
        tmax = min(tmax, t_hi)
        if tmin >= tmax:
            return None

    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        # inward normal of a CCW edge
        nx, ny = -(y2 - y1), (x2 - x1)
        denom = nx * dx + ny * dy
        num = nx * (x1 - a[0]) + ny * (y1 - a[1])
        if abs(denom) < EPS:
            if num > EPS:  # parallel and outside this half-plane
                return None
            continue
        t = num / denom
        if denom > 0:  # entering
            tmin = max(tmin, t)
        else:  # leaving
            tmax = min(tmax, t)
        if tmin >= tmax - EPS:
            return None
    if tmax - tmin < 1e-7:
        return None
    return (tmin, tmax)
