"""Shared scene builders and independent oracles for the test suite."""

from __future__ import annotations

import math

import pytest

from geosym import geometry as geo
from geosym.world import (
    AgentModel,
    ObjectModel,
    Pose,
    Region,
    Scene,
    Surface,
    validate_scene,
)


def rect_at(cx: float, cy: float, w: float, d: float):
    return geo.transform(geo.rectangle(w, d), cx, cy, 0.0)


def make_robot(base=(0.0, 0.0)) -> AgentModel:
    return AgentModel(
        name="bot",
        kind="robot",
        base=base,
        eye_points=(
            (base[0], base[1], 1.35),
            (base[0], base[1], 1.45),
            (base[0] + 0.1, base[1], 1.5),
            (base[0] + 0.2, base[1], 1.55),
        ),
        reach_radii=(0.9, 1.1, 1.3, 1.5),
        reach_bands=((0.3, 1.3), (0.25, 1.4), (0.2, 1.5), (0.15, 1.6)),
        hand_home=(base[0], base[1], 1.1),
    )


def make_human(base=(2.0, 0.0)) -> AgentModel:
    return AgentModel(
        name="person",
        kind="human",
        base=base,
        eye_points=(
            (base[0], base[1], 1.5),
            (base[0] - 0.1, base[1], 1.45),
            (base[0] - 0.2, base[1], 1.35),
            (base[0] - 0.3, base[1], 1.2),
        ),
        reach_radii=(0.6, 0.75, 0.9, 1.05),
        reach_bands=((0.7, 1.6), (0.6, 1.7), (0.5, 1.75), (0.3, 1.8)),
        hand_home=(base[0], base[1], 1.0),
    )


def box(name, x, y, w=0.2, d=0.2, h=0.2, z=0.5, support=("on", "table"), **kw) -> ObjectModel:
    return ObjectModel(
        name=name, footprint=geo.rectangle(w, d), height=h, pose=Pose(x, y, z),
        support=support, **kw,
    )


def table_scene(objects=(), zones=(), agents=None) -> Scene:
    scene = Scene(
        surfaces=(Surface("table", rect_at(0.8, 0.0, 1.6, 1.2), 0.5),),
        objects=tuple(objects),
        agents=tuple(agents) if agents is not None else (make_robot(), make_human()),
        zones=tuple(zones),
    )
    validate_scene(scene)
    return scene


# ---------------------------------------------------------------------------
# Independent visibility oracle (own segment/prism intersection code)


def _seg_hits_prism(a, b, poly, z0, z1) -> bool:
    """Does segment a->b pass through the prism's interior (not endpoint-grazing)?

    Exact half-plane interval clipping, written independently of the library:
    each CCW edge contributes constraint dot(inward_normal, P(t) - vertex) >= 0,
    the z slab two more; blocked iff the surviving parameter interval is
    non-empty and not confined to either endpoint.
    """
    d = (b[0] - a[0], b[1] - a[1], b[2] - a[2])
    constraints = []  # (c, m): require c + t*m >= 0
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        nx, ny = -(y2 - y1), (x2 - x1)  # inward for CCW
        constraints.append((nx * (a[0] - x1) + ny * (a[1] - y1), nx * d[0] + ny * d[1]))
    constraints.append((a[2] - z0, d[2]))
    constraints.append((z1 - a[2], -d[2]))
    lo, hi = 0.0, 1.0
    for c, m in constraints:
        if abs(m) < 1e-12:
            if c < -1e-12:
                return False
        else:
            t = -c / m
            if m > 0:
                lo = max(lo, t)
            else:
                hi = min(hi, t)
        if lo > hi:
            return False
    return hi >= 1e-6 and lo <= 1.0 - 1e-6


def oracle_visible_fraction(scene: Scene, obj_name: str, agent_name: str, effort: int,
                            sample_pts) -> float:
    """Best single-eye fraction of the given sample points with clear sight."""
    agent = scene.agent(agent_name)
    skip = {obj_name, agent_name}
    best = 0.0
    for e in range(effort):
        eye = agent.eye_points[e]
        seen = 0
        for p in sample_pts:
            blocked = False
            for other in scene.objects:
                if other.name in skip:
                    continue
                if _seg_hits_prism(eye, p, other.world_footprint(), *other.z_interval()):
                    blocked = True
                    break
            if not blocked:
                for surf in scene.surfaces:
                    if _seg_hits_prism(eye, p, surf.polygon, surf.z - 0.04, surf.z):
                        blocked = True
                        break
            if not blocked:
                seen += 1
        best = max(best, seen / max(len(sample_pts), 1))
    return best


@pytest.fixture
def robot():
    return make_robot()


@pytest.fixture
def human():
    return make_human()
