"""Simplified 2.5-D geometric world.

Objects are convex prisms (footprint polygon + height) sitting on surfaces,
inside containers, or in an agent's gripper.  Agents have effort-indexed reach
radii and eye points (effort 1 = current posture, 4 = maximum modeled effort).
Visibility is ray-sampled over the object's exposed faces; the module derives
the shared symbolic facts (visible / reachable / on / inside / coveredBy) from
geometry alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from . import geometry as geo
from .geometry import Point, Polygon
from .symbolic import Literal

EFFORT_LEVELS = (1, 2, 3, 4)

#: canonical grasp set: two opposed side pairs, approach direction in the
#: object's local frame (the hand sits on that side of the object)
CANONICAL_GRASPS = (
    ("gx+", (1.0, 0.0)),
    ("gx-", (-1.0, 0.0)),
    ("gy+", (0.0, 1.0)),
    ("gy-", (0.0, -1.0)),
)

PROBE_SIZE = 0.06  # hand probe footprint edge for swept-path checks (m)
PROBE_HEIGHT = 0.08
SURFACE_THICKNESS = 0.04
GRASP_CLEARANCE = 0.04  # free gap the hand needs beside the object (m)


class SceneError(Exception):
    """Violated scene invariant or unknown entity."""


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float  # base height
    yaw: float = 0.0


@dataclass(frozen=True)
class Grasp:
    gid: str
    approach: Point  # unit direction in the object's local frame


@dataclass(frozen=True)
class Surface:
    name: str
    polygon: Polygon  # world coordinates
    z: float  # top plane height


@dataclass(frozen=True)
class ObjectModel:
    name: str
    footprint: Polygon  # local, centered, CCW
    height: float
    pose: Pose
    grasps: tuple[Grasp, ...] = tuple(Grasp(g, a) for g, a in CANONICAL_GRASPS)
    heavy: bool = False
    container: bool = False
    open_top: bool = True
    wall: float = 0.03  # wall/floor thickness when container
    # exactly one support relation: ("on", name) | ("inside", name) | ("gripper", agent)
    support: tuple[str, str] = ("on", "")

    def world_footprint(self, pose: Pose | None = None) -> Polygon:
        p = pose or self.pose
        return geo.transform(self.footprint, p.x, p.y, p.yaw)

    def z_interval(self, pose: Pose | None = None) -> tuple[float, float]:
        p = pose or self.pose
        return (p.z, p.z + self.height)

    def center(self) -> tuple[float, float, float]:
        cx, cy = geo.centroid(self.world_footprint())
        return (cx, cy, self.pose.z + self.height / 2.0)

    def inner_footprint(self, pose: Pose | None = None) -> Polygon:
        """Cavity polygon of a container (outer footprint shrunk by the wall)."""
        c = geo.centroid(self.footprint)
        shrunk = []
        for px, py in self.footprint:
            d = math.dist((px, py), c)
            f = min(1.0, self.wall / d) if d > 1e-9 else 0.0
            shrunk.append((px + (c[0] - px) * f, py + (c[1] - py) * f))
        p = pose or self.pose
        return geo.transform(tuple(shrunk), p.x, p.y, p.yaw)


@dataclass(frozen=True)
class AgentModel:
    name: str
    kind: str  # "robot" | "human"
    base: Point
    eye_points: tuple[tuple[float, float, float], ...]  # one per effort level
    reach_radii: tuple[float, float, float, float]  # strictly increasing
    reach_bands: tuple[tuple[float, float], ...]  # (zmin, zmax) per effort
    hand_home: tuple[float, float, float] = (0.0, 0.0, 0.9)
    gripper: tuple[str, str] | None = None  # (object, grasp id)

    def __post_init__(self) -> None:
        r = self.reach_radii
        if not (r[0] < r[1] < r[2] < r[3]):
            raise SceneError(f"agent {self.name}: reach radii must be strictly increasing")
        if len(self.eye_points) != 4 or len(self.reach_bands) != 4:
            raise SceneError(f"agent {self.name}: need one eye point and band per effort")


@dataclass(frozen=True)
class Region:
    """A horizontal placement region: a surface top, an object top, or a zone.

    Virtual zones (show/give space) hold no weight; an object 'placed' there
    stays in the gripper.
    """

    name: str
    polygon: Polygon
    z: float
    virtual: bool = False
    owner: str | None = None


@dataclass(frozen=True)
class Scene:
    surfaces: tuple[Surface, ...]
    objects: tuple[ObjectModel, ...]
    agents: tuple[AgentModel, ...]
    zones: tuple[Region, ...] = ()
    version: int = 0

    def obj(self, name: str) -> ObjectModel:
        for o in self.objects:
            if o.name == name:
                return o
        raise SceneError(f"unknown object {name!r}")

    def surface(self, name: str) -> Surface:
        for s in self.surfaces:
            if s.name == name:
                return s
        raise SceneError(f"unknown surface {name!r}")

    def agent(self, name: str) -> AgentModel:
        for a in self.agents:
            if a.name == name:
                return a
        raise SceneError(f"unknown agent {name!r}")

    def robot(self) -> AgentModel:
        for a in self.agents:
            if a.kind == "robot":
                return a
        raise SceneError("scene has no robot agent")

    def region(self, name: str) -> Region:
        for z in self.zones:
            if z.name == name:
                return z
        for s in self.surfaces:
            if s.name == name:
                return Region(s.name, s.polygon, s.z, owner=s.name)
        for o in self.objects:
            if o.name == name:
                return Region(o.name, o.world_footprint(), o.pose.z + o.height, owner=o.name)
        raise SceneError(f"unknown region {name!r}")

    def with_object(self, obj: ObjectModel) -> "Scene":
        objs = tuple(obj if o.name == obj.name else o for o in self.objects)
        return replace(self, objects=objs)

    def with_agent(self, agent: AgentModel) -> "Scene":
        agents = tuple(agent if a.name == agent.name else a for a in self.agents)
        return replace(self, agents=agents)

    def with_version(self, version: int) -> "Scene":
        return replace(self, version=version)


def validate_scene(scene: Scene) -> None:
    """Check the scene invariants: disjoint footprints, single support."""
    names = [s.name for s in scene.surfaces] + [o.name for o in scene.objects] + [
        a.name for a in scene.agents
    ]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise SceneError(f"duplicate scene names: {sorted(dupes)}")
    for i, a in enumerate(scene.objects):
        kind, target = a.support
        if kind not in ("on", "inside", "gripper") or not target:
            raise SceneError(f"object {a.name}: malformed support {a.support}")
        for b in scene.objects[i + 1 :]:
            if a.support == ("inside", b.name) or b.support == ("inside", a.name):
                continue
            az, bz = a.z_interval(), b.z_interval()
            if az[0] < bz[1] - geo.EPS and bz[0] < az[1] - geo.EPS:
                if geo.polygons_overlap(a.world_footprint(), b.world_footprint()):
                    raise SceneError(
                        f"objects {a.name} and {b.name} overlap at the same height"
                    )


# ---------------------------------------------------------------------------
# Occlusion


def _segment_blocked_by_object(seg_a, seg_b, obj: ObjectModel) -> bool:
    z0, z1 = obj.z_interval()
    interval = geo.segment_prism_interval(seg_a, seg_b, obj.world_footprint(), z0, z1)
    if interval is None:
        return False
    tmin, tmax = interval
    # ignore grazing contact at either endpoint
    if tmax < 1e-6 or tmin > 1.0 - 1e-6:
        return False
    if not obj.container:
        return True
    # container: blocked only if the segment passes through wall/floor material
    inner = obj.inner_footprint()
    cavity_z0 = z0 + obj.wall
    top_open = obj.open_top
    n = 32
    for i in range(n + 1):
        t = tmin + (tmax - tmin) * i / n
        q = (
            seg_a[0] + (seg_b[0] - seg_a[0]) * t,
            seg_a[1] + (seg_b[1] - seg_a[1]) * t,
            seg_a[2] + (seg_b[2] - seg_a[2]) * t,
        )
        in_cavity = geo.point_in_polygon((q[0], q[1]), inner) and q[2] >= cavity_z0
        if not top_open and q[2] > z1 - obj.wall:
            in_cavity = False
        if not in_cavity:
            return True
    return False


def _segment_blocked_by_surface(seg_a, seg_b, surf: Surface) -> bool:
    interval = geo.segment_prism_interval(
        seg_a, seg_b, surf.polygon, surf.z - SURFACE_THICKNESS, surf.z
    )
    if interval is None:
        return False
    tmin, tmax = interval
    return tmax >= 1e-6 and tmin <= 1.0 - 1e-6


def segment_occluded(
    scene: Scene,
    eye: tuple[float, float, float],
    point: tuple[float, float, float],
    skip: frozenset[str] = frozenset(),
) -> bool:
    """True when the eye->point segment hits any object or surface not in skip."""
    for obj in scene.objects:
        if obj.name in skip:
            continue
        if _segment_blocked_by_object(eye, point, obj):
            return True
    for surf in scene.surfaces:
        if surf.name in skip:
            continue
        if _segment_blocked_by_surface(eye, point, surf):
            return True
    return False


# ---------------------------------------------------------------------------
# Visibility


def sample_points(obj: ObjectModel, budget: int = 64) -> list[tuple[float, float, float]]:
    """Deterministic sample points over the exposed faces (sides + top).

    The budget is split across faces proportionally to face area; each face is
    covered by a regular grid of cell centers, so the actual count is close to
    (not exactly) the budget.
    """
    fp = obj.world_footprint()
    n = len(fp)
    z0, z1 = obj.z_interval()
    h = obj.height
    edges = [(fp[i], fp[(i + 1) % n]) for i in range(n)]
    side_areas = [math.dist(a, b) * h for a, b in edges]
    top_area = geo.polygon_area(fp)
    total = sum(side_areas) + top_area
    points: list[tuple[float, float, float]] = []
    for (a, b), area in zip(edges, side_areas):
        nf = max(1, round(budget * area / total))
        elen = math.dist(a, b)
        rows = max(1, round(math.sqrt(nf * h / max(elen, 1e-6))))
        cols = max(1, math.ceil(nf / rows))
        for r in range(rows):
            zc = z0 + h * (r + 0.5) / rows
            for c in range(cols):
                t = (c + 0.5) / cols
                points.append((a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, zc))
    nf = max(1, round(budget * top_area / total))
    xs = [p[0] for p in fp]
    ys = [p[1] for p in fp]
    minx, maxx, miny, maxy = min(xs), max(xs), min(ys), max(ys)
    side = max(1, round(math.sqrt(nf)))
    for i in range(side):
        for j in range(side):
            px = minx + (maxx - minx) * (i + 0.5) / side
            py = miny + (maxy - miny) * (j + 0.5) / side
            if geo.point_in_polygon((px, py), fp):
                points.append((px, py, z1))
    return points


def _enclosing_closed_container(scene: Scene, obj: ObjectModel) -> bool:
    seen = set()
    cur = obj
    while cur.support[0] == "inside" and cur.name not in seen:
        seen.add(cur.name)
        parent = scene.obj(cur.support[1])
        if parent.container and not parent.open_top:
            return True
        cur = parent
    return False


def visibility_fraction(
    scene: Scene,
    obj_name: str,
    agent_name: str,
    effort: int,
    budget: int = 64,
) -> float:
    """Fraction of sampled surface points the agent can see at the given effort.

    The agent may use any posture up to the effort level, so the fraction is
    the best single-posture fraction over eye points 1..effort; this makes the
    result non-decreasing in effort by construction.
    """
    obj = scene.obj(obj_name)
    agent = scene.agent(agent_name)
    if _enclosing_closed_container(scene, obj):
        return 0.0
    points = sample_points(obj, budget)
    if not points:
        return 0.0
    skip = frozenset({obj_name, agent_name})
    best = 0.0
    for e in range(effort):
        eye = agent.eye_points[e]
        seen = sum(
            1 for p in points if not segment_occluded(scene, eye, p, skip)
        )
        best = max(best, seen / len(points))
        if best == 1.0:
            break
    return best


def min_visible_effort(
    scene: Scene, obj_name: str, agent_name: str, threshold: float, budget: int = 64
) -> int | None:
    for e in EFFORT_LEVELS:
        if visibility_fraction(scene, obj_name, agent_name, e, budget) >= threshold:
            return e
    return None


# ---------------------------------------------------------------------------
# Reach


def reach_feasible(
    scene: Scene,
    point: tuple[float, float, float],
    agent_name: str,
    effort: int,
) -> bool:
    """True iff some posture at effort <= E covers the point.

    A posture covers the point when the horizontal distance from the agent
    base is within that effort's radius and the height is inside its band.
    """
    agent = scene.agent(agent_name)
    d = math.dist(agent.base, (point[0], point[1]))
    for e in range(effort):
        zmin, zmax = agent.reach_bands[e]
        if d <= agent.reach_radii[e] + geo.EPS and zmin - geo.EPS <= point[2] <= zmax + geo.EPS:
            return True
    return False


def min_reach_effort(
    scene: Scene, point: tuple[float, float, float], agent_name: str
) -> int | None:
    for e in EFFORT_LEVELS:
        if reach_feasible(scene, point, agent_name, e):
            return e
    return None


# ---------------------------------------------------------------------------
# Placement and collision


def collision_free(
    scene: Scene,
    obj_name: str,
    pose: Pose,
    ignore: frozenset[str] = frozenset(),
) -> bool:
    """Footprint/height-interval disjointness against all other objects."""
    obj = scene.obj(obj_name)
    fp = obj.world_footprint(pose)
    z0, z1 = pose.z, pose.z + obj.height
    for other in scene.objects:
        if other.name == obj_name or other.name in ignore:
            continue
        oz0, oz1 = other.z_interval()
        if z0 < oz1 - geo.EPS and oz0 < z1 - geo.EPS:
            if geo.polygons_overlap(fp, other.world_footprint()):
                return False
    return True


def yaw_samples(count: int = 8) -> tuple[float, ...]:
    return tuple(i * 2.0 * math.pi / count for i in range(count))


def _occlusion_caused(scene: Scene, obj: ObjectModel, pose: Pose) -> int:
    """How many (other object, agent) sight lines the hypothetical pose blocks."""
    ghost = replace(obj, pose=pose)
    count = 0
    for other in scene.objects:
        if other.name == obj.name:
            continue
        target = other.center()
        target = (target[0], target[1], other.pose.z + other.height)
        for agent in scene.agents:
            if _segment_blocked_by_object(agent.eye_points[0], target, ghost):
                count += 1
    return count


def placement_candidates(
    scene: Scene,
    obj_name: str,
    region: Region,
    step: float = 0.05,
    yaws: tuple[float, ...] | None = None,
    preferred: Point | None = None,
) -> list[tuple[Point, int]]:
    """Grid-sampled placement positions inside a region, best-scored first.

    A grid position survives when at least one tested orientation keeps the
    footprint inside the region without overlapping existing footprints.
    Ordering is the ascending lexicographic score (distance to the preferred
    point, sight lines occluded, distance to the region edge), grid order
    breaking ties.
    """
    obj = scene.obj(obj_name)
    yaws = yaws if yaws is not None else yaw_samples()
    xs = [p[0] for p in region.polygon]
    ys = [p[1] for p in region.polygon]
    minx, maxx, miny, maxy = min(xs), max(xs), min(ys), max(ys)
    if preferred is None:
        preferred = geo.centroid(region.polygon)
    nx = int(round((maxx - minx) / step))
    ny = int(round((maxy - miny) / step))
    scored: list[tuple[tuple, Point, int]] = []
    cid = 0
    ignore = frozenset({region.owner}) if region.owner else frozenset()
    for iy in range(ny + 1):
        y = miny + iy * step
        for ix in range(nx + 1):
            x = minx + ix * step
            cid += 1
            pose_yaw = None
            for yaw in yaws:
                pose = Pose(x, y, region.z, yaw)
                fp = obj.world_footprint(pose)
                if not geo.polygon_contains(region.polygon, fp, tol=1e-7):
                    continue
                if not collision_free(scene, obj_name, pose, ignore):
                    continue
                pose_yaw = yaw
                break
            if pose_yaw is None:
                continue
            pose = Pose(x, y, region.z, pose_yaw)
            score = (
                round(math.dist(preferred, (x, y)), 9),
                _occlusion_caused(scene, obj, pose),
                round(geo.dist_to_boundary((x, y), region.polygon), 9),
            )
            scored.append((score, (x, y), cid))
    scored.sort(key=lambda item: (item[0], item[2]))
    return [(pos, c) for _score, pos, c in scored]


def path_feasible(
    scene: Scene,
    frm: tuple[float, float, float],
    to: tuple[float, float, float],
    carried: str | None = None,
    carried_yaw: float = 0.0,
    steps: int = 10,
    ignore: frozenset[str] = frozenset(),
) -> bool:
    """Straight-segment sweep at fixed interpolation steps (trajectory stub).

    A small hand probe (and the carried object, if any) is tested for
    collision at each interpolated configuration.
    """
    probe_fp = geo.rectangle(PROBE_SIZE, PROBE_SIZE)
    carried_obj = scene.obj(carried) if carried else None
    skip = set(ignore)
    if carried:
        skip.add(carried)
    for i in range(steps + 1):
        t = i / steps
        q = (
            frm[0] + (to[0] - frm[0]) * t,
            frm[1] + (to[1] - frm[1]) * t,
            frm[2] + (to[2] - frm[2]) * t,
        )
        shapes = [(geo.transform(probe_fp, q[0], q[1], 0.0), q[2] - PROBE_HEIGHT / 2, q[2] + PROBE_HEIGHT / 2)]
        if carried_obj is not None:
            fp = geo.transform(carried_obj.footprint, q[0], q[1], carried_yaw)
            shapes.append((fp, q[2] - carried_obj.height / 2, q[2] + carried_obj.height / 2))
        for fp, z0, z1 in shapes:
            for other in scene.objects:
                if other.name in skip:
                    continue
                oz0, oz1 = other.z_interval()
                if z0 < oz1 - geo.EPS and oz0 < z1 - geo.EPS:
                    if geo.polygons_overlap(fp, other.world_footprint()):
                        return False
            for surf in scene.surfaces:
                if surf.name in skip:
                    continue
                if surf.z - SURFACE_THICKNESS < z1 - geo.EPS and z0 < surf.z - geo.EPS:
                    if geo.polygons_overlap(fp, surf.polygon):
                        return False
    return True


# ---------------------------------------------------------------------------
# Shared fact derivation


@dataclass(frozen=True)
class WorldConfig:
    """Thresholds for deriving shared facts from geometry."""

    visible_threshold: float = 0.5
    putaway_threshold: float = 0.0
    covered_threshold: float = 0.9
    sample_budget: int = 64
    #: facts at minimal effort <= this cap also get an effort-free alias, so
    #: domain preconditions can say e.g. (reachable mac pr2)
    alias_effort_cap: int = 2


DEFAULT_CONFIG = WorldConfig()


def derive_facts(scene: Scene, cfg: WorldConfig = DEFAULT_CONFIG) -> frozenset[Literal]:
    """Shared literals for the scene; a pure function of the scene content."""
    facts: set[Literal] = set()
    objects = sorted(scene.objects, key=lambda o: o.name)
    agents = sorted(scene.agents, key=lambda a: a.name)
    for obj in objects:
        for agent in agents:
            e = min_visible_effort(
                scene, obj.name, agent.name, cfg.visible_threshold, cfg.sample_budget
            )
            if e is not None:
                facts.add(Literal("visible", (obj.name, agent.name, str(e))))
                if e <= cfg.alias_effort_cap:
                    facts.add(Literal("visible", (obj.name, agent.name)))
            e = min_reach_effort(scene, obj.center(), agent.name)
            if e is not None:
                facts.add(Literal("reachable", (obj.name, agent.name, str(e))))
                if e <= cfg.alias_effort_cap:
                    facts.add(Literal("reachable", (obj.name, agent.name)))
        kind, target = obj.support
        if kind == "on":
            facts.add(Literal("on", (obj.name, target)))
        elif kind == "inside":
            facts.add(Literal("inside", (obj.name, target)))
        top_area = geo.polygon_area(obj.world_footprint())
        for other in objects:
            if other.name == obj.name or top_area <= geo.EPS:
                continue
            if other.pose.z < obj.pose.z + obj.height - 1e-6:
                continue
            cover = geo.overlap_area(obj.world_footprint(), other.world_footprint())
            if cover / top_area >= cfg.covered_threshold:
                facts.add(Literal("coveredBy", (obj.name, other.name)))
    return frozenset(facts)


# ---------------------------------------------------------------------------
# Scene files (JSON)


def scene_to_dict(scene: Scene) -> dict:
    return {
        "version": scene.version,
        "surfaces": [
            {"name": s.name, "polygon": [list(p) for p in s.polygon], "z": s.z}
            for s in scene.surfaces
        ],
        "objects": [
            {
                "name": o.name,
                "footprint": [list(p) for p in o.footprint],
                "height": o.height,
                "pose": [o.pose.x, o.pose.y, o.pose.z, o.pose.yaw],
                "grasps": [{"gid": g.gid, "approach": list(g.approach)} for g in o.grasps],
                "heavy": o.heavy,
                "container": o.container,
                "open_top": o.open_top,
                "wall": o.wall,
                "support": list(o.support),
            }
            for o in scene.objects
        ],
        "agents": [
            {
                "name": a.name,
                "kind": a.kind,
                "base": list(a.base),
                "eye_points": [list(e) for e in a.eye_points],
                "reach_radii": list(a.reach_radii),
                "reach_bands": [list(b) for b in a.reach_bands],
                "hand_home": list(a.hand_home),
                "gripper": list(a.gripper) if a.gripper else None,
            }
            for a in scene.agents
        ],
        "zones": [
            {
                "name": z.name,
                "polygon": [list(p) for p in z.polygon],
                "z": z.z,
                "virtual": z.virtual,
                "owner": z.owner,
            }
            for z in scene.zones
        ],
    }


def scene_from_dict(data: dict) -> Scene:
    surfaces = tuple(
        Surface(s["name"], tuple(tuple(p) for p in s["polygon"]), s["z"])
        for s in data.get("surfaces", [])
    )
    objects = []
    for o in data.get("objects", []):
        grasps = tuple(
            Grasp(g["gid"], tuple(g["approach"])) for g in o.get("grasps", [])
        ) or tuple(Grasp(g, a) for g, a in CANONICAL_GRASPS)
        objects.append(
            ObjectModel(
                name=o["name"],
                footprint=tuple(tuple(p) for p in o["footprint"]),
                height=o["height"],
                pose=Pose(*o["pose"]),
                grasps=grasps,
                heavy=o.get("heavy", False),
                container=o.get("container", False),
                open_top=o.get("open_top", True),
                wall=o.get("wall", 0.03),
                support=tuple(o["support"]),
            )
        )
    agents = tuple(
        AgentModel(
            name=a["name"],
            kind=a["kind"],
            base=tuple(a["base"]),
            eye_points=tuple(tuple(e) for e in a["eye_points"]),
            reach_radii=tuple(a["reach_radii"]),
            reach_bands=tuple(tuple(b) for b in a["reach_bands"]),
            hand_home=tuple(a.get("hand_home", (0.0, 0.0, 0.9))),
            gripper=tuple(a["gripper"]) if a.get("gripper") else None,
        )
        for a in data.get("agents", [])
    )
    zones = tuple(
        Region(
            z["name"],
            tuple(tuple(p) for p in z["polygon"]),
            z["z"],
            z.get("virtual", False),
            z.get("owner"),
        )
        for z in data.get("zones", [])
    )
    scene = Scene(surfaces, tuple(objects), agents, zones, data.get("version", 0))
    validate_scene(scene)
    return scene


def load_scene(path: str) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_from_dict(json.load(fh))


def save_scene(scene: Scene, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2, sort_keys=True)
