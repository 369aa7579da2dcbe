"""Geometric task planner: nested search over effort, points, grasps, yaws.

The solver walks a four-dimensional discrete space, cheapest constraints
first: collision and reach gates run before any swept-path call, and ray-
sampled visibility runs last.  Effort-independent failures (collisions,
blocked approaches, fixed-effort hide checks) are memoized and never retried
at equal or higher effort; effort-dependent checks (reach, visibility
thresholds) are retried as the effort loop climbs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

from . import geometry as geo
from . import world as w
from .world import Pose, Region, Scene, WorldConfig, DEFAULT_CONFIG

PLACEMENT_KINDS = ("MAKEACC", "SHOW", "GIVE", "PUTAWAY", "PUTON")
TASK_KINDS = ("PICK",) + PLACEMENT_KINDS + ("COMPOUND",)

GRID_STEP = 0.05


class GtpError(Exception):
    """Contract violation (unknown kind, missing region, ...)."""


class GtpTimeout(Exception):
    """Deadline hit between candidates."""


class MemoUnsound(AssertionError):
    """Paranoid re-test found a memoized exclusion that now passes."""


@dataclass(frozen=True)
class ConstraintProfile:
    """Task-oriented constraints checked on the hypothetical placement."""

    min_visible: float | None = None  # to the target agent, at effort <= E
    require_reach: bool = False  # target agent must reach the placed object
    hide_from_target: bool = False  # put-away: invisible and unreachable
    allowed_yaws: tuple[float, ...] | None = None
    #: (object, agent, min fraction, effort) constraints on other objects
    extra_visible: tuple[tuple[str, str, float, int], ...] = ()


@dataclass(frozen=True)
class GtpTask:
    kind: str
    obj: str | None = None
    target: str | None = None  # agent name (or object name for PUTON)
    regions: tuple[str, ...] = ()
    profile: ConstraintProfile = ConstraintProfile()
    components: tuple["GtpTask", ...] = ()
    preferred_point: tuple[float, float] | None = None
    effort_cap: int = 4

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise GtpError(f"unknown GTP task kind {self.kind!r}")

    @property
    def stat_kind(self) -> str:
        """Statistics bucket; a compound is attributed to its main component."""
        if self.kind != "COMPOUND":
            return self.kind
        for c in reversed(self.components):
            if c.kind != "PICK":
                return c.stat_kind
        return "PICK"

    def key(self) -> tuple:
        if self.kind == "COMPOUND":
            return ("COMPOUND",) + tuple(c.key() for c in self.components)
        return (self.kind, self.obj, self.target, self.regions)


@dataclass(frozen=True)
class GtpSolution:
    """One satisfying tuple of the four-dimensional search."""

    effort: int
    grasp: str | None
    position: tuple[float, float] | None
    yaw: float | None
    region: str | None
    path: tuple | None  # (from, to) endpoints of the planned straight path
    pre_version: int
    kind: str

    def identity(self) -> tuple:
        """Alternatives must differ on this projection (effort excluded:
        the same physical tuple at higher effort is not a new solution)."""
        return (self.grasp, self.position, self.yaw, self.region)


Solution = object  # GtpSolution or tuple[GtpSolution, ...] for compounds


@dataclass
class FailureMemo:
    """Cross-effort exclusions for one task; reset when the scene moves."""

    scene_version: int = -1
    excluded: dict[tuple, int] = field(default_factory=dict)
    skips: int = 0

    def sync(self, version: int) -> None:
        if version != self.scene_version:
            self.excluded.clear()
            self.scene_version = version

    def exclude(self, key: tuple, effort: int) -> None:
        self.excluded.setdefault(key, effort)

    def is_excluded(self, key: tuple) -> bool:
        return key in self.excluded


@dataclass
class KindStats:
    attempts: int = 0
    successes: int = 0
    time: float = 0.0
    pts: int = 0
    grasps: int = 0
    orts: int = 0
    calls: int = 0
    memo_skips: int = 0


class GtpStats:
    """Per-task-kind counters in Table layout: time, succ %, pts, grasps, orts, calls."""

    def __init__(self) -> None:
        self.kinds: dict[str, KindStats] = {}

    def kind(self, name: str) -> KindStats:
        return self.kinds.setdefault(name, KindStats())

    def rows(self) -> list[dict]:
        out = []
        for name in sorted(self.kinds):
            k = self.kinds[name]
            if k.attempts == 0:
                continue
            out.append(
                {
                    "task": name,
                    "attempts": k.attempts,
                    "time": k.time / k.attempts,
                    "succ_pct": 100.0 * k.successes / k.attempts,
                    "pts": k.pts / k.attempts,
                    "grasps": k.grasps / k.attempts,
                    "orts": k.orts / k.attempts,
                    "calls": k.calls / k.attempts,
                }
            )
        return out


# ---------------------------------------------------------------------------
# Grasp geometry


def grasp_hand_point(obj: w.ObjectModel, grasp: w.Grasp, pose: Pose | None = None):
    """Where the hand sits for a grasp of the object at the given pose."""
    pose = pose or obj.pose
    direction = geo.rotate(grasp.approach, pose.yaw)
    fp = obj.world_footprint(pose)
    cx, cy = geo.centroid(fp)
    extent = max((p[0] - cx) * direction[0] + (p[1] - cy) * direction[1] for p in fp)
    gap = extent + w.GRASP_CLEARANCE + w.PROBE_SIZE / 2
    return (cx + direction[0] * gap, cy + direction[1] * gap, pose.z + obj.height / 2)


def _probe_free(scene: Scene, point, ignore: frozenset[str]) -> bool:
    fp = geo.transform(geo.rectangle(w.PROBE_SIZE, w.PROBE_SIZE), point[0], point[1], 0.0)
    z0, z1 = point[2] - w.PROBE_HEIGHT / 2, point[2] + w.PROBE_HEIGHT / 2
    for other in scene.objects:
        if other.name in ignore:
            continue
        oz0, oz1 = other.z_interval()
        if z0 < oz1 - geo.EPS and oz0 < z1 - geo.EPS:
            if geo.polygons_overlap(fp, other.world_footprint()):
                return False
    for surf in scene.surfaces:
        if surf.z - w.SURFACE_THICKNESS < z1 - geo.EPS and z0 < surf.z - geo.EPS:
            if geo.polygons_overlap(fp, surf.polygon):
                return False
    return True


# ---------------------------------------------------------------------------
# Constraint checks


def _hypothetical(scene: Scene, task: GtpTask, pose: Pose, region: Region, grasp: str | None) -> Scene:
    """Scene as it would look with the task's object placed per the candidate."""
    obj = scene.obj(task.obj)
    robot = scene.robot()
    if region.virtual:
        support = ("gripper", robot.name)
    else:
        support = ("on", region.owner or region.name)
    scene2 = scene.with_object(replace(obj, pose=pose, support=support))
    if region.virtual:
        scene2 = scene2.with_agent(replace(robot, gripper=(task.obj, grasp or "")))
    elif robot.gripper and robot.gripper[0] == task.obj:
        scene2 = scene2.with_agent(replace(robot, gripper=None))
    return scene2


def _profile_ok(
    scene2: Scene, task: GtpTask, pose: Pose, effort: int, cfg: WorldConfig
) -> bool:
    """Effort-dependent part of the constraint profile (visibility, reach)."""
    p = task.profile
    obj = scene2.obj(task.obj)
    center = obj.center()
    if p.min_visible is not None:
        if w.visibility_fraction(scene2, task.obj, task.target, effort, cfg.sample_budget) < p.min_visible:
            return False
    if p.require_reach:
        if not w.reach_feasible(scene2, center, task.target, effort):
            return False
    for o2, agent, frac, eff in p.extra_visible:
        if w.visibility_fraction(scene2, o2, agent, eff, cfg.sample_budget) < frac:
            return False
    return True


def _hide_ok(scene2: Scene, task: GtpTask, cfg: WorldConfig) -> bool:
    """Put-away check at fixed maximum effort (effort-independent)."""
    frac = w.visibility_fraction(scene2, task.obj, task.target, 4, cfg.sample_budget)
    if frac > cfg.putaway_threshold + 1e-9:
        return False
    return not w.reach_feasible(scene2, scene2.obj(task.obj).center(), task.target, 4)


def solution_satisfies(
    task: GtpTask, sol: Solution, scene: Scene, cfg: WorldConfig = DEFAULT_CONFIG
) -> bool:
    """Independent re-check of a solution's full constraint profile."""
    if task.kind == "COMPOUND":
        sols = tuple(sol)
        if len(sols) != len(task.components):
            return False
        cur = scene
        for comp, s in zip(task.components, sols):
            if not solution_satisfies(comp, s, cur, cfg):
                return False
            cur = apply_solution(cur, comp, s)
        return True
    sol = sol  # type: GtpSolution
    obj = scene.obj(task.obj)
    robot = scene.robot()
    gripped = robot.gripper is not None and robot.gripper[0] == task.obj
    if task.kind == "PICK":
        if not w.reach_feasible(scene, obj.center(), robot.name, sol.effort):
            return False
        grasp = next((g for g in obj.grasps if g.gid == sol.grasp), None)
        if grasp is None:
            return False
        hand = grasp_hand_point(obj, grasp)
        return _probe_free(scene, hand, frozenset({obj.name}))
    region = scene.region(sol.region)
    pose = Pose(sol.position[0], sol.position[1], region.z, sol.yaw)
    ignore = frozenset({region.owner}) if region.owner else frozenset()
    if not geo.polygon_contains(region.polygon, obj.world_footprint(pose), tol=1e-7):
        return False
    if not w.collision_free(scene, task.obj, pose, ignore):
        return False
    hand_z = region.z + obj.height / 2
    if not w.reach_feasible(scene, (sol.position[0], sol.position[1], hand_z), robot.name, sol.effort):
        return False
    scene2 = _hypothetical(scene, task, pose, region, sol.grasp)
    if task.profile.hide_from_target and not _hide_ok(scene2, task, cfg):
        return False
    if not _profile_ok(scene2, task, pose, sol.effort, cfg):
        return False
    if not gripped and task.kind != "PICK":
        grasp = next((g for g in obj.grasps if g.gid == sol.grasp), None)
        if grasp is None:
            return False
    return True


# ---------------------------------------------------------------------------
# The solver


class SolveHandle:
    """Resumable iteration over a task's solutions (backtracking checkpoint)."""

    def __init__(
        self,
        task: GtpTask,
        scene: Scene,
        memo: FailureMemo | None = None,
        timeout: float = 60.0,
        stats: GtpStats | None = None,
        paranoid: bool = False,
        cfg: WorldConfig = DEFAULT_CONFIG,
    ):
        self.task = task
        self.scene = scene
        self.memo = memo if memo is not None else FailureMemo()
        self.stats = stats if stats is not None else GtpStats()
        self.timeout = timeout
        self.paranoid = paranoid
        self.cfg = cfg
        self.deadline = [0.0]
        self.returned: set = set()
        self.timed_out = False
        if task.kind == "COMPOUND":
            self._memos = {i: FailureMemo() for i in range(len(task.components))}
            self._gen = self._iter_compound(tuple(task.components), scene)
        else:
            self._gen = self._iter_single(task, scene, self.memo)

    def next_solution(self, timeout: float | None = None):
        """First / next solution, or None when exhausted or timed out."""
        self.deadline[0] = time.monotonic() + (timeout if timeout is not None else self.timeout)
        bucket = self.stats.kind(self.task.stat_kind)
        bucket.attempts += 1
        start = time.monotonic()
        try:
            while True:
                sol = next(self._gen, None)
                if sol is None:
                    return None
                ident = (
                    tuple(s.identity() for s in sol)
                    if isinstance(sol, tuple)
                    else sol.identity()
                )
                if ident in self.returned:
                    continue
                self.returned.add(ident)
                bucket.successes += 1
                return sol
        except GtpTimeout:
            self.timed_out = True
            return None
        finally:
            bucket.time += time.monotonic() - start

    # -- internals ----------------------------------------------------------

    def _tick(self) -> None:
        if time.monotonic() > self.deadline[0]:
            raise GtpTimeout(self.task.kind)

    def _gate(self, memo: FailureMemo, key: tuple, effort: int, test, bucket=None, counter=None) -> bool:
        """Memoized pass/fail gate for effort-independent tests."""
        if memo.is_excluded(key):
            memo.skips += 1
            if bucket is not None:
                bucket.memo_skips += 1
            if self.paranoid and test():
                raise MemoUnsound(f"memoized exclusion {key} passes on re-test")
            return False
        if counter is not None:
            counter()
        if test():
            return True
        memo.exclude(key, effort)
        return False

    def _iter_compound(self, components, scene):
        if not components:
            yield ()
            return
        first, rest = components[0], components[1:]
        idx = len(self.task.components) - len(components)
        memo = self._memos[idx]
        for sol in self._iter_single(first, scene, memo, compound=True):
            scene2 = apply_solution(scene, first, sol)
            for tail in self._iter_compound(rest, scene2):
                yield (sol,) + tail

    def _iter_single(self, task: GtpTask, scene: Scene, memo: FailureMemo, compound=False):
        memo.sync(scene.version)
        bucket = self.stats.kind(self.task.stat_kind)
        if task.kind == "PICK":
            yield from self._iter_pick(task, scene, memo, bucket)
        elif task.kind in PLACEMENT_KINDS:
            yield from self._iter_place(task, scene, memo, bucket)
        else:
            raise GtpError(f"cannot iterate task kind {task.kind}")

    def _iter_pick(self, task: GtpTask, scene: Scene, memo: FailureMemo, bucket):
        obj = scene.obj(task.obj)
        robot = scene.robot()
        if robot.gripper is not None:
            return  # gripper occupied: no pick possible
        center = obj.center()
        for effort in range(1, task.effort_cap + 1):
            self._tick()
            bucket.pts += 1
            if not w.reach_feasible(scene, center, robot.name, effort):
                continue
            for grasp in obj.grasps:
                self._tick()
                hand = grasp_hand_point(obj, grasp)

                def approach_ok(hand=hand):
                    return _probe_free(scene, hand, frozenset({obj.name}))

                if not self._gate(
                    memo,
                    ("grasp", grasp.gid),
                    effort,
                    approach_ok,
                    bucket,
                    counter=lambda: setattr(bucket, "grasps", bucket.grasps + 1),
                ):
                    continue

                def path_ok(hand=hand):
                    bucket.calls += 1
                    return w.path_feasible(
                        scene, robot.hand_home, hand, ignore=frozenset({obj.name})
                    )

                if not self._gate(memo, ("grasp-path", grasp.gid), effort, path_ok, bucket):
                    continue
                yield GtpSolution(
                    effort, grasp.gid, None, None, None,
                    (robot.hand_home, hand), scene.version, task.kind,
                )

    def _iter_place(self, task: GtpTask, scene: Scene, memo: FailureMemo, bucket):
        if task.obj is None or not task.regions:
            raise GtpError(f"{task.kind} needs an object and at least one region")
        obj = scene.obj(task.obj)
        robot = scene.robot()
        gripped = robot.gripper is not None and robot.gripper[0] == task.obj
        if not gripped and robot.gripper is not None:
            return  # holding something else
        yaw_list = task.profile.allowed_yaws or w.yaw_samples()
        regions = [scene.region(r) for r in task.regions]
        candidates = [
            (
                region,
                w.placement_candidates(
                    scene, task.obj, region, GRID_STEP, yaw_list, task.preferred_point
                ),
            )
            for region in regions
        ]
        if gripped:
            held_gid = robot.gripper[1]
            grasp_opts = [g for g in obj.grasps if g.gid == held_gid] or [obj.grasps[0]]
        else:
            grasp_opts = list(obj.grasps)
        from_pt = obj.center() if gripped else robot.hand_home

        for effort in range(1, task.effort_cap + 1):
            for region, cands in candidates:
                ignore_owner = frozenset({region.owner}) if region.owner else frozenset()
                for pos, cid in cands:
                    self._tick()
                    pkey = ("point", region.name, round(pos[0], 6), round(pos[1], 6))
                    if memo.is_excluded(pkey):
                        memo.skips += 1
                        bucket.memo_skips += 1
                        continue
                    bucket.pts += 1
                    hand_z = region.z + obj.height / 2
                    if not w.reach_feasible(scene, (pos[0], pos[1], hand_z), robot.name, effort):
                        continue
                    # orientation gate: collision filtering (effort-independent)
                    yaw_ok: list[float] = []
                    all_tested = True
                    for yaw in yaw_list:
                        okey = pkey + ("yaw", round(yaw, 6))
                        pose = Pose(pos[0], pos[1], region.z, yaw)

                        def base_ok(pose=pose):
                            return geo.polygon_contains(
                                region.polygon, obj.world_footprint(pose), tol=1e-7
                            ) and w.collision_free(scene, task.obj, pose, ignore_owner)

                        if memo.is_excluded(okey):
                            memo.skips += 1
                            bucket.memo_skips += 1
                            if self.paranoid and base_ok():
                                raise MemoUnsound(f"{okey} passes on re-test")
                            continue
                        bucket.orts += 1
                        if base_ok():
                            yaw_ok.append(yaw)
                        else:
                            memo.exclude(okey, effort)
                    if not yaw_ok:
                        if all_tested and all(
                            memo.is_excluded(pkey + ("yaw", round(yw, 6))) for yw in yaw_list
                        ):
                            memo.exclude(pkey, effort)
                        continue
                    for grasp in grasp_opts:
                        self._tick()
                        if not gripped:
                            hand = grasp_hand_point(obj, grasp)

                            def approach_ok(hand=hand):
                                return _probe_free(scene, hand, frozenset({task.obj}))

                            if not self._gate(
                                memo,
                                ("grasp", grasp.gid),
                                effort,
                                approach_ok,
                                bucket,
                                counter=lambda: setattr(bucket, "grasps", bucket.grasps + 1),
                            ):
                                continue

                            def pick_path_ok(hand=hand):
                                bucket.calls += 1
                                return w.path_feasible(
                                    scene, robot.hand_home, hand, ignore=frozenset({task.obj})
                                )

                            if not self._gate(memo, ("grasp-path", grasp.gid), effort, pick_path_ok, bucket):
                                continue
                        for yaw in yaw_ok:
                            self._tick()
                            okey = pkey + ("yaw", round(yaw, 6))
                            gkey = okey + ("grasp", grasp.gid)
                            pose = Pose(pos[0], pos[1], region.z, yaw)

                            def clearance_ok(pose=pose, grasp=grasp):
                                hand2 = grasp_hand_point(obj, grasp, pose)
                                return _probe_free(
                                    scene, hand2, frozenset({task.obj}) | ignore_owner
                                )

                            if not self._gate(memo, gkey + ("clear",), effort, clearance_ok, bucket):
                                continue
                            to_pt = (pos[0], pos[1], hand_z)

                            def place_path_ok(pose=pose, to_pt=to_pt):
                                bucket.calls += 1
                                return w.path_feasible(
                                    scene,
                                    from_pt,
                                    to_pt,
                                    carried=task.obj,
                                    carried_yaw=pose.yaw,
                                    ignore=ignore_owner,
                                )

                            if not self._gate(memo, gkey + ("path",), effort, place_path_ok, bucket):
                                continue
                            scene2 = _hypothetical(scene, task, pose, region, grasp.gid)
                            if task.profile.hide_from_target:

                                def hide_ok(scene2=scene2):
                                    return _hide_ok(scene2, task, self.cfg)

                                if not self._gate(memo, okey + ("hide",), effort, hide_ok, bucket):
                                    continue
                            if not _profile_ok(scene2, task, pose, effort, self.cfg):
                                continue  # effort-dependent: retried at higher effort
                            yield GtpSolution(
                                effort, grasp.gid, pos, yaw, region.name,
                                (from_pt, to_pt), scene.version, task.kind,
                            )


def solve(
    task: GtpTask,
    scene: Scene,
    memo: FailureMemo | None = None,
    timeout: float = 60.0,
    stats: GtpStats | None = None,
    paranoid: bool = False,
    cfg: WorldConfig = DEFAULT_CONFIG,
):
    """First solution of a task, or None; returns (solution, handle)."""
    handle = SolveHandle(task, scene, memo, timeout, stats, paranoid, cfg)
    return handle.next_solution(), handle


def solve_compound(
    tasks: GtpTask,
    scene: Scene,
    timeout: float = 60.0,
    stats: GtpStats | None = None,
    paranoid: bool = False,
    cfg: WorldConfig = DEFAULT_CONFIG,
):
    """Joint search over a COMPOUND task; fails early when no choice of the
    earlier components admits the later ones."""
    if tasks.kind != "COMPOUND":
        raise GtpError("solve_compound expects a COMPOUND task")
    return solve(tasks, scene, None, timeout, stats, paranoid, cfg)


# ---------------------------------------------------------------------------
# World-state progression


def apply_solution(scene: Scene, task: GtpTask, sol: Solution, version: int | None = None) -> Scene:
    """Move the object per the solution; returns a new scene snapshot."""
    if task.kind == "COMPOUND":
        cur = scene
        for comp, s in zip(task.components, tuple(sol)):
            cur = apply_solution(cur, comp, s)
        if version is not None:
            cur = cur.with_version(version)
        return cur
    if sol.pre_version != scene.version:
        raise GtpError(
            f"stale scene: solution planned at version {sol.pre_version}, "
            f"scene is at {scene.version}"
        )
    obj = scene.obj(task.obj)
    robot = scene.robot()
    new_version = version if version is not None else scene.version + 1
    if task.kind == "PICK":
        hh = robot.hand_home
        pose = Pose(hh[0], hh[1], hh[2] - obj.height / 2, obj.pose.yaw)
        scene2 = scene.with_object(
            replace(obj, pose=pose, support=("gripper", robot.name))
        )
        scene2 = scene2.with_agent(replace(robot, gripper=(task.obj, sol.grasp)))
        return scene2.with_version(new_version)
    region = scene.region(sol.region)
    pose = Pose(sol.position[0], sol.position[1], region.z, sol.yaw)
    if region.virtual:
        scene2 = scene.with_object(
            replace(obj, pose=pose, support=("gripper", robot.name))
        )
        scene2 = scene2.with_agent(replace(robot, gripper=(task.obj, sol.grasp or "")))
    else:
        scene2 = scene.with_object(
            replace(obj, pose=pose, support=("on", region.owner or region.name))
        )
        if robot.gripper and robot.gripper[0] == task.obj:
            scene2 = scene2.with_agent(replace(robot, gripper=None))
    return scene2.with_version(new_version)


def effects(
    task: GtpTask, sol: Solution, scene: Scene, cfg: WorldConfig = DEFAULT_CONFIG
):
    """Shared-literal (adds, deletes) induced by applying the solution."""
    before = w.derive_facts(scene, cfg)
    after = w.derive_facts(apply_solution(scene, task, sol), cfg)
    adds = tuple(sorted(after - before, key=str))
    dels = tuple(sorted(before - after, key=str))
    return adds, dels


# ---------------------------------------------------------------------------
# Pursued-task log


@dataclass
class LogEntry:
    task: GtpTask
    solution: Solution
    handle: SolveHandle
    pre_scene: Scene
    post_version: int
    plan_index: int = -1


class TaskSequenceLog:
    """Ordered record of pursued geometric tasks with resumable iterators."""

    def __init__(self) -> None:
        self.entries: list[LogEntry] = []

    def append(self, entry: LogEntry) -> None:
        self.entries.append(entry)

    def truncate_to_version(self, version: int) -> None:
        self.entries = [e for e in self.entries if e.post_version <= version]

    def replay(self, version: int | None = None) -> Scene:
        """Re-apply every chosen solution from the first pre-task snapshot."""
        if not self.entries:
            raise GtpError("empty log has no replay")
        scene = self.entries[0].pre_scene
        for e in self.entries:
            scene = apply_solution(scene, e.task, e.solution, version=e.post_version)
        return scene


def alternative(log: TaskSequenceLog, index: int, timeout: float = 60.0):
    """Next solution for log entry ``index``, resuming its iterator.

    The caller is responsible for restoring the pre-task scene, discarding
    later entries, and re-applying the returned solution.
    """
    if not 0 <= index < len(log.entries):
        raise GtpError(f"log index {index} out of range")
    return alternative_for(log.entries[index], timeout)


def alternative_for(entry: LogEntry, timeout: float = 60.0):
    """Next solution for a specific log entry (see :func:`alternative`)."""
    return entry.handle.next_solution(timeout)
