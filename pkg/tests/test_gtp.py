"""Geometric task solver: search order, memoization, compounds, progression."""

import dataclasses

import pytest

from conftest import box, rect_at, table_scene
from geosym import gtp
from geosym.gtp import (
    ConstraintProfile,
    FailureMemo,
    GtpError,
    GtpStats,
    GtpTask,
    LogEntry,
    SolveHandle,
    TaskSequenceLog,
    alternative_for,
    apply_solution,
    effects,
    solution_satisfies,
    solve,
    solve_compound,
)
from geosym.symbolic import Literal
from geosym.world import GRASP_CLEARANCE, PROBE_SIZE, Region, derive_facts


def spot(name, cx, cy, w=0.3, d=0.3, z=0.5, **kw):
    return Region(name, rect_at(cx, cy, w, d), z, **kw)


def pick_task(obj="item"):
    return GtpTask("PICK", obj=obj)


def place_task(obj="item", regions=("tgt",), kind="MAKEACC", profile=None, **kw):
    return GtpTask(
        kind, obj=obj, target="person", regions=regions,
        profile=profile or ConstraintProfile(), **kw,
    )


def simple_scene(extra=()):
    return table_scene(
        objects=[box("item", 0.5, 0.4, h=0.2), *extra],
        zones=[spot("tgt", 1.1, -0.3)],
    )


# -- basics -----------------------------------------------------------------


def test_unknown_kind_rejected():
    with pytest.raises(GtpError):
        GtpTask("FLY", obj="item")


def test_pick_solution_found_and_satisfies():
    scene = simple_scene()
    sol, _ = solve(pick_task(), scene)
    assert sol is not None
    assert sol.kind == "PICK" and sol.grasp in {"gx+", "gx-", "gy+", "gy-"}
    assert sol.effort == 1
    assert solution_satisfies(pick_task(), sol, scene)


def test_pick_blocked_when_gripper_full():
    scene = simple_scene()
    robot = scene.robot()
    scene = scene.with_agent(dataclasses.replace(robot, gripper=("other", "gx+")))
    sol, _ = solve(pick_task(), scene)
    assert sol is None


def test_place_solution_found_and_satisfies():
    scene = simple_scene()
    task = place_task()
    sol, _ = solve(task, scene)
    assert sol is not None
    assert sol.region == "tgt"
    assert solution_satisfies(task, sol, scene)


def test_place_prefers_center_then_enumerates_all():
    scene = simple_scene()
    task = place_task(profile=ConstraintProfile(allowed_yaws=(0.0,)))
    sol, handle = solve(task, scene)
    # effort is minimized first: the zone centre needs effort 3, so the first
    # solution is the centre-nearest point still reachable at effort 2
    assert sol.effort == 2
    assert sol.position == pytest.approx((1.05, -0.3))
    seen = {sol.identity()}
    while True:
        nxt = handle.next_solution()
        if nxt is None:
            break
        assert nxt.identity() not in seen, "duplicate solution returned"
        seen.add(nxt.identity())
    # 0.3-wide zone, 0.2-wide object, 0.05 grid -> 3x3 points; 4 free grasps
    assert len({s[1] for s in seen}) == 9
    assert len(seen) == 36


def test_same_tuple_higher_effort_not_duplicated():
    scene = simple_scene()
    task = place_task(profile=ConstraintProfile(allowed_yaws=(0.0,)))
    _, handle = solve(task, scene)
    sols = [handle.next_solution() for _ in range(60)]
    idents = [s.identity() for s in sols if s is not None]
    assert len(idents) == len(set(idents))


def test_zero_timeout_reports_timeout():
    scene = simple_scene()
    handle = SolveHandle(place_task(), scene, timeout=0.0)
    assert handle.next_solution() is None
    assert handle.timed_out


def test_effort_escalation_for_far_reach():
    # zone at ~1.45 m sits outside the first three reach radii (.9/1.1/1.3)
    scene = table_scene(
        objects=[box("item", 0.5, 0.4, h=0.2)],
        zones=[spot("far", 1.45, 0.0)],
    )
    sol, _ = solve(place_task(regions=("far",)), scene)
    assert sol is not None and sol.effort == 4


def test_visibility_profile_filters_placement():
    # a wall hides the first zone from the human; the open zone must be chosen
    wall = box("wall", 1.25, -0.3, w=0.06, d=0.5, h=0.9)
    scene = table_scene(
        objects=[box("item", 0.5, 0.4, h=0.2), wall],
        zones=[spot("hidden", 1.0, -0.3), spot("open", 1.0, 0.3)],
    )
    task = place_task(
        regions=("hidden", "open"),
        profile=ConstraintProfile(min_visible=0.5, allowed_yaws=(0.0,)),
    )
    sol, _ = solve(task, scene)
    assert sol is not None and sol.region == "open"
    no_profile = place_task(regions=("hidden", "open"))
    sol2, _ = solve(no_profile, scene)
    assert sol2.region == "hidden"  # without the profile the first region wins


def test_hide_task_requires_invisible_and_unreachable():
    # a tall screen shields the table's near corner from the human; the front
    # spot stays visible and reachable, so put-away must skip it
    screen = box("screen", 1.25, -0.5, w=0.1, d=0.7, h=0.9)
    scene = table_scene(
        objects=[box("item", 0.5, 0.4, h=0.2), screen],
        zones=[spot("front", 1.2, 0.3), spot("corner", 0.8, -0.45, w=0.2, d=0.2)],
    )
    task = GtpTask(
        "PUTAWAY", obj="item", target="person", regions=("front", "corner"),
        profile=ConstraintProfile(hide_from_target=True, allowed_yaws=(0.0,)),
    )
    sol, _ = solve(task, scene)
    assert sol is not None and sol.region == "corner"
    from geosym.world import reach_feasible, visibility_fraction

    after = apply_solution(scene, task, sol)
    assert visibility_fraction(after, "item", "person", 4) == pytest.approx(0.0)
    assert not reach_feasible(after, after.obj("item").center(), "person", 4)


# -- world progression ------------------------------------------------------


def test_apply_pick_moves_to_gripper():
    scene = simple_scene()
    sol, _ = solve(pick_task(), scene)
    after = apply_solution(scene, pick_task(), sol, version=7)
    assert after.version == 7
    assert after.obj("item").support == ("gripper", "bot")
    assert after.robot().gripper == ("item", sol.grasp)


def test_apply_place_sets_support_and_clears_gripper():
    scene = simple_scene()
    ptask = pick_task()
    psol, _ = solve(ptask, scene)
    mid = apply_solution(scene, ptask, psol, version=1)
    task = place_task()
    sol, _ = solve(task, mid)
    after = apply_solution(mid, task, sol, version=2)
    assert after.obj("item").support == ("on", "tgt")
    assert after.robot().gripper is None
    assert after.obj("item").pose.z == pytest.approx(0.5)


def test_apply_virtual_zone_keeps_grip():
    scene = simple_scene()
    psol, _ = solve(pick_task(), scene)
    mid = apply_solution(scene, pick_task(), psol, version=1)
    mid = dataclasses.replace(mid, zones=(spot("up", 0.9, 0.0, z=1.2, virtual=True),))
    show = GtpTask(
        "SHOW", obj="item", target="person",
        regions=("up",), profile=ConstraintProfile(min_visible=0.5),
    )
    sol, _ = solve(show, mid)
    after = apply_solution(mid, show, sol, version=2)
    assert after.obj("item").support == ("gripper", "bot")
    assert after.robot().gripper is not None


def test_apply_stale_version_rejected():
    scene = simple_scene()
    sol, _ = solve(pick_task(), scene)
    moved = apply_solution(scene, pick_task(), sol, version=1)
    with pytest.raises(GtpError):
        apply_solution(moved, pick_task(), sol)  # planned at version 0


def test_effects_are_shared_literal_diff():
    scene = simple_scene()
    sol, _ = solve(pick_task(), scene)
    adds, dels = effects(pick_task(), sol, scene)
    assert Literal("on", ("item", "table")) in dels
    assert all(l.shared for l in adds + dels)
    before = derive_facts(scene)
    after = derive_facts(apply_solution(scene, pick_task(), sol))
    assert set(adds) == set(after - before)
    assert set(dels) == set(before - after)


# -- memoization ------------------------------------------------------------


def blocked_grasp_scene():
    """Low walls leave only the gx+ approach to the object open."""
    item = box("item", 0.5, 0.4, h=0.2)
    walls = [
        box("wl", 0.33, 0.4, w=0.06, d=0.3, h=0.2),
        box("wn", 0.5, 0.57, w=0.24, d=0.06, h=0.2),
        box("ws", 0.5, 0.23, w=0.24, d=0.06, h=0.2),
    ]
    return table_scene(objects=[item, *walls], zones=[spot("tgt", 1.1, -0.3)])


def test_blocked_grasps_memoized_across_efforts():
    scene = blocked_grasp_scene()
    memo = FailureMemo()
    task = GtpTask("PICK", obj="item", effort_cap=4)
    handle = SolveHandle(task, scene, memo)
    sols = []
    while (s := handle.next_solution()) is not None:
        sols.append(s)
    assert {s.grasp for s in sols} == {"gx+"}
    blocked = {k for k in memo.excluded if k[0] == "grasp"}
    assert blocked == {("grasp", "gx-"), ("grasp", "gy+"), ("grasp", "gy-")}
    # every exclusion was recorded at the lowest effort that tested it and is
    # never re-tested when the effort loop climbs
    assert all(e == 1 for e in memo.excluded.values())
    before = memo.skips
    handle2 = SolveHandle(task, scene, memo)
    while handle2.next_solution() is not None:
        pass
    assert memo.skips > before


def test_paranoid_mode_accepts_sound_memo():
    scene = blocked_grasp_scene()
    memo = FailureMemo()
    task = GtpTask("PICK", obj="item")
    handle = SolveHandle(task, scene, memo)
    while handle.next_solution() is not None:
        pass
    # re-test every skip against the unchanged scene: must not raise
    handle2 = SolveHandle(task, scene, memo, paranoid=True)
    while handle2.next_solution() is not None:
        pass


def test_paranoid_mode_catches_poisoned_memo():
    scene = blocked_grasp_scene()
    memo = FailureMemo()
    memo.sync(scene.version)
    memo.exclude(("grasp", "gx+"), 1)  # wrong: gx+ is actually free
    handle = SolveHandle(GtpTask("PICK", obj="item"), scene, memo, paranoid=True)
    with pytest.raises(gtp.MemoUnsound):
        handle.next_solution()


def test_memo_reset_on_scene_change():
    scene = blocked_grasp_scene()
    memo = FailureMemo()
    task = GtpTask("PICK", obj="item")
    handle = SolveHandle(task, scene, memo)
    while handle.next_solution() is not None:
        pass
    assert memo.excluded
    handle2 = SolveHandle(task, scene.with_version(99), memo)
    handle2.next_solution()
    assert memo.scene_version == 99


def test_effort_dependent_failures_not_memoized():
    # reach fails at efforts 1-2 for this zone; the retry at effort 3 must
    # succeed, so the early failures may not leave exclusions behind
    scene = table_scene(
        objects=[box("item", 0.5, 0.4, h=0.2)],
        zones=[spot("tgt", 1.25, 0.0, w=0.2, d=0.2)],
    )
    task = place_task(
        regions=("tgt",),
        profile=ConstraintProfile(require_reach=True, allowed_yaws=(0.0,)),
    )
    memo = FailureMemo()
    sol, _ = solve(task, scene, memo)
    assert sol is not None and sol.effort == 3
    assert not memo.excluded


def test_constraint_order_counts():
    # the single candidate point fails reach at efforts 1-3: no grasp or
    # orientation work may happen before the cheap reach test finally passes
    scene = table_scene(
        objects=[box("item", 0.5, 0.4, h=0.2)],
        zones=[spot("far", 1.45, 0.0, w=0.2, d=0.2)],
    )
    stats = GtpStats()
    task = place_task(regions=("far",), profile=ConstraintProfile(allowed_yaws=(0.0,)))
    sol, _ = solve(task, scene, stats=stats)
    assert sol is not None and sol.effort == 4
    k = stats.kind("MAKEACC")
    assert k.pts == 4  # one reach test per effort level for the single point
    assert k.orts == 1  # orientation tested only once reach passed
    assert k.calls <= 2  # path calls gated behind the cheap tests


# -- compound tasks ---------------------------------------------------------


def grasp_conflict_scene():
    """Pick admits only gx+; the cubby placement admits every grasp but gx+."""
    item = box("item", 0.5, 0.4, h=0.2)
    pick_walls = [
        box("wl", 0.33, 0.4, w=0.06, d=0.3, h=0.2),
        box("wn", 0.5, 0.57, w=0.24, d=0.06, h=0.2),
        box("ws", 0.5, 0.23, w=0.24, d=0.06, h=0.2),
    ]
    cubby_wall = box("cub", 1.27, -0.3, w=0.06, d=0.3, h=0.2)
    return table_scene(
        objects=[item, *pick_walls, cubby_wall],
        zones=[spot("tgt", 1.1, -0.3, w=0.2, d=0.2)],
    )


def compound():
    return GtpTask(
        "COMPOUND",
        components=(
            GtpTask("PICK", obj="item"),
            GtpTask(
                "MAKEACC", obj="item", target="person", regions=("tgt",),
                profile=ConstraintProfile(allowed_yaws=(0.0,)),
            ),
        ),
    )


def test_components_feasible_separately_but_jointly_infeasible():
    scene = grasp_conflict_scene()
    pick, place = compound().components

    psol, _ = solve(pick, scene)
    assert psol is not None and psol.grasp == "gx+"

    # committing to the pick makes the later placement fail (late failure)
    mid = apply_solution(scene, pick, psol, version=1)
    late, _ = solve(place, mid)
    assert late is None

    # joint search detects the conflict up front
    sol, handle = solve_compound(compound(), scene)
    assert sol is None and not handle.timed_out


def _hand_free(scene, cx, cy, cz, skip):
    """Independent axis-aligned re-implementation of the hand-probe check."""
    half, zhalf = PROBE_SIZE / 2, 0.04
    for o in scene.objects:
        if o.name in skip:
            continue
        xs = [p[0] for p in o.world_footprint()]
        ys = [p[1] for p in o.world_footprint()]
        z0, z1 = o.z_interval()
        if (
            cx + half > min(xs) + 1e-9 and cx - half < max(xs) - 1e-9
            and cy + half > min(ys) + 1e-9 and cy - half < max(ys) - 1e-9
            and cz + zhalf > z0 + 1e-9 and cz - zhalf < z1 - 1e-9
        ):
            return False
    return True


def test_compound_infeasibility_matches_exhaustive_oracle():
    scene = grasp_conflict_scene()
    dirs = {"gx+": (1, 0), "gx-": (-1, 0), "gy+": (0, 1), "gy-": (0, -1)}
    off = 0.1 + GRASP_CLEARANCE + PROBE_SIZE / 2
    pick_free, place_free = set(), set()
    for gid, (dx, dy) in dirs.items():
        if _hand_free(scene, 0.5 + dx * off, 0.4 + dy * off, 0.6, {"item"}):
            pick_free.add(gid)
        # the 0.2 m cubby admits exactly one placement of the 0.2 m object,
        # at its centre (1.1, -0.3); hand height there is 0.6
        if _hand_free(scene, 1.1 + dx * off, -0.3 + dy * off, 0.6, {"item"}):
            place_free.add(gid)
    assert pick_free and place_free  # each component is feasible on its own
    assert not (pick_free & place_free)  # ...but no grasp serves both
    sol, handle = solve_compound(compound(), scene)
    assert sol is None and not handle.timed_out


def test_compound_succeeds_without_the_conflict():
    scene = grasp_conflict_scene()
    opened = dataclasses.replace(
        scene, objects=tuple(o for o in scene.objects if o.name != "cub")
    )
    sol, _ = solve_compound(compound(), opened)
    assert sol is not None
    psol, csol = sol
    assert psol.grasp == csol.grasp == "gx+"
    assert solution_satisfies(compound(), sol, opened)


def test_compound_stats_attributed_to_main_component():
    stats = GtpStats()
    solve_compound(compound(), grasp_conflict_scene(), stats=stats)
    assert "MAKEACC" in stats.kinds and "PICK" not in stats.kinds


# -- solution log and alternatives ------------------------------------------


def test_log_replay_and_alternatives():
    scene = simple_scene()
    log = TaskSequenceLog()
    task = pick_task()
    sol, handle = solve(task, scene)
    after = apply_solution(scene, task, sol, version=1)
    entry = LogEntry(task, sol, handle, scene, after.version)
    log.append(entry)

    assert log.replay(after.version).obj("item").support == ("gripper", "bot")
    alt = alternative_for(entry)
    assert alt is not None and alt.identity() != sol.identity()

    log.truncate_to_version(0)
    assert not log.entries
