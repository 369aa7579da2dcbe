"""Library-receptionist benchmark: domain, scenes, task bindings, scenarios.

A robot receptionist lends reserved books to a member across a desk, takes
payment, and — when the member's credit is too low — places a POS machine on a
stand, then puts it away out of the member's sight and reach.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from importlib import resources

from .bridge import (
    BridgeResult,
    Strategy,
    TaskLibrary,
    interleaved_plan,
    verify_plan,
)
from .gtp import ConstraintProfile, GtpTask
from .lang import parse_domain, parse_problem
from .symbolic import HtnDomain, HtnProblem, Literal, Method
from .world import (
    AgentModel,
    ObjectModel,
    Pose,
    Region,
    Scene,
    Surface,
    derive_facts,
    validate_scene,
)
from . import geometry as geo

MEMBER = "m"
ROBOT = "pr2"

SCENE_VARIANTS = (
    "reception-open",
    "reception-cramped",
    "reception-cramped-blocked",
    "calibration",
    "experiment-v",
)


class BenchError(Exception):
    pass


# ---------------------------------------------------------------------------
# Domain


def domain_text() -> str:
    return resources.files("geosym").joinpath("data/librarian.htn").read_text()


def build_domain() -> HtnDomain:
    """The receptionist domain: 10 methods, 12 operators."""
    return parse_domain(domain_text())


#: extension used by the occlusion scenario: a pure check that an object is
#: visible to an agent with no physical effort (effort level 1)
_CHECKVIS_EXT = """
(operator CHECKVIS (?b ?m)
  :pre ((visible ?b ?m 1))
  :add ((confirmed ?b ?m))
  :del ())
"""


def build_domain_with_checkvis() -> HtnDomain:
    return parse_domain(domain_text() + _CHECKVIS_EXT)


def experiment_domain() -> HtnDomain:
    """Batch-experiment variant: standalone PICK steps are dropped from method
    bodies; the pick is instead folded into the following manipulation task as
    a compound geometric task (see :func:`build_library` with experiment mode).
    """
    base = build_domain()
    methods = tuple(
        Method(
            m.name,
            m.task,
            m.task_args,
            m.precondition,
            tuple(step for step in m.body if step[0] != "PICK"),
            m.rank,
        )
        for m in base.methods
    )
    dom = HtnDomain(base.operators, methods)
    dom.validate()
    return dom


# ---------------------------------------------------------------------------
# Task bindings


@dataclass(frozen=True)
class LibraryConfig:
    """Scene-level wiring of evaluable predicates to regions and constraints."""

    member: str = MEMBER
    accessible_regions: tuple[str, ...] = ("platform",)
    show_zone: str = "showzone"
    give_zone: str = "givezone"
    hide_regions: tuple[str, ...] = ("hideshelf",)
    #: per-object region override for the make-accessible task
    accessible_routes: tuple[tuple[str, tuple[str, ...]], ...] = ()
    #: per-object preferred placement point for the make-accessible task
    preferred: tuple[tuple[str, tuple[float, float]], ...] = ()
    #: fold a pick into placement tasks when the object is not yet gripped
    experiment: bool = False
    visible_threshold: float = 0.5


#: placements that present an object to the member keep it front-facing
_FRONT = (0.0,)


def build_library(cfg: LibraryConfig = LibraryConfig()) -> TaskLibrary:
    routes = dict(cfg.accessible_routes)
    preferred = dict(cfg.preferred)

    def with_pick(obj: str, task: GtpTask, scene: Scene) -> GtpTask:
        robot = scene.robot()
        if not cfg.experiment:
            return task
        if robot.gripper is not None and robot.gripper[0] == obj:
            return task
        return GtpTask("COMPOUND", components=(GtpTask("PICK", obj=obj), task))

    def pick(args, scene):
        return GtpTask("PICK", obj=args[0])

    def make_acc(args, scene):
        obj, member = args
        task = GtpTask(
            "MAKEACC",
            obj=obj,
            target=member,
            regions=routes.get(obj, cfg.accessible_regions),
            profile=ConstraintProfile(
                min_visible=cfg.visible_threshold,
                require_reach=True,
                allowed_yaws=_FRONT,
            ),
            preferred_point=preferred.get(obj),
        )
        return with_pick(obj, task, scene)

    def show(args, scene):
        obj, member = args
        task = GtpTask(
            "SHOW",
            obj=obj,
            target=member,
            regions=(cfg.show_zone,),
            profile=ConstraintProfile(
                min_visible=cfg.visible_threshold, allowed_yaws=_FRONT
            ),
        )
        return with_pick(obj, task, scene)

    def give(args, scene):
        obj, member = args
        task = GtpTask(
            "GIVE",
            obj=obj,
            target=member,
            regions=(cfg.give_zone,),
            profile=ConstraintProfile(
                min_visible=cfg.visible_threshold,
                require_reach=True,
                allowed_yaws=_FRONT,
            ),
        )
        return with_pick(obj, task, scene)

    def put_away(args, scene):
        obj, member = args
        task = GtpTask(
            "PUTAWAY",
            obj=obj,
            target=member,
            regions=cfg.hide_regions,
            profile=ConstraintProfile(hide_from_target=True),
        )
        return with_pick(obj, task, scene)

    def put_on(args, scene):
        top, base = args
        if cfg.experiment:
            # batch experiment substitutes a present-to-member placement for
            # the plain put-on, so the member can swipe the card
            task = GtpTask(
                "MAKEACC",
                obj=top,
                target=cfg.member,
                regions=(base,),
                profile=ConstraintProfile(
                    min_visible=cfg.visible_threshold,
                    require_reach=True,
                    allowed_yaws=_FRONT,
                ),
            )
        else:
            task = GtpTask("PUTON", obj=top, target=base, regions=(base,))
        return with_pick(top, task, scene)

    return TaskLibrary(
        builders={
            "pick": pick,
            "makeAcc": make_acc,
            "show": show,
            "give": give,
            "putAway": put_away,
            "putOn": put_on,
        },
        stubs=frozenset({"navTo"}),
    )


# ---------------------------------------------------------------------------
# Scenes


def _rect(w: float, d: float) -> tuple:
    return geo.rectangle(w, d)


def _rect_at(cx: float, cy: float, w: float, d: float) -> tuple:
    return geo.transform(geo.rectangle(w, d), cx, cy, 0.0)


def _robot() -> AgentModel:
    return AgentModel(
        name=ROBOT,
        kind="robot",
        base=(0.0, 0.0),
        eye_points=((0.0, 0.0, 1.35), (0.0, 0.0, 1.45), (0.1, 0.0, 1.5), (0.2, 0.0, 1.55)),
        reach_radii=(0.9, 1.1, 1.3, 1.5),
        reach_bands=((0.3, 1.3), (0.25, 1.4), (0.2, 1.5), (0.15, 1.6)),
        hand_home=(0.0, 0.0, 1.1),
    )


def _member(base=(2.0, 0.0), eyes=None) -> AgentModel:
    eyes = eyes or ((2.0, 0.0, 1.5), (1.9, 0.0, 1.45), (1.8, 0.0, 1.35), (1.7, 0.0, 1.2))
    return AgentModel(
        name=MEMBER,
        kind="human",
        base=base,
        eye_points=eyes,
        reach_radii=(0.6, 0.75, 0.9, 1.05),
        reach_bands=((0.7, 1.6), (0.6, 1.7), (0.5, 1.75), (0.3, 1.8)),
        hand_home=(base[0], base[1], 1.0),
    )


def _book(name: str, x: float, y: float, w=0.20, d=0.14, h=0.22, z=0.75, support="desk"):
    return ObjectModel(
        name=name, footprint=_rect(w, d), height=h, pose=Pose(x, y, z), support=("on", support)
    )


def _reception(cramped: bool, blocked: bool, seed: int | None = None) -> Scene:
    desk = Surface("desk", _rect_at(0.8, 0.0, 1.6, 0.8), 0.75)
    shelf = Surface("hideshelf", _rect_at(-0.4, -0.3, 0.4, 0.4), 0.35)
    jx = jy = {}
    if seed is not None:
        rng = random.Random(seed)
        jx = {n: rng.uniform(-0.02, 0.02) for n in ("b1", "b2", "mac")}
        jy = {n: rng.uniform(-0.02, 0.02) for n in ("b1", "b2", "mac")}

    def j(n, axis):
        return (jx if axis == "x" else jy).get(n, 0.0)

    if cramped:
        b1 = _book("b1", 0.35, -0.25, w=0.24, d=0.16, h=0.26)
        b2 = _book("b2", 0.35, 0.25, w=0.24, d=0.16, h=0.26)
        platform = ObjectModel(
            "platform", _rect(0.30, 0.22), 0.10, Pose(1.05, -0.02, 0.75), support=("on", "desk")
        )
        show_zone = Region("showzone", _rect_at(0.9, 0.0, 0.30, 0.26), 1.15, virtual=True)
        give_zone = Region("givezone", _rect_at(1.3, 0.10, 0.30, 0.26), 1.20, virtual=True)
        extra_zones: tuple[Region, ...] = ()
    else:
        # b1 is a thin folio: stacking another book on it hides it completely
        b1 = _book("b1", 0.35 + j("b1", "x"), -0.25 + j("b1", "y"), h=0.08)
        b2 = _book("b2", 0.35 + j("b2", "x"), 0.25 + j("b2", "y"), h=0.30)
        platform = ObjectModel(
            "platform", _rect(0.50, 0.40), 0.10, Pose(1.2, -0.1, 0.75), support=("on", "desk")
        )
        show_zone = Region("showzone", _rect_at(0.9, 0.0, 0.20, 0.20), 1.15, virtual=True)
        give_zone = Region("givezone", _rect_at(1.3, 0.10, 0.20, 0.20), 1.20, virtual=True)
        extra_zones = (
            # directly above b1's default platform placement: a stack spot
            Region("spot_occ", _rect_at(1.2, -0.1, 0.20, 0.20), 0.93, owner="b1"),
            Region("spot_clear", _rect_at(1.41, 0.27, 0.20, 0.20), 0.85, owner="platform"),
        )
    mac = ObjectModel(
        "mac", _rect(0.12, 0.12), 0.15,
        Pose(0.35 + j("mac", "x"), 0.0 + j("mac", "y"), 0.75), support=("on", "desk"),
    )
    stnd = ObjectModel(
        "stnd", _rect(0.20, 0.20), 0.05, Pose(1.3, 0.28, 0.75), support=("on", "desk")
    )
    objects = [b1, b2, mac, stnd, platform]
    if blocked:
        objects.append(
            ObjectModel("lamp", _rect(0.10, 0.10), 0.80, Pose(1.3, 0.10, 0.75), support=("on", "desk"))
        )
    scene = Scene(
        surfaces=(desk, shelf),
        objects=tuple(objects),
        agents=(_robot(), _member()),
        zones=(show_zone, give_zone) + extra_zones,
    )
    validate_scene(scene)
    return scene


def _calibration() -> Scene:
    table = Surface("ctable", _rect_at(0.5, 0.0, 1.0, 0.6), 0.75)
    b1 = _book("b1", 0.5, -0.15, h=0.24, support="ctable")
    b2 = _book("b2", 0.5, 0.15, h=0.24, support="ctable")
    screen_g = ObjectModel(
        "screen_g", _rect(0.06, 0.16), 0.41, Pose(0.95, -0.085, 0.75), support=("on", "ctable")
    )
    screen_w = ObjectModel(
        "screen_w", _rect(0.06, 0.16), 0.48, Pose(0.95, 0.085, 0.75), support=("on", "ctable")
    )
    member = _member(
        base=(1.5, 0.0),
        eyes=((1.5, 0.0, 1.4), (1.42, 0.0, 1.45), (1.34, 0.0, 1.52), (1.26, 0.0, 1.62)),
    )
    scene = Scene(
        surfaces=(table,),
        objects=(b1, b2, screen_g, screen_w),
        agents=(_robot(), member),
    )
    validate_scene(scene)
    return scene


def build_scene(variant: str, seed: int = 0) -> Scene:
    """Deterministic scene for a named variant."""
    if variant == "reception-open":
        return _reception(cramped=False, blocked=False)
    if variant == "reception-cramped":
        return _reception(cramped=True, blocked=False)
    if variant == "reception-cramped-blocked":
        return _reception(cramped=True, blocked=True)
    if variant == "calibration":
        return _calibration()
    if variant == "experiment-v":
        return _reception(cramped=False, blocked=False, seed=seed)
    raise BenchError(f"unknown scene variant {variant!r}")


# ---------------------------------------------------------------------------
# Problems


def problem_text(
    held: tuple[str, ...] = ("b1", "b2"),
    credit: int = 50,
    tasks: tuple[str, ...] = ("(MANAGEORDER m)",),
) -> str:
    init = [f"(held {b} m)" for b in held]
    init += [f"(title b1 t1)", f"(title b2 t2)", "(numLent m 0)", f"(cred m {credit})"]
    return (
        "(problem\n"
        "  :objects ((b1 book) (b2 book) (m member))\n"
        "  :consts ((cost 5))\n"
        f"  :init ({' '.join(init)})\n"
        f"  :tasks ({' '.join(tasks)}))\n"
    )


def build_problem(
    held: tuple[str, ...] = ("b1", "b2"),
    credit: int = 50,
    tasks: tuple[str, ...] = ("(MANAGEORDER m)",),
) -> HtnProblem:
    return parse_problem(problem_text(held, credit, tasks))


# ---------------------------------------------------------------------------
# Scenarios


@dataclass
class ScenarioReport:
    name: str
    passed: bool
    diagnostics: list[str] = field(default_factory=list)
    results: dict[str, BridgeResult] = field(default_factory=dict)


class _Check:
    """Collects assertion failures instead of raising."""

    def __init__(self, report: ScenarioReport):
        self.report = report

    def expect(self, ok: bool, message: str) -> bool:
        if not ok:
            self.report.passed = False
            self.report.diagnostics.append(message)
        return ok


def _count(plan, name: str) -> int:
    return sum(1 for s in plan if s.name == name)


def _verified(check: _Check, domain, problem, scene, library, result, label: str) -> None:
    if result.plan is None:
        return
    try:
        verify_plan(domain, problem, scene, library, result.plan)
    except Exception as exc:  # noqa: BLE001 - diagnostics, not control flow
        check.expect(False, f"{label}: replay verification failed: {exc}")


def _run_m2_trivial(report: ScenarioReport) -> None:
    check = _Check(report)
    domain = build_domain()
    scene = build_scene("reception-open")
    problem = build_problem(held=(), tasks=("(LEND m)",))
    library = build_library()
    result = interleaved_plan(domain, problem, scene, library)
    report.results["geometric-first"] = result
    if check.expect(result.ok, "planning failed"):
        check.expect(result.plan == [], f"expected empty plan, got {result.plan}")
        check.expect(result.stats.htn.backtracks == 0, "expected zero backtracks")
        check.expect(result.stats.geo_alternatives == 0, "expected zero alternatives")


def _run_method_preference(report: ScenarioReport) -> None:
    check = _Check(report)
    domain = build_domain()
    scene = build_scene("reception-open")
    problem = build_problem(held=("b1",))
    library = build_library()
    result = interleaved_plan(domain, problem, scene, library)
    report.results["geometric-first"] = result
    if check.expect(result.ok, "planning failed"):
        check.expect(_count(result.plan, "MAKEBKACC") == 1, "expected one MAKEBKACC")
        check.expect(_count(result.plan, "GIVEBK") == 0, "expected no GIVEBK")
        _verified(check, domain, problem, scene, library, result, "plan")


def _run_mixed_strategy(report: ScenarioReport) -> None:
    check = _Check(report)
    domain = build_domain()
    scene = build_scene("reception-cramped")
    problem = build_problem()
    library = build_library()
    result = interleaved_plan(domain, problem, scene, library)
    report.results["geometric-first"] = result
    if check.expect(result.ok, "planning failed on reception-cramped"):
        check.expect(_count(result.plan, "MAKEBKACC") == 1, "expected exactly one MAKEBKACC")
        check.expect(_count(result.plan, "GIVEBK") == 1, "expected exactly one GIVEBK")
        check.expect(
            result.stats.htn.backtracks >= 1,
            f"expected symbolic backtracking, got {result.stats.htn.backtracks}",
        )
        _verified(check, domain, problem, scene, library, result, "plan")


def _run_blocked_handover(report: ScenarioReport) -> None:
    check = _Check(report)
    domain = build_domain()
    scene = build_scene("reception-cramped-blocked")
    problem = build_problem()
    library = build_library()
    result = interleaved_plan(domain, problem, scene, library)
    report.results["geometric-first"] = result
    check.expect(not result.ok, "expected failure with the hand-over space blocked")
    check.expect(result.failure == "exhausted", f"unexpected failure mode {result.failure}")
    check.expect(
        result.stats.alternative_attempts >= 1,
        "expected geometric alternatives to be attempted before giving up",
    )


def _occlusion_setup():
    domain = build_domain_with_checkvis()
    scene = build_scene("reception-open")
    problem = build_problem(
        tasks=("(MANAGEORDER m)", "(CHECKVIS b1 m)", "(CHECKVIS b2 m)")
    )
    library = build_library(
        LibraryConfig(accessible_routes=(("b2", ("spot_occ", "spot_clear")),))
    )
    return domain, scene, problem, library


def _run_occlusion_rescue(report: ScenarioReport) -> None:
    check = _Check(report)
    domain, scene, problem, library = _occlusion_setup()
    geo_res = interleaved_plan(domain, problem, scene, library, Strategy("geometric-first"))
    report.results["geometric-first"] = geo_res
    if check.expect(geo_res.ok, "geometric-first failed"):
        check.expect(
            geo_res.stats.geo_alternatives == 1,
            f"expected exactly one geometric alternative, got {geo_res.stats.geo_alternatives}",
        )
        check.expect(
            geo_res.stats.htn.backtracks == 0,
            f"expected no symbolic backtracking, got {geo_res.stats.htn.backtracks}",
        )
        facts = derive_facts(geo_res.scene)
        for book in ("b1", "b2"):
            check.expect(
                Literal("visible", (book, MEMBER, "1")) in facts,
                f"{book} should end up visible to the member with no effort",
            )
        _verified(check, domain, problem, scene, library, geo_res, "geometric-first plan")
    htn_res = interleaved_plan(domain, problem, scene, library, Strategy("htn-only"))
    report.results["htn-only"] = htn_res
    if check.expect(htn_res.ok, "htn-only failed"):
        check.expect(
            htn_res.stats.htn.backtracks >= 1,
            "htn-only should need symbolic backtracking",
        )
        check.expect(
            htn_res.stats.geo_alternatives == 0,
            "htn-only must not take geometric alternatives",
        )


#: expected minimal-effort pattern on the calibration scene:
#: (object, agent, predicate) -> effort level
CALIBRATION_PATTERN = {
    ("b1", MEMBER, "visible"): 3,
    ("b2", MEMBER, "visible"): 4,
    ("b1", MEMBER, "reachable"): 4,
    ("b2", MEMBER, "reachable"): 4,
    ("b1", ROBOT, "visible"): 1,
    ("b2", ROBOT, "visible"): 1,
    ("b1", ROBOT, "reachable"): 1,
    ("b2", ROBOT, "reachable"): 1,
}


def _run_calibration(report: ScenarioReport) -> None:
    check = _Check(report)
    scene = build_scene("calibration")
    facts = derive_facts(scene)
    for (obj, agent, pred), effort in CALIBRATION_PATTERN.items():
        want = Literal(pred, (obj, agent, str(effort)))
        check.expect(
            want in facts,
            f"expected {want}; got "
            + ", ".join(
                sorted(str(f) for f in facts if f.pred == pred and f.args[:2] == (obj, agent))
            ),
        )


SCENARIOS = {
    "m2-trivial": _run_m2_trivial,
    "method-preference": _run_method_preference,
    "mixed-strategy": _run_mixed_strategy,
    "blocked-handover": _run_blocked_handover,
    "occlusion-rescue": _run_occlusion_rescue,
    "calibration-pattern": _run_calibration,
}


def run_scenario(name: str) -> ScenarioReport:
    if name not in SCENARIOS:
        raise BenchError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}")
    report = ScenarioReport(name, passed=True)
    SCENARIOS[name](report)
    return report
