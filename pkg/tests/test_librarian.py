"""Receptionist benchmark: domain shape, scenes, task wiring, scenarios."""

import pytest

from geosym.gtp import GtpTask
from geosym.librarian import (
    SCENARIOS,
    SCENE_VARIANTS,
    BenchError,
    LibraryConfig,
    build_domain,
    build_domain_with_checkvis,
    build_library,
    build_problem,
    build_scene,
    experiment_domain,
    run_scenario,
)
from geosym.symbolic import Literal
from geosym.world import validate_scene


# -- domain golden structure -------------------------------------------------


def test_domain_counts():
    d = build_domain()
    assert len(d.methods) == 10
    assert len(d.operators) == 12


def test_domain_method_names_and_order():
    d = build_domain()
    assert [m.name for m in d.methods] == [f"m{i}" for i in range(1, 11)]
    assert [m.rank for m in d.methods] == list(range(10))


def test_domain_operator_names():
    d = build_domain()
    names = {o.name for o in d.operators}
    assert {
        "MAKEBKACC", "GIVEBK", "PICK", "SHOW", "PUTON", "PUTAWAY", "NAVTO",
    } <= names
    geometric = {o.name for o in d.operators if o.gtp_task is not None}
    assert {"MAKEBKACC", "GIVEBK", "PICK", "SHOW", "PUTON", "PUTAWAY"} <= geometric


def test_checkvis_extension():
    d = build_domain_with_checkvis()
    assert len(d.operators) == 13
    op = d.operator_map["CHECKVIS"]
    assert op.precondition[0].pred == "visible"
    assert op.gtp_task is None


def test_experiment_domain_drops_standalone_picks():
    d = experiment_domain()
    assert len(d.methods) == 10 and len(d.operators) == 12
    for m in d.methods:
        assert all(step[0] != "PICK" for step in m.body)
    base = build_domain()
    assert any(
        step[0] == "PICK" for m in base.methods for step in m.body
    ), "the base domain should contain standalone pick steps"


# -- scenes ------------------------------------------------------------------


@pytest.mark.parametrize("variant", SCENE_VARIANTS)
def test_scene_variants_are_valid(variant):
    scene = build_scene(variant)
    validate_scene(scene)
    assert scene.robot().name == "pr2"


def test_unknown_variant_rejected():
    with pytest.raises(BenchError):
        build_scene("reception-imaginary")


def test_experiment_scene_seeded_jitter():
    a = build_scene("experiment-v", seed=1)
    b = build_scene("experiment-v", seed=1)
    c = build_scene("experiment-v", seed=2)
    assert a.obj("b1").pose == b.obj("b1").pose  # deterministic per seed
    assert a.obj("b1").pose != c.obj("b1").pose
    base = build_scene("reception-open")
    for name in ("b1", "b2", "mac"):
        dx = abs(a.obj(name).pose.x - base.obj(name).pose.x)
        dy = abs(a.obj(name).pose.y - base.obj(name).pose.y)
        assert dx <= 0.02 + 1e-9 and dy <= 0.02 + 1e-9


def test_problem_contents():
    p = build_problem(held=("b1",), credit=7)
    assert Literal("held", ("b1", "m")) in p.init
    assert Literal("cred", ("m", "7")) in p.init
    assert p.consts == {"cost": 5}
    assert p.objects.of("book") == ("b1", "b2")


# -- task wiring -------------------------------------------------------------


def test_library_routes_override_regions():
    lib = build_library(LibraryConfig(accessible_routes=(("b2", ("spot_occ",)),)))
    scene = build_scene("reception-open")
    t_default = lib.build("makeAcc", ("b1", "m"), scene)
    t_routed = lib.build("makeAcc", ("b2", "m"), scene)
    assert t_default.regions == ("platform",)
    assert t_routed.regions == ("spot_occ",)


def test_library_experiment_mode_folds_pick():
    scene = build_scene("reception-open")
    plain = build_library().build("makeAcc", ("b1", "m"), scene)
    folded = build_library(LibraryConfig(experiment=True)).build(
        "makeAcc", ("b1", "m"), scene
    )
    assert plain.kind == "MAKEACC"
    assert folded.kind == "COMPOUND"
    assert [c.kind for c in folded.components] == ["PICK", "MAKEACC"]


def test_library_pick_builder():
    lib = build_library()
    task = lib.build("pick", ("b1",), build_scene("reception-open"))
    assert task == GtpTask("PICK", obj="b1")
    assert lib.known("navTo")  # navigation is stubbed out


# -- scenario registry -------------------------------------------------------


def test_unknown_scenario_rejected():
    with pytest.raises(BenchError):
        run_scenario("imaginary")


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenario_passes(name):
    report = run_scenario(name)
    assert report.passed, "; ".join(report.diagnostics)
