"""State, condition matching, and effect application semantics."""

import pytest
from hypothesis import given, settings, strategies as st

from geosym.symbolic import (
    Comparison,
    DomainError,
    Forall,
    Literal,
    State,
    TypedObjects,
    apply_effects,
    eval_expr,
    holds,
    holds_iter,
)


def lit(pred, *args, positive=True, evaluable=False):
    return Literal(pred, tuple(args), positive, evaluable)


# -- expressions ------------------------------------------------------------


def test_eval_expr_arithmetic():
    consts = {"cost": 5}
    assert eval_expr(("*", "?n", "cost"), {"?n": "3"}, consts) == 15
    assert eval_expr(("+", "?n", "1"), {"?n": "3"}, consts) == 4
    assert eval_expr(("-", "?x", "?c"), {"?x": "10", "?c": "4"}, consts) == 6
    assert eval_expr("cost", {}, consts) == 5
    assert eval_expr("7", {}, consts) == 7


def test_eval_expr_unbound_variable():
    with pytest.raises(DomainError):
        eval_expr(("*", "?n", "cost"), {}, {"cost": 5})


# -- state ------------------------------------------------------------------


def test_state_rejects_negative_and_unground():
    with pytest.raises(DomainError):
        State([lit("p", "a", positive=False)])
    with pytest.raises(DomainError):
        State([lit("p", "?x")])


def test_state_membership_and_matching_order():
    s = State([lit("p", "b"), lit("p", "a"), lit("q", "a", "b")])
    assert lit("p", "a") in s
    assert [f.args for f in s.matching("p")] == [("a",), ("b",)]
    assert s.matching("nope") == []


def test_apply_effects_delete_then_add():
    s = State([lit("n", "1")])
    s2 = apply_effects(s, [lit("n", "2")], [lit("n", "1")])
    assert s2.literals == frozenset({lit("n", "2")})
    # same literal deleted and added ends up present
    s3 = apply_effects(s, [lit("n", "1")], [lit("n", "1")])
    assert lit("n", "1") in s3


# -- matching ---------------------------------------------------------------


def test_holds_generates_all_bindings_in_order():
    s = State([lit("held", "b2", "m"), lit("held", "b1", "m")])
    out = holds((lit("held", "?b", "?m"),), s)
    assert [b["?b"] for b in out] == ["b1", "b2"]


def test_holds_joins_across_literals():
    s = State([lit("held", "b1", "m"), lit("title", "b1", "t1"), lit("title", "b2", "t2")])
    out = holds((lit("held", "?b", "?m"), lit("title", "?b", "?t")), s)
    assert out == [{"?b": "b1", "?m": "m", "?t": "t1"}]


def test_negative_literal_filters():
    s = State([lit("held", "b1", "m"), lit("hvy", "b1")])
    assert holds((lit("held", "?b", "m"), lit("hvy", "?b", positive=False)), s) == []
    s2 = State([lit("held", "b1", "m")])
    assert len(holds((lit("held", "?b", "m"), lit("hvy", "?b", positive=False)), s2)) == 1


def test_comparison_filters():
    s = State([lit("cred", "m", "7")])
    f = (lit("cred", "?m", "?x"), Comparison(">=", "?x", "5"))
    assert len(holds(f, s, consts={})) == 1
    f2 = (lit("cred", "?m", "?x"), Comparison("<", "?x", "5"))
    assert holds(f2, s) == []


def test_expression_argument_in_literal():
    s = State([lit("numLent", "m", "3")])
    # (numLent ?m (+ ?n 1)) unifies when the computed value matches
    f = (lit("numLent", "?m", ("+", "?n", "1")),)
    assert holds(f, s, binding={"?n": "2"}) == [{"?n": "2", "?m": "m"}]
    assert holds(f, s, binding={"?n": "3"}) == []


def test_forall_quantifier():
    objs = TypedObjects({"book": ("b1", "b2")})
    none_held = (Forall("?b", "book", (lit("held", "?b", "m", positive=False),)),)
    assert len(holds(none_held, State(), objs)) == 1
    assert holds(none_held, State([lit("held", "b2", "m")]), objs) == []


def test_forall_over_empty_type_is_vacuous():
    f = (Forall("?b", "book", (lit("held", "?b", "m"),)),)
    assert len(holds(f, State(), TypedObjects())) == 1


def test_evaluable_delegated_and_cached():
    calls = []

    def ev(pred, args):
        calls.append((pred, args))
        return True

    s = State([lit("held", "b1", "m"), lit("held", "b2", "m")])
    f = (lit("held", "?b", "?m"), lit("canPick", "?b", evaluable=True))
    out = holds(f, s, evaluator=ev)
    assert len(out) == 2
    assert calls == [("canPick", ("b1",)), ("canPick", ("b2",))]
    # repeated ground instance evaluated once per query
    f2 = (lit("held", "?b", "?m"), lit("ok", evaluable=True), lit("ok", evaluable=True))
    calls.clear()
    assert len(holds(f2, s, evaluator=ev)) == 2
    assert calls == [("ok", ())]


def test_evaluable_runs_after_filters():
    calls = []

    def ev(pred, args):
        calls.append(args)
        return True

    s = State([lit("held", "b1", "m"), lit("held", "b2", "m"), lit("hvy", "b2")])
    f = (
        lit("canPick", "?b", evaluable=True),
        lit("held", "?b", "?m"),
        lit("hvy", "?b", positive=False),
    )
    out = holds(f, s, evaluator=ev)
    assert [b["?b"] for b in out] == ["b1"]
    assert calls == [("b1",)]  # b2 was filtered before the expensive call


def test_shared_partition():
    shared = lit("on", "b1", "desk")
    plain = lit("held", "b1", "m")
    assert shared.shared and not plain.shared
    s = State([shared, plain])
    assert s.ordinary_part() == frozenset({plain})
    s2 = s.replace_shared(frozenset({lit("visible", "b1", "m", "1")}))
    assert lit("visible", "b1", "m", "1") in s2
    assert shared not in s2
    assert plain in s2


# -- deterministic order property -------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.permutations([("p", ("a",)), ("p", ("b",)), ("p", ("c",)), ("q", ("a", "x"))]))
def test_binding_order_independent_of_insertion(perm):
    s = State([Literal(p, a) for p, a in perm])
    out = holds((lit("p", "?x"),), s)
    assert [b["?x"] for b in out] == ["a", "b", "c"]
