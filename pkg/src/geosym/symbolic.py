"""Ground first-order machinery: terms, literals, states, operators, methods.

Terms are plain strings.  A leading ``?`` marks a variable; anything else is a
constant.  Integer-valued constants are their decimal spelling, which keeps
numeric fluents (credit, lending counters) in the same representation as every
other constant.  States are closed-world sets of ground positive literals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

#: Predicates whose truth is derived from the geometric world, never asserted
#: directly by a domain author.
SHARED_PREDICATES = frozenset({"visible", "reachable", "on", "inside", "coveredBy"})

Term = str
Binding = dict[str, str]


class DomainError(Exception):
    """Structural problem in a domain, problem, or query."""


def is_variable(term: Term) -> bool:
    return term.startswith("?")


def is_number(term: Term) -> bool:
    try:
        int(term)
        return True
    except ValueError:
        return False


# Arithmetic argument expressions: a Term, or a nested tuple ("+"|"-"|"*", a, b).
Expr = object


def eval_expr(expr: Expr, binding: Binding, consts: dict[str, int]) -> int:
    """Evaluate an integer argument expression under a binding."""
    if isinstance(expr, tuple):
        op, a, b = expr
        va = eval_expr(a, binding, consts)
        vb = eval_expr(b, binding, consts)
        if op == "+":
            return va + vb
        if op == "-":
            return va - vb
        if op == "*":
            return va * vb
        raise DomainError(f"unknown arithmetic operator {op!r}")
    term = binding.get(expr, expr) if isinstance(expr, str) else expr
    if isinstance(term, str):
        if is_number(term):
            return int(term)
        if term in consts:
            return consts[term]
    raise DomainError(f"non-numeric term in arithmetic context: {term!r}")


def ground_arg(expr: Expr, binding: Binding, consts: dict[str, int]) -> Term:
    """Ground one argument: substitute, and fold arithmetic to a numeral."""
    if isinstance(expr, tuple):
        return str(eval_expr(expr, binding, consts))
    value = binding.get(expr, expr)
    if is_variable(value):
        raise DomainError(f"unbound variable {value!r}")
    return value


@dataclass(frozen=True)
class Literal:
    """A predicate applied to argument expressions.

    ``evaluable`` literals delegate their truth to the geometric planner;
    literals over :data:`SHARED_PREDICATES` are geometry-derived facts.
    """

    pred: str
    args: tuple[Expr, ...]
    positive: bool = True
    evaluable: bool = False

    @property
    def shared(self) -> bool:
        return self.pred in SHARED_PREDICATES

    def ground(self, binding: Binding, consts: dict[str, int] | None = None) -> "Literal":
        consts = consts or {}
        return Literal(
            self.pred,
            tuple(ground_arg(a, binding, consts) for a in self.args),
            self.positive,
            self.evaluable,
        )

    def is_ground(self) -> bool:
        return all(
            not (isinstance(a, str) and is_variable(a)) for a in self.args
        ) and not any(isinstance(a, tuple) for a in self.args)

    def negate(self) -> "Literal":
        return Literal(self.pred, self.args, not self.positive, self.evaluable)

    def __str__(self) -> str:
        inner = " ".join(_expr_str(a) for a in self.args)
        core = f"({self.pred} {inner})" if inner else f"({self.pred})"
        if self.evaluable:
            core = f"(? {self.pred} {inner})" if inner else f"(? {self.pred})"
        return core if self.positive else f"(not {core})"


def _expr_str(expr: Expr) -> str:
    if isinstance(expr, tuple):
        return f"({expr[0]} {_expr_str(expr[1])} {_expr_str(expr[2])})"
    return str(expr)


@dataclass(frozen=True)
class Comparison:
    """Built-in numeric comparator over argument expressions."""

    op: str  # ">=" or "<"
    lhs: Expr
    rhs: Expr

    def holds(self, binding: Binding, consts: dict[str, int]) -> bool:
        a = eval_expr(self.lhs, binding, consts)
        b = eval_expr(self.rhs, binding, consts)
        return a >= b if self.op == ">=" else a < b

    def __str__(self) -> str:
        return f"({self.op} {_expr_str(self.lhs)} {_expr_str(self.rhs)})"


@dataclass(frozen=True)
class Forall:
    """Universal quantification over the constants of one declared type."""

    var: str
    vartype: str
    body: tuple  # conjunction of Literal/Comparison/Forall

    def __str__(self) -> str:
        inner = " ".join(str(c) for c in self.body)
        return f"(forall ({self.var} {self.vartype}) {inner})"


Condition = object  # Literal | Comparison | Forall
Formula = tuple  # conjunction of Conditions


class State:
    """Immutable set of ground positive literals with a by-predicate index."""

    __slots__ = ("literals", "_index")

    def __init__(self, literals: Sequence[Literal] | frozenset = ()):  # type: ignore[assignment]
        lits = frozenset(literals)
        for lit in lits:
            if not lit.positive:
                raise DomainError(f"state literals must be positive: {lit}")
            if not lit.is_ground():
                raise DomainError(f"state literals must be ground: {lit}")
        self.literals: frozenset[Literal] = lits
        index: dict[str, list[Literal]] = {}
        for lit in lits:
            index.setdefault(lit.pred, []).append(lit)
        for group in index.values():
            group.sort(key=lambda l: l.args)
        self._index = index

    def matching(self, pred: str) -> list[Literal]:
        return self._index.get(pred, [])

    def __contains__(self, lit: Literal) -> bool:
        return lit in self.literals

    def __len__(self) -> int:
        return len(self.literals)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, State) and self.literals == other.literals

    def __hash__(self) -> int:
        return hash(self.literals)

    def shared_part(self) -> frozenset[Literal]:
        return frozenset(l for l in self.literals if l.shared)

    def ordinary_part(self) -> frozenset[Literal]:
        return frozenset(l for l in self.literals if not l.shared)

    def replace_shared(self, shared: Sequence[Literal]) -> "State":
        """State with the geometry-derived partition swapped wholesale."""
        return State(self.ordinary_part() | frozenset(shared))

    def constants(self) -> list[str]:
        seen = {a for lit in self.literals for a in lit.args}
        return sorted(seen)

    def __repr__(self) -> str:
        return "State({" + ", ".join(sorted(str(l) for l in self.literals)) + "})"


def apply_effects(
    state: State,
    adds: Sequence[Literal],
    deletes: Sequence[Literal],
    geo_adds: Sequence[Literal] = (),
    geo_deletes: Sequence[Literal] = (),
) -> State:
    """New state = (state - deletes - geo_deletes) + adds + geo_adds."""
    for lit in (*adds, *deletes, *geo_adds, *geo_deletes):
        if not lit.is_ground():
            raise DomainError(f"non-ground effect literal: {lit}")
    removed = {l if l.positive else l.negate() for l in (*deletes, *geo_deletes)}
    added = {l for l in (*adds, *geo_adds)}
    return State((state.literals - removed) | added)


Evaluator = Callable[[str, tuple[str, ...]], bool]


def _false_evaluator(pred: str, args: tuple[str, ...]) -> bool:
    return False


@dataclass
class TypedObjects:
    """Constants grouped by their declared type tag."""

    by_type: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def of(self, typename: str) -> tuple[str, ...]:
        return self.by_type.get(typename, ())

    def all(self) -> tuple[str, ...]:
        out: set[str] = set()
        for group in self.by_type.values():
            out.update(group)
        return tuple(sorted(out))


def _order_conjuncts(formula: Formula) -> list[Condition]:
    """Cheap constraints first, evaluable predicates last.

    Positive ordinary literals generate bindings, then quantifiers, negations
    and comparisons filter, and only surviving bindings reach the (expensive)
    evaluable literals.
    """
    generators, filters, evaluables = [], [], []
    for c in formula:
        if isinstance(c, Literal) and c.evaluable:
            evaluables.append(c)
        elif isinstance(c, Literal) and c.positive:
            generators.append(c)
        else:
            filters.append(c)
    return generators + filters + evaluables


def holds_iter(
    formula: Formula,
    state: State,
    objects: TypedObjects | None = None,
    evaluator: Evaluator | None = None,
    consts: dict[str, int] | None = None,
    binding: Binding | None = None,
) -> Iterator[Binding]:
    """Yield every satisfying binding, lazily, in deterministic order.

    Candidate state literals are visited in lexicographic argument order, so
    the binding stream does not depend on state insertion order.  Each distinct
    ground evaluable instance is delegated to the evaluator exactly once per
    query.
    """
    objects = objects or TypedObjects()
    evaluator = evaluator or _false_evaluator
    consts = consts or {}
    eval_cache: dict[tuple[str, tuple[str, ...]], bool] = {}
    conjuncts = _order_conjuncts(formula)

    def unify(lit: Literal, fact: Literal, b: Binding) -> Binding | None:
        if len(lit.args) != len(fact.args):
            return None
        out = dict(b)
        for arg, val in zip(lit.args, fact.args):
            if isinstance(arg, tuple):
                if str(eval_expr(arg, out, consts)) != val:
                    return None
            elif is_variable(arg):
                if arg in out:
                    if out[arg] != val:
                        return None
                else:
                    out[arg] = val
            elif arg != val:
                return None
        return out

    def check_filter(cond: Condition, b: Binding) -> bool:
        if isinstance(cond, Comparison):
            return cond.holds(b, consts)
        if isinstance(cond, Forall):
            for value in objects.of(cond.vartype):
                sub = dict(b)
                sub[cond.var] = value
                ok = False
                for _ in holds_iter(cond.body, state, objects, evaluator, consts, sub):
                    ok = True
                    break
                if not ok:
                    return False
            return True
        lit: Literal = cond  # negative or evaluable literal
        ground = lit.ground(b, consts)
        if lit.evaluable:
            key = (ground.pred, ground.args)
            if key not in eval_cache:
                eval_cache[key] = bool(evaluator(ground.pred, ground.args))
            value = eval_cache[key]
            return value if lit.positive else not value
        present = Literal(ground.pred, ground.args) in state
        return present if lit.positive else not present

    def solve(i: int, b: Binding) -> Iterator[Binding]:
        if i == len(conjuncts):
            yield dict(b)
            return
        cond = conjuncts[i]
        if isinstance(cond, Literal) and cond.positive and not cond.evaluable:
            for fact in state.matching(cond.pred):
                nb = unify(cond, fact, b)
                if nb is not None:
                    yield from solve(i + 1, nb)
        else:
            if check_filter(cond, b):
                yield from solve(i + 1, b)

    yield from solve(0, dict(binding or {}))


def holds(
    formula: Formula,
    state: State,
    objects: TypedObjects | None = None,
    evaluator: Evaluator | None = None,
    consts: dict[str, int] | None = None,
    binding: Binding | None = None,
) -> list[Binding]:
    """All satisfying bindings of a conjunction against a state."""
    return list(holds_iter(formula, state, objects, evaluator, consts, binding))


@dataclass(frozen=True)
class Operator:
    """STRIPS-style operator, optionally linked to a geometric task.

    A linked task name makes this a GS operator: its precondition carries the
    task's evaluable predicate and its effects are combined with the add and
    delete lists computed geometrically for the chosen solution.
    """

    name: str
    params: tuple[str, ...]
    precondition: Formula
    adds: tuple[Literal, ...]
    deletes: tuple[Literal, ...]
    gtp_task: str | None = None

    def param_binding(self, args: Sequence[str]) -> Binding:
        if len(args) != len(self.params):
            raise DomainError(
                f"{self.name} expects {len(self.params)} args, got {len(args)}"
            )
        return dict(zip(self.params, args))


@dataclass(frozen=True)
class Method:
    """Refinement rule: solves one abstract task via an ordered body."""

    name: str
    task: str
    task_args: tuple[str, ...]
    precondition: Formula
    body: tuple[tuple[str, tuple[Expr, ...]], ...]
    rank: int = 0


@dataclass(frozen=True)
class HtnDomain:
    operators: tuple[Operator, ...]
    methods: tuple[Method, ...]

    def __post_init__(self) -> None:
        names = [o.name for o in self.operators] + [m.name for m in self.methods]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise DomainError(f"duplicate names in domain: {sorted(dupes)}")

    @property
    def operator_map(self) -> dict[str, Operator]:
        return {o.name: o for o in self.operators}

    def methods_for(self, task: str) -> list[Method]:
        return sorted((m for m in self.methods if m.task == task), key=lambda m: m.rank)

    def abstract_tasks(self) -> set[str]:
        return {m.task for m in self.methods}

    def validate(self) -> None:
        """Static lint: body references resolve; GS wiring is coherent."""
        ops = self.operator_map
        abstract = self.abstract_tasks()
        for m in self.methods:
            for task, _ in m.body:
                if task not in ops and task not in abstract:
                    raise DomainError(
                        f"method {m.name} references undefined task {task}"
                    )
        for op in self.operators:
            for lit in (*op.adds, *op.deletes):
                if lit.shared:
                    raise DomainError(
                        f"operator {op.name} statically asserts shared literal {lit}"
                    )
                if lit.evaluable:
                    raise DomainError(
                        f"operator {op.name} has evaluable literal in effects"
                    )
            if op.gtp_task is not None:
                preds = {
                    c.pred
                    for c in _flatten(op.precondition)
                    if isinstance(c, Literal) and c.evaluable
                }
                if op.gtp_task not in preds:
                    raise DomainError(
                        f"GS operator {op.name}: linked task {op.gtp_task!r} "
                        f"missing from evaluable precondition literals {sorted(preds)}"
                    )


def _flatten(formula: Formula) -> Iterator[Condition]:
    for c in formula:
        if isinstance(c, Forall):
            yield from _flatten(c.body)
        else:
            yield c


@dataclass(frozen=True)
class HtnProblem:
    tasks: tuple[tuple[str, tuple[str, ...]], ...]
    init: State
    objects: TypedObjects
    consts: dict[str, int]

    def with_init(self, init: State) -> "HtnProblem":
        return HtnProblem(self.tasks, init, self.objects, self.consts)
