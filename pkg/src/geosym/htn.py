"""Depth-first totally-ordered HTN refinement with chronological backtracking.

The planner keeps an explicit stack of choice points (method choices, binding
choices, and geometric solution choices) so that backtracking can restore the
exact pre-choice situation: task sequence, state, plan prefix, and scene
version.  Geometric behavior is injected through a hooks object; the default
hooks make this a pure symbolic planner.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from .symbolic import (
    Binding,
    DomainError,
    HtnProblem,
    Literal,
    Operator,
    State,
    apply_effects,
    ground_arg,
    holds_iter,
)

TaskInstance = tuple[str, tuple[str, ...], int]  # (name, ground args, depth)


@dataclass
class PlanStep:
    """One committed primitive action, with its geometric annotations."""

    name: str
    args: tuple[str, ...]
    binding: Binding
    geo_adds: tuple[Literal, ...] = ()
    geo_dels: tuple[Literal, ...] = ()
    gtp_pred: str | None = None
    entry: object | None = None  # geometric log-entry handle for GS actions


@dataclass
class PlanStats:
    methods_tried: int = 0
    expansions: int = 0
    backtracks: int = 0
    depth_hit: bool = False


@dataclass
class PlanResult:
    plan: list[PlanStep] | None
    stats: PlanStats
    failure: str | None = None  # None | "exhausted" | "depth-limit"

    @property
    def ok(self) -> bool:
        return self.plan is not None


@dataclass
class _Snapshot:
    d: tuple[TaskInstance, ...]
    state: State
    plan_len: int
    stack_len: int
    scene_version: int


@dataclass
class _ChoicePoint:
    kind: str  # "method-choice" | "binding-choice" | "gtp-solution-choice"
    snap: _Snapshot
    alternatives: Iterator | None = None
    # payload for re-committing a primitive
    op: Operator | None = None
    head: TaskInstance | None = None
    binding: Binding | None = None
    entry: object | None = None


class PlannerHooks:
    """Bridge surface; the default implementation is purely symbolic."""

    def __init__(self, evaluator=None):
        self._evaluator = evaluator

    def evaluate(self, pred: str, args: tuple[str, ...], state: State) -> bool:
        if self._evaluator is None:
            return False
        return bool(self._evaluator(pred, args))

    def commit(self, op: Operator, args: tuple[str, ...], binding: Binding):
        """Apply the pinned geometric solution; returns (adds, dels, entry)."""
        return ((), (), None)

    def scene_version(self) -> int:
        return 0

    def restore(self, version: int) -> None:
        pass

    def reopen(self, entry: object):
        """Next geometric alternative for a re-entered GS choice point."""
        return None

    def on_stuck(self, trace: "DecompositionTrace", head: TaskInstance, op: Operator) -> bool:
        """Last-chance rescue before HTN backtracking; True means retry."""
        return False


class DecompositionTrace:
    """Unified choice-point stack spanning HTN and geometric choices."""

    def __init__(self, problem: HtnProblem, hooks: PlannerHooks, depth_limit: int = 512):
        self.problem = problem
        self.hooks = hooks
        self.depth_limit = depth_limit
        self.d: tuple[TaskInstance, ...] = tuple(
            (name, tuple(args), 0) for name, args in problem.tasks
        )
        self.state: State = problem.init
        self.plan: list[PlanStep] = []
        self.stack: list[_ChoicePoint] = []
        #: per plan step: the situation just before that step was committed
        self.resume_points: list[_Snapshot] = []
        self.stats = PlanStats()

    # -- snapshot plumbing ---------------------------------------------------

    def _snapshot(self) -> _Snapshot:
        return _Snapshot(
            self.d, self.state, len(self.plan), len(self.stack), self.hooks.scene_version()
        )

    def _restore(self, snap: _Snapshot) -> None:
        self.d = snap.d
        self.state = snap.state
        del self.plan[snap.plan_len :]
        del self.resume_points[snap.plan_len :]
        self.hooks.restore(snap.scene_version)

    def truncate_to(self, step_index: int, state: State | None = None) -> None:
        """Rewind to just before plan step ``step_index`` (bridge reconciliation)."""
        snap = self.resume_points[step_index]
        self.d = snap.d
        self.state = state if state is not None else snap.state
        del self.plan[step_index:]
        del self.resume_points[step_index:]
        del self.stack[snap.stack_len :]

    def set_state(self, state: State) -> None:
        self.state = state

    # -- refinement ----------------------------------------------------------

    def _state_evaluator(self):
        state = self.state
        return lambda pred, args: self.hooks.evaluate(pred, args, state)

    def _method_alternatives(self, head: TaskInstance):
        """Lazy (method, binding) pairs in declaration-rank then binding order."""
        name, args, _depth = head
        problem = self.problem

        def gen():
            for method in self._domain_methods(name):
                if len(method.task_args) != len(args):
                    continue
                seed: Binding = {}
                ok = True
                for param, value in zip(method.task_args, args):
                    if param.startswith("?"):
                        if seed.get(param, value) != value:
                            ok = False
                            break
                        seed[param] = value
                    elif param != value:
                        ok = False
                        break
                if not ok:
                    continue
                self.stats.methods_tried += 1
                for binding in holds_iter(
                    method.precondition,
                    self.state,
                    problem.objects,
                    self._state_evaluator(),
                    problem.consts,
                    seed,
                ):
                    yield (method, binding)

        return gen()

    def _domain_methods(self, task: str):
        return self._domain.methods_for(task)

    @property
    def _domain(self):
        return self._domain_ref

    def attach_domain(self, domain) -> None:
        self._domain_ref = domain

    def _apply_method(self, method, binding: Binding, head: TaskInstance) -> None:
        depth = head[2] + 1
        consts = self.problem.consts
        body = tuple(
            (name, tuple(ground_arg(a, binding, consts) for a in args), depth)
            for name, args in method.body
        )
        self.d = body + self.d[1:]

    def _primitive_bindings(self, op: Operator, head: TaskInstance):
        seed = op.param_binding(head[1])
        return holds_iter(
            op.precondition,
            self.state,
            self.problem.objects,
            self._state_evaluator(),
            self.problem.consts,
            seed,
        )

    def _commit_primitive(
        self, op: Operator, head: TaskInstance, binding: Binding, snap: _Snapshot
    ) -> None:
        """Move the head action into the plan prefix and progress the state."""
        geo_adds: tuple[Literal, ...] = ()
        geo_dels: tuple[Literal, ...] = ()
        entry = None
        if op.gtp_task is not None:
            geo_adds, geo_dels, entry = self.hooks.commit(op, head[1], binding)
            self.stack.append(
                _ChoicePoint(
                    "gtp-solution-choice", snap, op=op, head=head, binding=binding, entry=entry
                )
            )
        consts = self.problem.consts
        adds = tuple(l.ground(binding, consts) for l in op.adds)
        dels = tuple(l.ground(binding, consts) for l in op.deletes)
        self.resume_points.append(snap)
        self.state = apply_effects(self.state, adds, dels, geo_adds, geo_dels)
        self.plan.append(
            PlanStep(head[0], head[1], binding, geo_adds, geo_dels, op.gtp_task, entry)
        )
        self.d = self.d[1:]

    def step(self) -> str:
        """One refinement step: 'done', 'progressed', or 'needs-backtrack'."""
        if not self.d:
            return "done"
        head = self.d[0]
        if head[2] > self.depth_limit:
            self.stats.depth_hit = True
            return "needs-backtrack"
        self.stats.expansions += 1
        name = head[0]
        ops = self._domain.operator_map
        if name in ops:
            op = ops[name]
            snap = self._snapshot()
            bindings = self._primitive_bindings(op, head)
            first = next(bindings, None)
            if first is None:
                if self.hooks.on_stuck(self, head, op):
                    return "progressed"
                return "needs-backtrack"
            self.stack.append(
                _ChoicePoint("binding-choice", snap, alternatives=bindings, op=op, head=head)
            )
            self._commit_primitive(op, head, first, snap)
            return "progressed"
        if name in self._domain.abstract_tasks():
            snap = self._snapshot()
            alts = self._method_alternatives(head)
            first = next(alts, None)
            if first is None:
                return "needs-backtrack"
            self.stack.append(
                _ChoicePoint("method-choice", snap, alternatives=alts, head=head)
            )
            method, binding = first
            self._apply_method(method, binding, head)
            return "progressed"
        raise DomainError(f"task {name!r} is neither an operator nor an abstract task")

    def backtrack(self) -> bool:
        """Re-enter the topmost choice point that still has an alternative."""
        while self.stack:
            cp = self.stack.pop()
            self._restore(cp.snap)
            if cp.kind == "gtp-solution-choice":
                result = self.hooks.reopen(cp.entry)
                if result is None:
                    continue
                self.stats.backtracks += 1
                geo_adds, geo_dels = result
                consts = self.problem.consts
                # re-commit the same action with the alternative solution
                head, op = cp.head, cp.op
                binding = cp.binding or op.param_binding(head[1])
                adds = tuple(l.ground(binding, consts) for l in op.adds)
                dels = tuple(l.ground(binding, consts) for l in op.deletes)
                self.stack.append(cp)
                self.resume_points.append(cp.snap)
                self.state = apply_effects(self.state, adds, dels, geo_adds, geo_dels)
                self.plan.append(
                    PlanStep(head[0], head[1], binding, tuple(geo_adds), tuple(geo_dels), op.gtp_task, cp.entry)
                )
                self.d = self.d[1:]
                return True
            if cp.kind == "binding-choice":
                nxt = next(cp.alternatives, None)
                if nxt is None:
                    continue
                self.stats.backtracks += 1
                self.stack.append(cp)
                self._commit_primitive(cp.op, cp.head, nxt, cp.snap)
                return True
            # method-choice
            nxt = next(cp.alternatives, None)
            if nxt is None:
                continue
            self.stats.backtracks += 1
            self.stack.append(cp)
            method, binding = nxt
            self._apply_method(method, binding, cp.head)
            return True
        return False


class HtnPlanner:
    """Driver that refines until done or both levels of choice are exhausted."""

    def __init__(self, domain, depth_limit: int = 512):
        domain.validate()
        self.domain = domain
        self.depth_limit = depth_limit

    def new_trace(self, problem: HtnProblem, hooks: PlannerHooks | None = None) -> DecompositionTrace:
        trace = DecompositionTrace(problem, hooks or PlannerHooks(), self.depth_limit)
        trace.attach_domain(self.domain)
        return trace

    def plan(
        self,
        problem: HtnProblem,
        evaluator=None,
        hooks: PlannerHooks | None = None,
    ) -> PlanResult:
        if hooks is None:
            hooks = PlannerHooks(evaluator)
        trace = self.new_trace(problem, hooks)
        return self.run(trace)

    def run(self, trace: DecompositionTrace) -> PlanResult:
        while True:
            status = trace.step()
            if status == "done":
                return PlanResult(list(trace.plan), trace.stats)
            if status == "needs-backtrack":
                if not trace.backtrack():
                    reason = "depth-limit" if trace.stats.depth_hit else "exhausted"
                    return PlanResult(None, trace.stats, reason)


def simulate(
    problem: HtnProblem,
    domain,
    plan: Sequence[PlanStep],
    evaluator=None,
) -> State:
    """Replay a plan symbolically, checking every precondition on the way.

    Evaluable literals are checked via the supplied evaluator (typically a
    replay of memoized geometric solutions).  Raises DomainError on the first
    violated precondition.
    """
    state = problem.init
    ops = domain.operator_map
    for i, step in enumerate(plan):
        op = ops[step.name]
        seed = op.param_binding(step.args)
        seed.update(step.binding)
        sat = next(
            holds_iter(
                op.precondition,
                state,
                problem.objects,
                evaluator or (lambda p, a: True),
                problem.consts,
                seed,
            ),
            None,
        )
        if sat is None:
            raise DomainError(
                f"precondition of step {i} ({step.name}{step.args}) does not hold"
            )
        consts = problem.consts
        adds = tuple(l.ground(step.binding, consts) for l in op.adds)
        dels = tuple(l.ground(step.binding, consts) for l in op.deletes)
        state = apply_effects(state, adds, dels, step.geo_adds, step.geo_dels)
    return state
