"""Glue between the symbolic planner and the geometric solver.

Evaluable predicates are answered by running the geometric solver and pinning
the found solution, so the subsequent action applies exactly the effects that
were evaluated.  Two interleaving strategies are supported:

* ``htn-only``: one geometric solution per query; when an action fails, only
  symbolic (method/binding) backtracking is used.
* ``geometric-first``: when an action fails, earlier pursued geometric tasks
  are re-solved (latest first, within a budget) and the symbolic prefix is
  reconciled against the moved scene before symbolic backtracking kicks in.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

from . import gtp
from .gtp import FailureMemo, GtpStats, GtpTask, LogEntry, SolveHandle, TaskSequenceLog
from .htn import DecompositionTrace, HtnPlanner, PlannerHooks, PlanStats, PlanStep
from .symbolic import (
    Binding,
    HtnDomain,
    HtnProblem,
    Literal,
    Operator,
    State,
    apply_effects,
    holds_iter,
)
from .world import DEFAULT_CONFIG, Scene, WorldConfig, derive_facts

STRATEGIES = ("htn-only", "geometric-first")


class BridgeError(Exception):
    """Configuration or consistency problem in the symbolic/geometric glue."""


@dataclass(frozen=True)
class TaskLibrary:
    """Evaluable predicate name -> geometric task template.

    ``stubs`` are predicates that are always true and carry no geometric
    effects (e.g. base navigation handled outside the manipulation planner).
    """

    builders: dict[str, Callable[[tuple[str, ...], Scene], GtpTask]]
    stubs: frozenset[str] = frozenset()

    def build(self, pred: str, args: tuple[str, ...], scene: Scene) -> GtpTask:
        if pred not in self.builders:
            raise BridgeError(f"evaluable predicate {pred!r} has no task template")
        return self.builders[pred](args, scene)

    def known(self, pred: str) -> bool:
        return pred in self.builders or pred in self.stubs


@dataclass(frozen=True)
class Strategy:
    mode: str = "geometric-first"
    geo_budget: int = 8  # max alternative-solution attempts per failure

    def __post_init__(self) -> None:
        if self.mode not in STRATEGIES:
            raise BridgeError(f"unknown strategy {self.mode!r}")


# ---------------------------------------------------------------------------
# Prefix reconciliation


def reconcile(
    state: State,
    scene: Scene,
    prefix: list[PlanStep],
    domain: HtnDomain,
    problem: HtnProblem,
    evaluator=None,
    cfg: WorldConfig = DEFAULT_CONFIG,
):
    """Re-check a pursued plan prefix against a moved scene.

    Returns ``(states, invalidated)`` where ``states[i]`` is the replayed
    symbolic state just before prefix step ``i`` (``states[len(prefix)]`` is
    the final state) and ``invalidated`` lists the indices whose preconditions
    no longer hold.  The caller truncates to before the earliest invalidated
    step.  Only shared (geometry-derived) literals change: the entry state's
    ordinary partition is kept and its shared partition is replaced by the
    facts derived from the scene.
    """
    evaluator = evaluator or (lambda pred, args: True)
    current = state.replace_shared(derive_facts(scene, cfg))
    ops = domain.operator_map
    states = [current]
    invalidated: list[int] = []
    for i, step in enumerate(prefix):
        op = ops[step.name]
        seed = op.param_binding(step.args)
        seed.update(step.binding)
        sat = next(
            holds_iter(
                op.precondition, current, problem.objects, evaluator, problem.consts, seed
            ),
            None,
        )
        if sat is None:
            invalidated.append(i)
        adds = tuple(l.ground(step.binding, problem.consts) for l in op.adds)
        dels = tuple(l.ground(step.binding, problem.consts) for l in op.deletes)
        current = apply_effects(current, adds, dels, step.geo_adds, step.geo_dels)
        states.append(current)
    return states, invalidated


# ---------------------------------------------------------------------------
# The bridge hooks


class GeoBridge(PlannerHooks):
    """Planner hooks backed by a scene stack and the geometric solver."""

    def __init__(
        self,
        scene0: Scene,
        library: TaskLibrary,
        strategy: Strategy = Strategy(),
        gtp_timeout: float = 60.0,
        stats: GtpStats | None = None,
        cfg: WorldConfig = DEFAULT_CONFIG,
        paranoid: bool = False,
    ):
        super().__init__()
        self.library = library
        self.strategy = strategy
        self.gtp_timeout = gtp_timeout
        self.cfg = cfg
        self.paranoid = paranoid
        self.gtp_stats = stats if stats is not None else GtpStats()
        self.scenes: list[Scene] = [scene0]
        self.log = TaskSequenceLog()
        self.geo_alternatives = 0  # successful alternative pulls (instrumented)
        self.alternative_attempts = 0
        self._counter = scene0.version
        #: (pred, args, version) -> bool  /  -> (solution, handle)
        self._eval_cache: dict[tuple, bool] = {}
        self._pins: dict[tuple, tuple] = {}
        self._memos: dict[tuple, FailureMemo] = {}
        #: cumulative alternative attempts per failing ground action
        self._stuck_attempts: dict[tuple, int] = {}
        self._trace: DecompositionTrace | None = None
        self._domain: HtnDomain | None = None
        self._problem: HtnProblem | None = None

    def attach(self, trace: DecompositionTrace, domain: HtnDomain, problem: HtnProblem) -> None:
        self._trace = trace
        self._domain = domain
        self._problem = problem

    # -- scene stack ---------------------------------------------------------

    @property
    def scene(self) -> Scene:
        return self.scenes[-1]

    def scene_version(self) -> int:
        return self.scenes[-1].version

    def _bump(self) -> int:
        self._counter += 1
        return self._counter

    def restore(self, version: int) -> None:
        while self.scenes and self.scenes[-1].version > version:
            self.scenes.pop()
        if not self.scenes or self.scenes[-1].version != version:
            raise BridgeError(f"cannot restore scene version {version}")
        self.log.truncate_to_version(version)
        self._eval_cache = {k: v for k, v in self._eval_cache.items() if k[2] <= version}
        self._pins = {k: v for k, v in self._pins.items() if k[2] <= version}

    # -- evaluable predicates ------------------------------------------------

    def _memo_for(self, task: GtpTask) -> FailureMemo:
        return self._memos.setdefault(task.key(), FailureMemo())

    def evaluate(self, pred: str, args: tuple[str, ...], state: State) -> bool:
        if pred in self.library.stubs:
            return True
        if not self.library.known(pred):
            raise BridgeError(f"evaluable predicate {pred!r} not bound to a task")
        key = (pred, args, self.scene_version())
        if key in self._eval_cache:
            return self._eval_cache[key]
        task = self.library.build(pred, args, self.scene)
        handle = SolveHandle(
            task, self.scene, self._memo_for(task), self.gtp_timeout,
            self.gtp_stats, self.paranoid, self.cfg,
        )
        sol = handle.next_solution()
        self._eval_cache[key] = sol is not None
        if sol is not None:
            self._pins[key] = (task, sol, handle)
        return sol is not None

    # -- GS-action commitment ------------------------------------------------

    def _evaluable_args(self, op: Operator, binding: Binding) -> tuple[str, ...]:
        for cond in op.precondition:
            if isinstance(cond, Literal) and cond.evaluable and cond.pred == op.gtp_task:
                return cond.ground(binding, self._problem.consts if self._problem else {}).args
        raise BridgeError(f"operator {op.name}: evaluable {op.gtp_task!r} not in precondition")

    def commit(self, op: Operator, args: tuple[str, ...], binding: Binding):
        pred = op.gtp_task
        if pred in self.library.stubs:
            return ((), (), None)
        gargs = self._evaluable_args(op, binding)
        key = (pred, gargs, self.scene_version())
        if key not in self._pins:
            # evaluation must have pinned the solution; re-evaluate defensively
            if not self.evaluate(pred, gargs, None):
                raise BridgeError(f"committing {op.name}{args} with no solution")
        task, sol, handle = self._pins[key]
        pre_scene = self.scene
        adds, dels = gtp.effects(task, sol, pre_scene, self.cfg)
        new_version = self._bump()
        new_scene = gtp.apply_solution(pre_scene, task, sol, version=new_version)
        self.scenes.append(new_scene)
        entry = LogEntry(task, sol, handle, pre_scene, new_version)
        self.log.append(entry)
        return (adds, dels, entry)

    # -- geometric backtracking ----------------------------------------------

    def reopen(self, entry: LogEntry | None):
        """Next solution for a re-entered GS choice point (scene already
        restored to the entry's pre-task version)."""
        if entry is None or self.strategy.mode != "geometric-first":
            return None
        self.alternative_attempts += 1
        sol = gtp.alternative_for(entry, self.gtp_timeout)
        if sol is None:
            return None
        self.geo_alternatives += 1
        pre_scene = entry.pre_scene
        adds, dels = gtp.effects(entry.task, sol, pre_scene, self.cfg)
        new_version = self._bump()
        self.scenes.append(gtp.apply_solution(pre_scene, entry.task, sol, version=new_version))
        entry.solution = sol
        entry.post_version = new_version
        self.log.append(entry)
        return (adds, dels)

    def on_stuck(self, trace: DecompositionTrace, head, op: Operator) -> bool:
        """A pursued geometric task is re-solved before symbolic backtracking.

        The attempt budget is cumulative per failing step: re-failing at the
        same ground action after an accepted alternative draws on the same
        allowance, so a symbolically-doomed step cannot drain the whole
        geometric solution space before backtracking kicks in.
        """
        if self.strategy.mode != "geometric-first" or self._trace is None:
            return False
        site = (head[0], head[1])
        attempts = self._stuck_attempts.get(site, 0)
        try:
            for entry in reversed(list(self.log.entries)):
                while attempts < self.strategy.geo_budget:
                    attempts += 1
                    self.alternative_attempts += 1
                    sol = gtp.alternative_for(entry, self.gtp_timeout)
                    if sol is None:
                        break
                    if self._accept_alternative(trace, entry, sol):
                        self.geo_alternatives += 1
                        return True
                if attempts >= self.strategy.geo_budget:
                    break
            return False
        finally:
            self._stuck_attempts[site] = attempts

    def _accept_alternative(self, trace: DecompositionTrace, entry: LogEntry, sol) -> bool:
        """Rebase the world on the alternative solution and reconcile the
        already-pursued symbolic prefix against it."""
        k = next(
            (i for i, step in enumerate(trace.plan) if step.entry is entry), None
        )
        if k is None:
            return False
        snap_k = trace.resume_points[k]
        old_post = entry.post_version
        pre_scene = entry.pre_scene
        self.restore(pre_scene.version)
        adds, dels = gtp.effects(entry.task, sol, pre_scene, self.cfg)
        new_version = self._bump()
        new_scene = gtp.apply_solution(pre_scene, entry.task, sol, version=new_version)
        self.scenes.append(new_scene)
        entry.solution = sol
        entry.post_version = new_version
        self.log.append(entry)

        # rebuild the symbolic state after step k with the new geometric effects
        step_k = trace.plan[k]
        op = self._domain.operator_map[step_k.name]
        consts = self._problem.consts
        s_adds = tuple(l.ground(step_k.binding, consts) for l in op.adds)
        s_dels = tuple(l.ground(step_k.binding, consts) for l in op.deletes)
        state_after_k = apply_effects(snap_k.state, s_adds, s_dels)
        step_k.geo_adds, step_k.geo_dels = tuple(adds), tuple(dels)

        # every GS entry after k was discarded, so a stub-only evaluator marks
        # all later geometric actions invalid and re-checks the symbolic ones
        stub_eval = lambda pred, args: pred in self.library.stubs
        prefix = trace.plan[k + 1 :]
        states, invalidated = reconcile(
            state_after_k, new_scene, prefix, self._domain, self._problem,
            stub_eval, self.cfg,
        )
        if invalidated:
            j_star = k + 1 + invalidated[0]
            resume_state = states[invalidated[0]]
            self._remap_snapshots(trace, snap_k.stack_len, old_post, new_version, k, states)
            trace.truncate_to(j_star, state=resume_state)
            # the scene already sits at new_version (no GS steps survive past k)
            return True
        self._remap_snapshots(trace, snap_k.stack_len, old_post, new_version, k, states)
        trace.set_state(states[-1])
        return True

    def _remap_snapshots(
        self, trace: DecompositionTrace, from_stack: int, old_version: int,
        new_version: int, k: int, states,
    ) -> None:
        """Point snapshots taken after step k at the new scene version/state."""
        for j in range(k + 1, len(trace.resume_points)):
            snap = trace.resume_points[j]
            if snap.scene_version == old_version:
                snap.scene_version = new_version
            idx = j - (k + 1)
            if idx < len(states):
                snap.state = states[idx]
        for cp in trace.stack[from_stack:]:
            snap = cp.snap
            if snap.scene_version == old_version:
                snap.scene_version = new_version
                idx = snap.plan_len - (k + 1)
                if 0 <= idx < len(states):
                    snap.state = states[idx]


# ---------------------------------------------------------------------------
# Top-level planning entry point


@dataclass
class CombinedStats:
    htn: PlanStats
    gtp: GtpStats
    geo_alternatives: int = 0
    alternative_attempts: int = 0
    wall_time: float = 0.0

    def summary(self) -> dict:
        return {
            "htn_backtracks": self.htn.backtracks,
            "expansions": self.htn.expansions,
            "methods_tried": self.htn.methods_tried,
            "geo_alternatives": self.geo_alternatives,
            "alternative_attempts": self.alternative_attempts,
            "wall_time": self.wall_time,
            "gtp": self.gtp.rows(),
        }


@dataclass
class BridgeResult:
    plan: list[PlanStep] | None
    stats: CombinedStats
    scene: Scene  # final scene on success, initial scene otherwise
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.plan is not None


def seed_state(problem: HtnProblem, scene: Scene, cfg: WorldConfig = DEFAULT_CONFIG) -> State:
    """Initial symbolic state: declared ordinary facts + derived shared facts."""
    for lit in problem.init.literals:
        if lit.shared:
            raise BridgeError(f"shared literal {lit} must come from the scene, not :init")
    return State(problem.init.literals | derive_facts(scene, cfg))


def interleaved_plan(
    domain: HtnDomain,
    problem: HtnProblem,
    scene: Scene,
    library: TaskLibrary,
    strategy: Strategy = Strategy(),
    gtp_timeout: float = 60.0,
    depth_limit: int = 512,
    cfg: WorldConfig = DEFAULT_CONFIG,
    paranoid: bool = False,
) -> BridgeResult:
    """Plan symbolically with geometric evaluation and backtracking."""
    bridge = GeoBridge(scene, library, strategy, gtp_timeout, None, cfg, paranoid)
    planner = HtnPlanner(domain, depth_limit)
    seeded = problem.with_init(seed_state(problem, scene, cfg))
    trace = planner.new_trace(seeded, bridge)
    bridge.attach(trace, domain, seeded)
    start = time.monotonic()
    result = planner.run(trace)
    elapsed = time.monotonic() - start
    stats = CombinedStats(
        result.stats, bridge.gtp_stats, bridge.geo_alternatives,
        bridge.alternative_attempts, elapsed,
    )
    final_scene = bridge.scene if result.ok else bridge.scenes[0]
    return BridgeResult(result.plan, stats, final_scene, result.failure)


# ---------------------------------------------------------------------------
# Replay verification


def verify_plan(
    domain: HtnDomain,
    problem: HtnProblem,
    scene0: Scene,
    library: TaskLibrary,
    plan: list[PlanStep],
    cfg: WorldConfig = DEFAULT_CONFIG,
) -> tuple[State, Scene]:
    """Replay a finished plan from scratch, checking every precondition and
    that each pursued geometric solution still satisfies its task on the
    replayed scene.  Raises BridgeError on the first violation."""
    state = seed_state(problem, scene0, cfg)
    scene = scene0
    ops = domain.operator_map
    for i, step in enumerate(plan):
        op = ops[step.name]
        is_gs = op.gtp_task is not None and op.gtp_task not in library.stubs
        if is_gs:
            if step.entry is None:
                raise BridgeError(f"step {i} ({step.name}) has no geometric record")
            entry: LogEntry = step.entry
            sol = _rebase_solution(entry.solution, scene.version)
            if not gtp.solution_satisfies(entry.task, sol, scene, cfg):
                raise BridgeError(
                    f"step {i} ({step.name}{step.args}): pinned solution no longer "
                    f"satisfies its geometric task on replay"
                )
            adds, dels = gtp.effects(entry.task, sol, scene, cfg)
            if set(adds) != set(step.geo_adds) or set(dels) != set(step.geo_dels):
                raise BridgeError(
                    f"step {i} ({step.name}{step.args}): recorded geometric effects "
                    f"differ from the pinned solution's effects"
                )
            next_scene = gtp.apply_solution(scene, entry.task, sol)
        else:
            next_scene = scene
        evaluator = lambda pred, args: pred in library.stubs or (
            is_gs and pred == op.gtp_task
        )
        seed = op.param_binding(step.args)
        seed.update(step.binding)
        sat = next(
            holds_iter(
                op.precondition, state, problem.objects, evaluator, problem.consts, seed
            ),
            None,
        )
        if sat is None:
            raise BridgeError(
                f"step {i} ({step.name}{step.args}): precondition fails on replay"
            )
        adds_s = tuple(l.ground(step.binding, problem.consts) for l in op.adds)
        dels_s = tuple(l.ground(step.binding, problem.consts) for l in op.deletes)
        state = apply_effects(state, adds_s, dels_s, step.geo_adds, step.geo_dels)
        scene = next_scene
    return state, scene


def _rebase_solution(sol, version: int):
    """Adjust a solution's recorded scene versions to a replayed numbering."""
    if isinstance(sol, tuple):
        out = []
        v = version
        for s in sol:
            out.append(replace(s, pre_version=v))
            v += 1
        return tuple(out)
    return replace(sol, pre_version=version)
