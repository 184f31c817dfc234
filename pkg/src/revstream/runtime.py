"""The stream runtime.

One session drives the plan -> act -> observe loop and polls a non-blocking
injection queue at every event boundary. When a revision is pending, the
configured policy produces a decision triple; the runtime appends the
injection event, executes the compensation program against the world,
truncates the planner's context to the rollback point (keeping the
injection itself visible so the planner can re-plan), and continues under
the updated specification.

Compensation work is recorded as ordinary Act events carrying a
``compensation`` phase marker, so wasted-work and compensation accounting
can be recomputed from the trace alone.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .bench import InjectionSchedule, RunConfig, Scenario, schedule_for_config
from .backends.base import Backends
from .core import (
    EpistemicState,
    Event,
    EventKind,
    Phase,
    Revision,
    Specification,
    Trace,
    append_event,
    apply_revision,
)
from .errors import BackendError
from .policies import DecisionTriple, ExecutedAct, Policy, adapt_cost, decide
from .world import WorldState

TOKENS_PER_EVENT_K = 0.15  # fixed per-event proxy; real backends report usage


class InjectionQueue:
    """Multi-producer FIFO consumed by the session loop at event boundaries."""

    def __init__(self) -> None:
        self._pending: deque[Revision] = deque()
        self._lock = threading.Lock()

    def put(self, revision: Revision) -> int:
        """Enqueue without blocking; returns the queue position (1-based)."""
        with self._lock:
            self._pending.append(revision)
            return len(self._pending)

    def poll(self) -> Revision | None:
        with self._lock:
            return self._pending.popleft() if self._pending else None

    def __len__(self) -> int:
        with self._lock:
            return len(self._pending)


@dataclass(frozen=True)
class StepBudget:
    """Hard cap on executed acts (compensation acts included)."""

    max_steps: int

    @classmethod
    def for_scenario(cls, scenario: Scenario, factor: float = 2.0) -> "StepBudget":
        return cls(max_steps=int(factor * scenario.plan_length))


@dataclass(frozen=True)
class InjectionOutcome:
    """Everything one absorption decided, frozen for the run record."""

    inj_seq: int
    revision: Revision
    k_star: int
    pre_act_count: int
    pre_classes: tuple[str, ...]
    pre_tags: tuple[tuple[str, ...], ...]
    incompatible: tuple[int, ...]
    program: tuple[tuple[int, str], ...]
    comp_cost: int
    waste_cost: int
    spec_updated: bool


@dataclass
class RunRecord:
    run_id: str
    config: RunConfig
    realized_rho: float
    trace: Trace
    world: WorldState
    injections: list[InjectionOutcome]
    final_spec: Specification
    truth_spec: Specification
    steps: int
    acts: int
    wasted_acts: int
    comp_calls: int
    token_estimate: float
    termination: str
    quality: float | None
    budget: int
    oracle_premerge: bool = False


@dataclass
class _SessionState:
    trace: Trace = field(default_factory=Trace)
    world: WorldState = field(default_factory=WorldState)
    epistemic: EpistemicState = field(default_factory=EpistemicState)
    executed: list[ExecutedAct] = field(default_factory=list)
    discarded: set[int] = field(default_factory=set)
    acts_total: int = 0
    plan_acts_cum: int = 0
    comp_calls: int = 0
    replanned: bool = False
    spec_version: int = 0


def run_session(
    config: RunConfig,
    scenario: Scenario,
    backends: Backends,
    schedule: InjectionSchedule | None = None,
    budget: StepBudget | None = None,
    queue: InjectionQueue | None = None,
    on_event=None,
    step_delay: float = 0.0,
) -> RunRecord:
    """Execute one session to termination and return its record.

    ``queue`` may be shared with outside producers (the live service). The
    scripted ``schedule`` feeds the same queue, simulating the exogenous
    user channel at deterministic boundaries.
    """
    if schedule is None:
        schedule = schedule_for_config(scenario, config)
    if budget is None:
        budget = StepBudget.for_scenario(scenario)
    if queue is None:  # not `or`: an empty shared queue is falsy but must be kept
        queue = InjectionQueue()

    spec = scenario.initial_spec()
    truth_spec = spec
    for entry in schedule.entries:
        truth_spec = apply_revision(truth_spec, entry.revision)

    oracle_premerge = False
    pending_schedule = list(schedule.entries)
    policy = Policy.parse(config.policy)
    if policy.kind == "oracle":
        # The informed upper bound receives the fully merged spec at t=0.
        spec = truth_spec
        pending_schedule = []
        oracle_premerge = True

    st = _SessionState()
    st.epistemic = EpistemicState(spec=spec)
    st.trace = Trace(spec_history=((0, spec),))
    injections: list[InjectionOutcome] = []
    termination = "completed"

    def emit(kind: EventKind, payload: dict) -> int:
        seq = st.trace.last_seq + 1
        event = Event(seq=seq, kind=kind, payload=payload)
        st.trace = append_event(st.trace, event)
        st.epistemic = st.epistemic.extend(seq)
        if on_event is not None:
            on_event(event, st.spec_version, st.epistemic.spec)
        return seq

    def fire_due_schedule() -> None:
        while pending_schedule and st.plan_acts_cum >= pending_schedule[0].after_acts:
            queue.put(pending_schedule.pop(0).revision)

    def absorb(revision: Revision) -> None:
        inj_seq = emit(EventKind.INJ, {
            "rtype": revision.rtype.value,
            "text": revision.text,
            "target_clause": revision.target_clause,
            "conflict_tags": list(revision.conflict_tags),
        })
        verdicts: dict[int, bool] = {}
        triple = decide(policy, st.executed, st.epistemic.spec, revision,
                        backends.compat.is_compatible, verdicts)
        cost = adapt_cost(triple, st.executed)
        pre_classes = tuple(a.klass for a in st.executed)
        pre_tags = tuple(a.effect_tags for a in st.executed)
        newly_discarded = {a.seq for a in st.executed if a.position > triple.k_star}
        st.discarded |= newly_discarded

        spec_updated = bool(triple.continuation.get("spec_updated"))
        new_spec = apply_revision(st.epistemic.spec, revision) if spec_updated else st.epistemic.spec
        if spec_updated:
            st.spec_version += 1
            st.replanned = True
            st.trace = Trace(
                events=st.trace.events,
                spec_history=st.trace.spec_history + ((inj_seq, new_spec),),
            )

        # Truncate context to the rollback boundary, keep the injection visible.
        boundary = st.executed[triple.k_star - 1].obs_seq if triple.k_star > 0 else 0
        st.epistemic = st.epistemic.truncate_to(boundary).extend(inj_seq).with_spec(new_spec)
        st.executed = st.executed[: triple.k_star]

        run_program(triple, revision)
        injections.append(InjectionOutcome(
            inj_seq=inj_seq,
            revision=revision,
            k_star=triple.k_star,
            pre_act_count=len(pre_classes),
            pre_classes=pre_classes,
            pre_tags=pre_tags,
            incompatible=tuple(sorted(p for p, ok in verdicts.items() if not ok)),
            program=triple.program.steps,
            comp_cost=cost.comp_cost,
            waste_cost=cost.waste_cost,
            spec_updated=spec_updated,
        ))

    def run_program(triple: DecisionTriple, revision: Revision) -> None:
        for act_seq, action in triple.program.steps:
            entry = st.world.entry_for_act(act_seq)
            tool_name = str(entry.content.get("tool")) if entry else "unknown"
            if action == "invert":
                st.world = st.world.invert(act_seq)
                executed_tool = scenario.registry.get(tool_name).inverse_of or tool_name
                result = f"reverted {tool_name} (act {act_seq})"
            elif action == "compensate":
                compensator = scenario.registry.get(tool_name).compensator or tool_name
                st.world = st.world.compensate(act_seq, compensator)
                executed_tool = compensator
                result = f"compensated {tool_name} (act {act_seq})"
            else:  # fallback
                st.world = st.world.x_fallback(act_seq, revision)
                executed_tool = tool_name
                result = f"cannot undo {tool_name} (act {act_seq}); conflict recorded"
            emit(EventKind.ACT, {
                "tool": executed_tool,
                "action": action,
                "target_seq": act_seq,
                "phase": Phase.COMPENSATION.value,
                "values": {},
            })
            if action != "fallback":
                st.comp_calls += 1
            st.acts_total += 1
            emit(EventKind.OBS, {"text": result})

    try:
        while True:
            if step_delay > 0:
                # Pace before the boundary poll so a revision arriving while
                # the previous tool call was in flight is absorbed before the
                # next act, not one act late.
                time.sleep(step_delay)
            fire_due_schedule()
            pending = queue.poll()
            if pending is not None:
                absorb(pending)
                continue
            step = backends.planner.plan_next(st.epistemic, st.world, st.trace)
            if step is None:
                if pending_schedule or len(queue):
                    # Triggers beyond the executed plan still fire at the
                    # final boundary rather than dangling forever.
                    for entry in pending_schedule:
                        queue.put(entry.revision)
                    pending_schedule.clear()
                    continue
                termination = "completed"
                break
            if st.acts_total >= budget.max_steps:
                termination = "budget_exhausted"
                break
            if step.thought:
                emit(EventKind.THOUGHT, {"text": step.thought})
            tool = scenario.registry.get(step.tool)
            phase = Phase.REPLANNED if st.replanned else Phase.PLAN
            position = len(st.executed) + 1
            act_seq = emit(EventKind.ACT, {
                "tool": tool.name,
                "class": tool.klass,
                "values": dict(step.values),
                "act_index": position,
                "phase": phase.value,
            })
            st.world = st.world.apply_effect(act_seq, tool, step.values)
            obs_text = (
                backends.planner.observe(tool.name, step.values)
                if hasattr(backends.planner, "observe")
                else f"{tool.name} ok"
            )
            obs_seq = emit(EventKind.OBS, {"text": obs_text})
            st.executed.append(ExecutedAct(
                position=position,
                seq=act_seq,
                tool=tool.name,
                klass=tool.klass,
                effect_tags=tool.effect_tags,
                values=dict(step.values),
                obs_seq=obs_seq,
            ))
            st.acts_total += 1
            st.plan_acts_cum += 1
    except BackendError:
        termination = "backend_error"

    quality: float | None = None
    if termination != "backend_error":
        try:
            quality = backends.judge.judge_quality(st.world, truth_spec)
        except BackendError:
            termination = "backend_error"

    n_acts = sum(
        1 for e in st.trace.events
        if e.kind == EventKind.ACT and e.payload.get("phase") != Phase.COMPENSATION.value
    )
    reported_tokens = int(getattr(backends.planner, "tokens_total", 0) or 0)
    token_estimate = (
        round(reported_tokens / 1000, 6)
        if reported_tokens
        else round(TOKENS_PER_EVENT_K * len(st.trace.events), 6)
    )
    return RunRecord(
        run_id=config.run_id,
        config=config,
        realized_rho=scenario.realized_rho,
        trace=st.trace,
        world=st.world,
        injections=injections,
        final_spec=st.epistemic.spec,
        truth_spec=truth_spec,
        steps=st.acts_total,
        acts=n_acts,
        wasted_acts=len(st.discarded),
        comp_calls=st.comp_calls,
        token_estimate=token_estimate,
        termination=termination,
        quality=quality,
        budget=budget.max_steps,
        oracle_premerge=oracle_premerge,
    )
