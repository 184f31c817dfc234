"""Deterministic scripted backend.

The mock planner replays the scenario's step list, re-derived from the
active specification on every call: each absorbed revision rewrites the
remaining script through the scenario's plan transform (value updates,
dropped steps, reordering). Continuation aligns the visible executed acts
against the rewritten script greedily by tool name, so it resumes correctly
after context truncation, after no-rollback policies, and after plan edits
that shift positions.

Compatibility is a tag-intersection rule: an act conflicts with the pending
revision iff the tool's declared effect keys intersect the revision's
conflict keys. The judge is a fixed rubric over the final world state:

    start at 5
    -2 for every active clause contradicted by a live world entry
    -1 for every live entry left contradicting the spec (stale, uncompensated)
    -1 for every unsatisfiable record
    floor at 1
"""

from __future__ import annotations

import json

from ..bench import PlanStep, Scenario
from ..core import EpistemicState, EventKind, Phase, Specification, Trace
from ..policies import ExecutedAct
from ..world import WorldState
from .base import PlannedStep


class MockLLM:
    """Scripted planner, rule-based compatibility, and rubric judge in one."""

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario

    # -- planning -------------------------------------------------------------

    def effective_plan(self, spec: Specification) -> list[PlanStep]:
        steps = list(self.scenario.steps)
        for rev in spec.absorbed:
            steps = self.scenario.transform(rev.rtype).apply(steps)
        return steps

    def plan_next(
        self, epistemic: EpistemicState, world: WorldState, trace: Trace
    ) -> PlannedStep | None:
        plan = self.effective_plan(epistemic.spec)
        visible = set(epistemic.context)
        cursor = 0
        for event in trace.events:
            if event.seq not in visible or event.kind != EventKind.ACT:
                continue
            if event.payload.get("phase") == Phase.COMPENSATION.value:
                continue
            if cursor < len(plan) and event.payload.get("tool") == plan[cursor].tool:
                cursor += 1
        if cursor >= len(plan):
            return None
        step = plan[cursor]
        return PlannedStep(
            thought=f"step {cursor + 1}: {step.tool}",
            tool=step.tool,
            values=dict(step.values),
        )

    # -- compatibility ---------------------------------------------------------

    def is_compatible(self, act: ExecutedAct, spec_new: Specification) -> bool:
        if act.klass not in ("K", "X"):
            raise AssertionError(f"compatibility asked about {act.klass}-class act {act.tool}")
        if not spec_new.absorbed:
            return True
        pending = spec_new.absorbed[-1]
        return not (set(act.effect_tags) & set(pending.conflict_tags))

    # -- judging ---------------------------------------------------------------

    def judge_quality(self, world: WorldState, spec_truth: Specification) -> float:
        return rubric_score(world, spec_truth)

    # -- tool observations ------------------------------------------------------

    def observe(self, tool: str, values: dict[str, str]) -> str:
        return f"{tool} ok {json.dumps(values, sort_keys=True)}" if values else f"{tool} ok"


def rubric_score(world: WorldState, spec_truth: Specification) -> float:
    """Deterministic 1..5 score of the final world against the revised spec."""
    live = [e for e in world.entries().values() if e.live]
    effective = spec_truth.effective_constraints()

    contradicted: set[str] = set()
    stale: set[str] = set()
    for entry in live:
        for key, value in entry.values.items():
            owner = effective.get(key)
            if owner is not None and value != owner[1]:
                contradicted.add(owner[0])
                stale.add(entry.entry_id)

    for clause in spec_truth.active_clauses():
        if clause.ordering is None:
            continue
        before_tools, after_tools = clause.ordering
        before_seqs = sorted(e.source_seq for e in live if e.tool in before_tools)
        for entry in live:
            if entry.tool in after_tools:
                if not any(s < entry.source_seq for s in before_seqs):
                    contradicted.add(clause.clause_id)
                    break

    score = 5 - 2 * len(contradicted) - len(stale) - len(world.unsatisfiable)
    return float(max(1, score))
