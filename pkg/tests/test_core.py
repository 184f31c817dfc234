from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from revstream.core import (
    Clause,
    Event,
    EventKind,
    Revision,
    RevisionType,
    Specification,
    ToolRegistry,
    ToolSpec,
    Trace,
    append_event,
    apply_revision,
    reversibility_ratio,
)
from revstream.errors import IntegrityError, RegistryError, ValidationError


def tool(name: str, klass: str) -> ToolSpec:
    if klass == "R":
        return ToolSpec(name=name, klass="R", inverse_of=f"undo_{name}")
    if klass == "K":
        return ToolSpec(name=name, klass="K", compensator=f"amend_{name}")
    return ToolSpec(name=name, klass=klass)


# ---------------------------------------------------------------------------
# reversibility_ratio
# ---------------------------------------------------------------------------


def test_ratio_all_reversible():
    tools = [tool("a", "I"), tool("b", "I"), tool("c", "R"), tool("d", "R")]
    assert reversibility_ratio(tools) == 1.0


def test_ratio_half():
    tools = [tool(f"i{n}", "I") for n in range(2)] + [tool(f"r{n}", "R") for n in range(2)]
    tools += [tool(f"k{n}", "K") for n in range(2)] + [tool(f"x{n}", "X") for n in range(2)]
    assert reversibility_ratio(tools) == 0.5


def test_ratio_event_planning_full_toolset(event_scenario):
    toolset = [event_scenario.tool(n) for n in event_scenario.plan_toolset]
    by_class = {c: sum(1 for t in toolset if t.klass == c) for c in "IRKX"}
    assert by_class == {"I": 2, "R": 3, "K": 5, "X": 2}
    assert reversibility_ratio(toolset) == pytest.approx(5 / 12, abs=1e-9)


def test_ratio_rejects_empty_toolset():
    with pytest.raises(ValueError):
        reversibility_ratio([])


@given(st.lists(st.sampled_from("IRKX"), min_size=1, max_size=30))
def test_ratio_bounds_and_monotonicity(classes):
    tools = [tool(f"t{i}", c) for i, c in enumerate(classes)]
    rho = reversibility_ratio(tools)
    assert 0.0 <= rho <= 1.0
    widened = tools + [tool("extra_i", "I")]
    narrowed = tools + [tool("extra_x", "X")]
    assert reversibility_ratio(widened) >= rho
    assert reversibility_ratio(narrowed) <= rho


# ---------------------------------------------------------------------------
# Registry taxonomy
# ---------------------------------------------------------------------------


def test_registry_rejects_unclassified():
    with pytest.raises(RegistryError):
        ToolSpec(name="weird", klass="Z")


def test_r_class_requires_inverse():
    with pytest.raises(RegistryError):
        ToolSpec(name="draft", klass="R")


def test_k_class_requires_compensator():
    with pytest.raises(RegistryError):
        ToolSpec(name="send", klass="K")


def test_i_class_rejects_bindings():
    with pytest.raises(RegistryError):
        ToolSpec(name="look", klass="I", inverse_of="other")


def test_registry_validates_dangling_references():
    registry = ToolRegistry([tool("draft", "R")])
    with pytest.raises(RegistryError):
        registry.validate_bindings()


def test_registry_unknown_lookup():
    registry = ToolRegistry()
    with pytest.raises(RegistryError):
        registry.get("nope")


# ---------------------------------------------------------------------------
# apply_revision
# ---------------------------------------------------------------------------


def three_clause_spec() -> Specification:
    return Specification(
        initial_query="plan the dinner",
        clauses=(
            Clause("c1", "goal"),
            Clause("c2", "venue", constraints={"venue_style": "indoor"}),
            Clause("c3", "budget", constraints={"budget": "9500"}),
        ),
    )


def test_additive_appends_active_clause():
    spec = three_clause_spec()
    out = apply_revision(spec, Revision(RevisionType.ADDITIVE, "also invite marketing"))
    assert len(out.active_clauses()) == 4
    assert len(out.absorbed) == 1


def test_cancellation_revokes_without_deleting():
    spec = three_clause_spec()
    rev = Revision(RevisionType.CANCELLATION, "drop the budget line", target_clause="c3")
    out = apply_revision(spec, rev)
    assert len(out.clauses) == 3
    assert out.clause("c3").status == "revoked"


def test_substitutive_replaces_and_appends():
    spec = three_clause_spec()
    rev = Revision(
        RevisionType.SUBSTITUTIVE,
        "change to outdoor BBQ",
        target_clause="c2",
        new_clauses=(Clause("c2b", "outdoor bbq", constraints={"venue_style": "outdoor"}),),
    )
    out = apply_revision(spec, rev)
    assert out.clause("c2").status == "replaced"
    assert out.clause("c2b").status == "active"
    assert out.effective_constraints()["venue_style"] == ("c2b", "outdoor")


def test_substitutive_unknown_target_rejected():
    spec = three_clause_spec()
    rev = Revision(RevisionType.SUBSTITUTIVE, "swap it", target_clause="missing")
    with pytest.raises(ValidationError):
        apply_revision(spec, rev)


def test_substitutive_requires_target():
    with pytest.raises(ValidationError):
        Revision(RevisionType.SUBSTITUTIVE, "swap it")


def test_priority_shift_appends_ordering_metadata():
    spec = three_clause_spec()
    rev = Revision(
        RevisionType.PRIORITY_SHIFT,
        "do B before A",
        new_clauses=(Clause("ord", "b first", ordering=(("b",), ("a",))),),
    )
    out = apply_revision(spec, rev)
    assert out.clause("ord").ordering == (("b",), ("a",))


@given(st.lists(st.sampled_from(["additive", "restrictive", "priority_shift"]), max_size=8))
def test_revision_audit_replay(kinds):
    """Replaying the absorbed list over the initial clauses reproduces the spec."""
    spec = three_clause_spec()
    for i, kind in enumerate(kinds):
        spec = apply_revision(spec, Revision(RevisionType(kind), f"change {i}"))
    replayed = three_clause_spec()
    for rev in spec.absorbed:
        replayed = apply_revision(replayed, rev)
    assert replayed.clauses == spec.clauses
    assert replayed.absorbed == spec.absorbed


# ---------------------------------------------------------------------------
# append_event
# ---------------------------------------------------------------------------


def ev(seq: int) -> Event:
    return Event(seq=seq, kind=EventKind.THOUGHT, payload={"text": "t"})


def test_append_to_empty():
    trace = append_event(Trace(), ev(1))
    assert len(trace.events) == 1


def test_append_successor():
    trace = Trace()
    for seq in range(1, 6):
        trace = append_event(trace, ev(seq))
    trace = append_event(trace, ev(6))
    assert trace.last_seq == 6


def test_append_gap_rejected():
    trace = Trace()
    for seq in range(1, 6):
        trace = append_event(trace, ev(seq))
    with pytest.raises(IntegrityError):
        append_event(trace, ev(7))


def test_truncation_is_prefix():
    trace = Trace()
    for seq in range(1, 10):
        trace = append_event(trace, ev(seq))
    prefix = trace.prefix(4)
    assert [e.seq for e in prefix.events] == [1, 2, 3, 4]
    assert prefix.events == trace.events[:4]
