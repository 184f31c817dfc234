from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from revstream.core import Clause, Revision, RevisionType, Specification
from revstream.errors import UnsupportedPolicyError, ValidationError
from revstream.policies import (
    ExecutedAct,
    Policy,
    adapt_cost,
    decide,
    earliest_conflict_scan,
    feasible_rollbacks,
    rollback_cost,
)

BASE_SPEC = Specification(
    initial_query="do the task",
    clauses=(Clause("c1", "goal"), Clause("c2", "venue", constraints={"venue_style": "indoor"})),
)

REV = Revision(
    RevisionType.SUBSTITUTIVE,
    "outdoor instead",
    target_clause="c2",
    conflict_tags=("venue_style",),
    new_clauses=(Clause("c2b", "outdoor", constraints={"venue_style": "outdoor"}),),
)


def acts_from(classes: str, conflicting: set[int] = frozenset()) -> list[ExecutedAct]:
    """Build an executed prefix; acts at `conflicting` positions carry the
    conflicting tag, everything else stays off the revision's keys."""
    acts = []
    for i, klass in enumerate(classes, start=1):
        tags = ("venue_style",) if i in conflicting else ("other_key",)
        acts.append(ExecutedAct(
            position=i, seq=i * 3, tool=f"tool{i}", klass=klass,
            effect_tags=tags, obs_seq=i * 3 + 1,
        ))
    return acts


def tag_compat(act: ExecutedAct, spec_new: Specification) -> bool:
    assert act.klass in ("K", "X"), "scan must not query I/R acts"
    pending = spec_new.absorbed[-1]
    return not (set(act.effect_tags) & set(pending.conflict_tags))


def spec_with_pending() -> Specification:
    from revstream.core import apply_revision

    return apply_revision(BASE_SPEC, REV)


# ---------------------------------------------------------------------------
# earliest_conflict_scan
# ---------------------------------------------------------------------------


def test_scan_finds_first_conflicting_k():
    acts = acts_from("IIRRKKX", conflicting={5})
    assert earliest_conflict_scan(acts, spec_with_pending(), tag_compat) == 5


def test_scan_clean_trace_returns_n_plus_one():
    acts = acts_from("IIRRKKX")
    assert earliest_conflict_scan(acts, spec_with_pending(), tag_compat) == 8


def test_scan_empty_trace():
    assert earliest_conflict_scan([], spec_with_pending(), tag_compat) == 1


def test_scan_queries_only_kx():
    acts = acts_from("IIRRKKX", conflicting={5})
    queried: list[str] = []

    def spy(act, spec_new):
        queried.append(act.klass)
        return tag_compat(act, spec_new)

    earliest_conflict_scan(acts, spec_with_pending(), spy)
    assert set(queried) <= {"K", "X"}


def test_scan_stops_at_first_conflict():
    acts = acts_from("KKKK", conflicting={2, 3, 4})
    calls = []

    def spy(act, spec_new):
        calls.append(act.position)
        return tag_compat(act, spec_new)

    assert earliest_conflict_scan(acts, spec_with_pending(), spy) == 2
    assert calls == [1, 2]


# ---------------------------------------------------------------------------
# decide
# ---------------------------------------------------------------------------

# The mid-injection prefix of the event-planning script: 8 I/R acts then the
# first K-class act, which the substitutive revision contradicts.
MID_PREFIX = "IIRRRRRR" + "K"


def test_absorber_rolls_to_just_before_conflict():
    acts = acts_from(MID_PREFIX, conflicting={9})
    triple = decide(Policy.parse("absorber"), acts, BASE_SPEC, REV, tag_compat)
    assert triple.k_star == 8
    assert triple.program.steps == ((acts[8].seq, "compensate"),)
    cost = adapt_cost(triple, acts)
    assert (cost.comp_cost, cost.waste_cost) == (1, 1)


def test_full_restart_discards_everything():
    acts = acts_from(MID_PREFIX, conflicting={9})
    triple = decide(Policy.parse("full_restart"), acts, BASE_SPEC, REV, tag_compat)
    assert triple.k_star == 0
    cost = adapt_cost(triple, acts)
    assert cost.waste_cost == 9
    # every R invert plus the K compensation
    assert cost.comp_cost == 7


def test_ignore_is_a_no_op():
    acts = acts_from(MID_PREFIX, conflicting={9})
    triple = decide(Policy.parse("ignore"), acts, BASE_SPEC, REV, tag_compat)
    assert triple.k_star == len(acts)
    assert len(triple.program) == 0
    assert triple.continuation["spec_updated"] is False
    cost = adapt_cost(triple, acts)
    assert (cost.comp_cost, cost.waste_cost) == (0, 0)


def test_naive_updates_spec_without_rollback():
    acts = acts_from(MID_PREFIX, conflicting={9})
    triple = decide(Policy.parse("naive"), acts, BASE_SPEC, REV, tag_compat)
    assert triple.k_star == len(acts)
    assert triple.continuation["spec_updated"] is True
    assert len(triple.program) == 0


def test_checkpoint_snaps_down_to_multiple():
    acts = acts_from(MID_PREFIX, conflicting={9})
    triple = decide(Policy.parse("checkpoint5"), acts, BASE_SPEC, REV, tag_compat)
    assert triple.k_star == 5
    cost = adapt_cost(triple, acts)
    assert cost.waste_cost == 4


def test_interrupt_stops_at_first_kx_even_if_compatible():
    additive = Revision(RevisionType.ADDITIVE, "also invite marketing")
    acts = acts_from(MID_PREFIX)  # nothing conflicts
    triple = decide(Policy.parse("interrupt"), acts, BASE_SPEC, additive, tag_compat)
    assert triple.k_star == 8  # over-rolls the compatible K act
    absorber = decide(Policy.parse("absorber"), acts, BASE_SPEC, additive, tag_compat)
    assert absorber.k_star == 9


def test_oracle_cannot_decide_mid_run():
    acts = acts_from(MID_PREFIX)
    with pytest.raises(UnsupportedPolicyError):
        decide(Policy.parse("oracle"), acts, BASE_SPEC, REV, tag_compat)


def test_checkpoint_requires_positive_interval():
    with pytest.raises(ValidationError):
        Policy(kind="checkpoint", checkpoint=0)


def test_program_never_touches_retained_prefix():
    acts = acts_from("RRKKRK", conflicting={3})
    triple = decide(Policy.parse("absorber"), acts, BASE_SPEC, REV, tag_compat)
    touched = {seq for seq, _ in triple.program.steps}
    retained = {a.seq for a in acts if a.position <= triple.k_star}
    assert not (touched & retained)


def test_fallback_only_for_conflicting_x():
    acts = acts_from("KXX", conflicting={1, 2})
    triple = decide(Policy.parse("absorber"), acts, BASE_SPEC, REV, tag_compat)
    actions = dict(triple.program.steps)
    assert actions[acts[0].seq] == "compensate"
    assert actions[acts[1].seq] == "fallback"
    assert acts[2].seq not in actions  # compatible X commitment stands


def test_adapt_cost_full_restart_four_r_five_k():
    # Hand count: 4 inverts + 5 compensations = 9, and all 9 acts discarded.
    acts = acts_from("RRRRKKKKK", conflicting={5})
    triple = decide(Policy.parse("full_restart"), acts, BASE_SPEC, REV, tag_compat)
    cost = adapt_cost(triple, acts)
    assert (cost.comp_cost, cost.waste_cost) == (9, 9)


# ---------------------------------------------------------------------------
# Optimality, feasibility, dominance, monotonicity
# ---------------------------------------------------------------------------

prefix_strategy = st.tuples(
    st.text(alphabet="IRKX", min_size=1, max_size=14),
    st.sets(st.integers(min_value=1, max_value=14)),
)


@given(prefix_strategy)
def test_scan_rollback_minimizes_cost_uniquely(prefix):
    classes, conflict_positions = prefix
    conflicting = {p for p in conflict_positions if p <= len(classes) and classes[p - 1] in "KX"}
    acts = acts_from(classes, conflicting)
    triple = decide(Policy.parse("absorber"), acts, BASE_SPEC, REV, tag_compat)

    feasible = feasible_rollbacks(list(classes), conflicting)
    assert triple.k_star == feasible[-1]
    costs = {k: sum(rollback_cost(list(classes), k)) for k in feasible}
    best = min(costs.values())
    minimizers = [k for k, c in costs.items() if c == best]
    assert minimizers == [triple.k_star]


@given(prefix_strategy)
def test_absorber_feasibility(prefix):
    """The retained prefix never contains an incompatible K/X act."""
    classes, conflict_positions = prefix
    conflicting = {p for p in conflict_positions if p <= len(classes) and classes[p - 1] in "KX"}
    acts = acts_from(classes, conflicting)
    triple = decide(Policy.parse("absorber"), acts, BASE_SPEC, REV, tag_compat)
    assert not any(p <= triple.k_star for p in conflicting)


@given(prefix_strategy)
def test_waste_dominance_absorber_checkpoint_restart(prefix):
    classes, conflict_positions = prefix
    conflicting = {p for p in conflict_positions if p <= len(classes) and classes[p - 1] in "KX"}
    acts = acts_from(classes, conflicting)
    wastes = {}
    for label in ("absorber", "checkpoint5", "full_restart"):
        triple = decide(Policy.parse(label), acts, BASE_SPEC, REV, tag_compat)
        wastes[label] = adapt_cost(triple, acts).waste_cost
    assert wastes["absorber"] <= wastes["checkpoint5"] <= wastes["full_restart"]


@given(prefix_strategy)
def test_cost_monotone_in_rollback_depth(prefix):
    classes, conflict_positions = prefix
    conflicting = {p for p in conflict_positions if p <= len(classes) and classes[p - 1] in "KX"}
    feasible = feasible_rollbacks(list(classes), conflicting)
    comps = [rollback_cost(list(classes), k)[0] for k in feasible]
    wastes = [rollback_cost(list(classes), k)[1] for k in feasible]
    # deeper rollback (smaller k) never costs less
    assert comps == sorted(comps, reverse=True)
    assert wastes == sorted(wastes, reverse=True)
