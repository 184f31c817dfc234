"""Revision-response policies.

When a revision lands mid-run, a policy turns the executed plan prefix into
a decision triple: where to roll the context back to (``k_star``, counted in
act positions), which world-state compensation program to run over the
discarded suffix, and how the planner should continue.

The absorber scans the executed acts for the earliest K/X-class act that is
incompatible with the revised specification and rolls back to just before
it. Compatibility is only ever asked about K/X acts: I-class acts leave no
world trace and R-class acts can be inverted for free, so neither constrains
feasibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import Revision, Specification
from .errors import UnsupportedPolicyError, ValidationError

POLICY_KINDS = (
    "oracle",
    "absorber",
    "full_restart",
    "naive",
    "ignore",
    "checkpoint",
    "interrupt",
)


@dataclass(frozen=True)
class Policy:
    kind: str
    checkpoint: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValidationError(f"unknown policy {self.kind!r}")
        if self.kind == "checkpoint":
            if not self.checkpoint or self.checkpoint < 1:
                raise ValidationError("checkpoint policy requires an interval >= 1")

    @classmethod
    def parse(cls, label: str) -> "Policy":
        label = label.strip().lower().replace("-", "_")
        if label.startswith("checkpoint"):
            digits = label.removeprefix("checkpoint").lstrip("_")
            return cls(kind="checkpoint", checkpoint=int(digits or 5))
        return cls(kind=label)

    @property
    def label(self) -> str:
        if self.kind == "checkpoint":
            return f"checkpoint{self.checkpoint}"
        return self.kind


@dataclass(frozen=True)
class ExecutedAct:
    """One already-executed plan act, as the decision layer sees it."""

    position: int  # 1-based index in the current effective plan
    seq: int  # event seq of the Act event
    tool: str
    klass: str
    effect_tags: tuple[str, ...] = ()
    values: dict[str, str] = field(default_factory=dict)
    obs_seq: int = 0  # event seq of the act's observation (context cut point)


@dataclass(frozen=True)
class CompensationProgram:
    """Ordered (act_seq, action) steps; action matches the act's class."""

    steps: tuple[tuple[int, str], ...] = ()

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class DecisionTriple:
    k_star: int
    program: CompensationProgram
    continuation: dict[str, object]


@dataclass(frozen=True)
class AdaptCostReport:
    comp_cost: int
    waste_cost: int

    @property
    def total(self) -> int:
        return self.comp_cost + self.waste_cost


CompatOracle = Callable[[ExecutedAct, Specification], bool]


def earliest_conflict_scan(
    acts: Sequence[ExecutedAct],
    spec_new: Specification,
    compat: CompatOracle,
    verdicts: dict[int, bool] | None = None,
) -> int:
    """Return the position of the earliest incompatible K/X act, else n+1.

    Only K/X-class acts are queried, so the scan costs at most one oracle
    call per such act. ``verdicts`` (position -> compatible) is filled in as
    a side channel for record-keeping and reuse.
    """
    for act in acts:
        if act.klass not in ("K", "X"):
            continue
        ok = _verdict(act, spec_new, compat, verdicts)
        if not ok:
            return act.position
    return len(acts) + 1


def _verdict(
    act: ExecutedAct,
    spec_new: Specification,
    compat: CompatOracle,
    verdicts: dict[int, bool] | None,
) -> bool:
    if verdicts is not None and act.position in verdicts:
        return verdicts[act.position]
    ok = bool(compat(act, spec_new))
    if verdicts is not None:
        verdicts[act.position] = ok
    return ok


def build_program(
    acts: Sequence[ExecutedAct],
    k_star: int,
    spec_new: Specification,
    compat: CompatOracle,
    verdicts: dict[int, bool] | None = None,
) -> CompensationProgram:
    """Compensation program over the discarded suffix, in forward order.

    R acts are inverted and K acts compensated unconditionally (their
    effects are stale once the suffix is replanned). X acts cannot be
    undone; the fallback handler is invoked only where the act actually
    conflicts with the revised spec - a compatible commitment simply stands.
    """
    steps: list[tuple[int, str]] = []
    for act in acts:
        if act.position <= k_star:
            continue
        if act.klass == "R":
            steps.append((act.seq, "invert"))
        elif act.klass == "K":
            steps.append((act.seq, "compensate"))
        elif act.klass == "X":
            if not _verdict(act, spec_new, compat, verdicts):
                steps.append((act.seq, "fallback"))
    return CompensationProgram(steps=tuple(steps))


def decide(
    policy: Policy,
    acts: Sequence[ExecutedAct],
    spec: Specification,
    rev: Revision,
    compat: CompatOracle,
    verdicts: dict[int, bool] | None = None,
) -> DecisionTriple:
    """Produce the decision triple for one pending revision.

    ``spec`` is the specification before absorption; every policy except
    ``ignore`` continues under ``spec`` + ``rev``.
    """
    from .core import apply_revision  # local to avoid import cycle in typing

    n = len(acts)
    if policy.kind == "oracle":
        raise UnsupportedPolicyError("the oracle is configured at t=0, it cannot decide mid-run")

    spec_new = apply_revision(spec, rev)

    if policy.kind == "ignore":
        return DecisionTriple(
            k_star=n,
            program=CompensationProgram(),
            continuation={"resume_position": n, "spec_updated": False},
        )
    if policy.kind == "naive":
        return DecisionTriple(
            k_star=n,
            program=CompensationProgram(),
            continuation={"resume_position": n, "spec_updated": True},
        )
    if policy.kind == "full_restart":
        program = build_program(acts, 0, spec_new, compat, verdicts)
        return DecisionTriple(
            k_star=0,
            program=program,
            continuation={"resume_position": 0, "spec_updated": True},
        )

    if policy.kind == "interrupt":
        # Stops at the first K/X act regardless of conflict, so it over-rolls
        # on revisions the committed prefix is perfectly compatible with.
        k_star = n
        for act in acts:
            if act.klass in ("K", "X"):
                k_star = act.position - 1
                break
    else:  # absorber / checkpoint share the conflict scan
        i_bad = earliest_conflict_scan(acts, spec_new, compat, verdicts)
        k_star = i_bad - 1
        if policy.kind == "checkpoint":
            interval = policy.checkpoint or 1
            k_star = (k_star // interval) * interval

    program = build_program(acts, k_star, spec_new, compat, verdicts)
    return DecisionTriple(
        k_star=k_star,
        program=program,
        continuation={"resume_position": k_star, "spec_updated": True},
    )


def adapt_cost(triple: DecisionTriple, acts: Sequence[ExecutedAct]) -> AdaptCostReport:
    """Compensation steps plus discarded pre-injection acts for one decision."""
    comp = sum(1 for _, action in triple.program.steps if action in ("invert", "compensate"))
    waste = sum(1 for act in acts if act.position > triple.k_star)
    return AdaptCostReport(comp_cost=comp, waste_cost=waste)


# ---------------------------------------------------------------------------
# Rollback-point sweep (used to check the scan's optimality run by run)
# ---------------------------------------------------------------------------


def feasible_rollbacks(classes: Sequence[str], incompatible: set[int]) -> list[int]:
    """All k whose retained prefix contains no incompatible K/X act."""
    n = len(classes)
    bad = [p for p in sorted(incompatible) if classes[p - 1] in ("K", "X")]
    limit = (bad[0] - 1) if bad else n
    return list(range(0, limit + 1))


def rollback_cost(classes: Sequence[str], k: int) -> tuple[int, int]:
    """(comp_cost, waste_cost) of forcing rollback point ``k``."""
    suffix = list(classes)[k:]
    comp = sum(1 for c in suffix if c in ("R", "K"))
    waste = len(suffix)
    return comp, waste
