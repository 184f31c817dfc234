"""Stream-paradigm vocabulary: events, traces, tools, specifications, revisions.

The runtime state is split in two layers. The *epistemic* side (what the
planner can see) is always rollbackable by truncating context. The *world*
side (external effects) lives in :mod:`revstream.world` and is rollbackable
only according to each tool's reversibility class:

    I  idempotent   - no world effect, nothing to undo
    R  reversible   - an exact inverse tool exists
    K  compensable  - no exact inverse, but a bound compensator exists
    X  irreversible - committed for good

Everything in this module is an immutable value; mutation happens by
producing new values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

from .errors import IntegrityError, RegistryError, ValidationError

REVERSIBLE_CLASSES = frozenset({"I", "R"})
WORLD_CLASSES = frozenset({"I", "R", "K", "X"})


class EventKind(str, Enum):
    ACT = "act"
    THOUGHT = "thought"
    OBS = "obs"
    INJ = "inj"


class Phase(str, Enum):
    """Role of an act inside the stream: scripted plan, compensation, or replan."""

    PLAN = "plan"
    COMPENSATION = "compensation"
    REPLANNED = "replanned"


class RevisionType(str, Enum):
    ADDITIVE = "additive"
    RESTRICTIVE = "restrictive"
    SUBSTITUTIVE = "substitutive"
    CANCELLATION = "cancellation"
    PRIORITY_SHIFT = "priority_shift"


@dataclass(frozen=True)
class ToolSpec:
    """A registered tool plus its reversibility contract.

    ``inverse_of`` is required exactly for R-class tools and ``compensator``
    exactly for K-class tools; both must resolve inside the same registry.
    ``effect_tags`` are the semantic keys the tool writes into world entries
    (e.g. ``venue_style``); rule-based compatibility checks intersect them
    with a revision's ``conflict_tags``.
    """

    name: str
    klass: str
    effect_tags: tuple[str, ...] = ()
    inverse_of: str | None = None
    compensator: str | None = None
    params_schema: tuple[str, ...] = ()
    entry_target: str | None = None  # fixed entry id for R-class working documents

    def __post_init__(self) -> None:
        if self.klass not in WORLD_CLASSES:
            raise RegistryError(f"tool {self.name!r}: unknown class {self.klass!r}")
        if self.klass == "R" and not self.inverse_of:
            raise RegistryError(f"tool {self.name!r}: R-class requires inverse_of")
        if self.klass == "K" and not self.compensator:
            raise RegistryError(f"tool {self.name!r}: K-class requires compensator")
        if self.klass in ("I", "X") and (self.inverse_of or self.compensator):
            raise RegistryError(
                f"tool {self.name!r}: class {self.klass} must not bind an inverse/compensator"
            )


class ToolRegistry:
    """Name -> ToolSpec mapping with cross-reference validation."""

    def __init__(self, tools: list[ToolSpec] | None = None) -> None:
        self._tools: dict[str, ToolSpec] = {}
        for tool in tools or []:
            self.register(tool)

    def register(self, tool: ToolSpec) -> None:
        if tool.name in self._tools:
            raise RegistryError(f"duplicate tool {tool.name!r}")
        self._tools[tool.name] = tool

    def get(self, name: str) -> ToolSpec:
        try:
            return self._tools[name]
        except KeyError:
            raise RegistryError(f"unknown tool {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def tools(self) -> list[ToolSpec]:
        return list(self._tools.values())

    def validate_bindings(self) -> None:
        """Check every inverse/compensator reference resolves in this registry."""
        for tool in self._tools.values():
            if tool.inverse_of and tool.inverse_of not in self._tools:
                raise RegistryError(
                    f"tool {tool.name!r}: inverse {tool.inverse_of!r} is not registered"
                )
            if tool.compensator and tool.compensator not in self._tools:
                raise RegistryError(
                    f"tool {tool.name!r}: compensator {tool.compensator!r} is not registered"
                )


def reversibility_ratio(toolset: list[ToolSpec]) -> float:
    """Fraction of the toolset that is I- or R-class."""
    if not toolset:
        raise ValueError("reversibility ratio is undefined for an empty toolset")
    reversible = sum(1 for t in toolset if t.klass in REVERSIBLE_CLASSES)
    return reversible / len(toolset)


# ---------------------------------------------------------------------------
# Specifications and revisions
# ---------------------------------------------------------------------------

ClauseStatus = str  # active | revoked | replaced


@dataclass(frozen=True)
class Clause:
    """One requirement of the task.

    ``constraints`` maps effect-tag keys to the value the world must show
    (checked by the rubric judge). ``ordering`` optionally demands that some
    live entry produced by a ``before`` tool precedes every live entry
    produced by an ``after`` tool.
    """

    clause_id: str
    text: str
    status: ClauseStatus = "active"
    constraints: Mapping[str, str] = field(default_factory=dict)
    ordering: tuple[tuple[str, ...], tuple[str, ...]] | None = None

    def with_status(self, status: ClauseStatus) -> "Clause":
        return replace(self, status=status)


@dataclass(frozen=True)
class Revision:
    """A user revision arriving on the exogenous channel.

    ``conflict_tags`` name the effect-tag keys this revision contradicts;
    they drive the deterministic rule-based compatibility oracle.
    ``new_clauses`` are the clause records absorption appends (for a
    substitution, the first one is the replacement).
    """

    rtype: RevisionType
    text: str
    target_clause: str | None = None
    conflict_tags: tuple[str, ...] = ()
    new_clauses: tuple[Clause, ...] = ()

    def __post_init__(self) -> None:
        if self.rtype in (RevisionType.SUBSTITUTIVE, RevisionType.CANCELLATION):
            if not self.target_clause:
                raise ValidationError(f"{self.rtype.value} revision requires a target clause")


@dataclass(frozen=True)
class Specification:
    """Initial query plus the auditable clause history and absorbed revisions."""

    initial_query: str
    clauses: tuple[Clause, ...] = ()
    absorbed: tuple[Revision, ...] = ()

    def clause(self, clause_id: str) -> Clause:
        for c in self.clauses:
            if c.clause_id == clause_id:
                return c
        raise ValidationError(f"unknown clause {clause_id!r}")

    def active_clauses(self) -> tuple[Clause, ...]:
        return tuple(c for c in self.clauses if c.status == "active")

    def effective_constraints(self) -> dict[str, tuple[str, str]]:
        """Latest-active-clause-wins view: key -> (owning clause_id, value).

        A later active clause narrowing the same key supersedes an earlier
        one, so a tightened budget does not leave the original bound
        competing with it.
        """
        effective: dict[str, tuple[str, str]] = {}
        for c in self.clauses:
            if c.status != "active":
                continue
            for key, value in c.constraints.items():
                effective[key] = (c.clause_id, value)
        return effective


def apply_revision(spec: Specification, rev: Revision) -> Specification:
    """Fold one revision into the specification.

    Clause records are never deleted: substitution and cancellation flip
    status and (for substitution) append the replacement, so replaying
    ``absorbed`` over the initial clause set always reproduces the result.
    """
    clauses = list(spec.clauses)
    serial = len(spec.absorbed) + 1
    rtype = rev.rtype

    def appended(kind: str) -> list[Clause]:
        if rev.new_clauses:
            return list(rev.new_clauses)
        return [Clause(clause_id=f"{kind}_{serial}", text=rev.text)]

    if rtype == RevisionType.ADDITIVE:
        clauses.extend(appended("added"))
    elif rtype == RevisionType.RESTRICTIVE:
        clauses.extend(appended("restricted"))
    elif rtype == RevisionType.SUBSTITUTIVE:
        idx = _locate(clauses, rev.target_clause)
        clauses[idx] = clauses[idx].with_status("replaced")
        clauses.extend(appended("replacement"))
    elif rtype == RevisionType.CANCELLATION:
        idx = _locate(clauses, rev.target_clause)
        clauses[idx] = clauses[idx].with_status("revoked")
        clauses.extend(rev.new_clauses)
    elif rtype == RevisionType.PRIORITY_SHIFT:
        clauses.extend(appended("priority"))
    else:  # pragma: no cover - RevisionType is closed
        raise ValidationError(f"unknown revision type {rtype!r}")

    return Specification(
        initial_query=spec.initial_query,
        clauses=tuple(clauses),
        absorbed=spec.absorbed + (rev,),
    )


def _locate(clauses: list[Clause], clause_id: str | None) -> int:
    for i, c in enumerate(clauses):
        if c.clause_id == clause_id:
            return i
    raise ValidationError(f"unknown target clause {clause_id!r}")


# ---------------------------------------------------------------------------
# Events and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    """One typed entry of the execution stream.

    ``seq`` doubles as logical time: values inside a trace are strictly
    consecutive. Act payloads carry the tool name, arguments, the class
    declared by the tool, the plan position (``act_index``), and a phase
    marker distinguishing scripted, compensation, and replanned acts.
    """

    seq: int
    kind: EventKind
    payload: Mapping[str, object]
    timestamp: int = 0

    def __post_init__(self) -> None:
        if self.seq < 1:
            raise IntegrityError(f"event seq must be positive, got {self.seq}")
        if self.timestamp == 0:
            object.__setattr__(self, "timestamp", self.seq)


@dataclass(frozen=True)
class Trace:
    """Append-only event stream plus specification snapshots."""

    events: tuple[Event, ...] = ()
    spec_history: tuple[tuple[int, Specification], ...] = ()

    @property
    def last_seq(self) -> int:
        return self.events[-1].seq if self.events else 0

    def acts(self) -> tuple[Event, ...]:
        return tuple(e for e in self.events if e.kind == EventKind.ACT)

    def prefix(self, seq: int) -> "Trace":
        return Trace(
            events=tuple(e for e in self.events if e.seq <= seq),
            spec_history=tuple(s for s in self.spec_history if s[0] <= seq),
        )


def append_event(trace: Trace, event: Event) -> Trace:
    """Extend the trace by one event, enforcing gap-free monotone seq."""
    expected = trace.last_seq + 1
    if event.seq != expected:
        raise IntegrityError(f"expected seq {expected}, got {event.seq}")
    return replace(trace, events=trace.events + (event,))


@dataclass(frozen=True)
class EpistemicState:
    """What the planner can see: visible event seqs plus the current spec."""

    context: tuple[int, ...] = ()
    spec: Specification = field(default_factory=lambda: Specification(initial_query=""))

    def truncate_to(self, seq: int) -> "EpistemicState":
        """Keep exactly the events with seq <= the cut point visible."""
        return replace(self, context=tuple(s for s in self.context if s <= seq))

    def extend(self, seq: int) -> "EpistemicState":
        return replace(self, context=self.context + (seq,))

    def with_spec(self, spec: Specification) -> "EpistemicState":
        return replace(self, spec=spec)
