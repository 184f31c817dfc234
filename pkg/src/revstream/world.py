"""Event-sourced world state.

Tool effects, inversions, compensations, and irreversibility fallbacks are
all appended to one log; the current world (email bodies, bookings,
payments) is a pure fold over that log. Rollback therefore never deletes
history - it adds entries that the fold interprets.

Fold semantics per entry kind:

* ``create``/``modify``  - R-class working documents; one entry id per tool,
  later acts modify in place (versions are kept for inversion).
* ``send``/``commit``    - K/X-class outbound effects; a fresh entry per act.
* ``invert``             - marks a prior create/modify op undone; the derived
  entry re-folds from the surviving versions.
* ``compensate``         - flags a send as corrected; the original stays in
  the log and in the derived map, no longer "live".
* ``fallback``           - records that an irreversible act was left standing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .core import Revision, ToolSpec
from .errors import DoubleInvertError, RegistryError, ReversibilityError

LIVE_KINDS = frozenset({"create", "modify", "send", "commit"})


@dataclass(frozen=True)
class EffectEntry:
    entry_id: str
    source_seq: int
    kind: str  # create | modify | send | commit | invert | compensate | fallback
    content: Mapping[str, object]

    @property
    def values(self) -> dict[str, str]:
        return dict(self.content.get("values", {}))  # type: ignore[arg-type]


@dataclass(frozen=True)
class UnsatisfiableRecord:
    """A permanently violated requirement caused by a committed X-class act."""

    action_seq: int
    revision_ref: str
    note: str


@dataclass(frozen=True)
class DerivedEntry:
    """Current content of one world entry after folding the log."""

    entry_id: str
    kind: str
    source_seq: int
    tool: str
    values: dict[str, str]
    compensated_by: int | None = None

    @property
    def live(self) -> bool:
        return self.compensated_by is None and self.kind in LIVE_KINDS


@dataclass(frozen=True)
class WorldState:
    log: tuple[EffectEntry, ...] = ()
    unsatisfiable: tuple[UnsatisfiableRecord, ...] = ()

    # -- queries ------------------------------------------------------------

    def entries(self) -> dict[str, DerivedEntry]:
        """Recompute the derived entry map from scratch (bit-stable fold)."""
        return _fold(self.log)

    def entry_for_act(self, act_seq: int) -> EffectEntry | None:
        for entry in self.log:
            if entry.source_seq == act_seq and entry.kind in LIVE_KINDS:
                return entry
        return None

    def _op_undone(self, act_seq: int) -> bool:
        return any(
            e.kind == "invert" and e.content.get("target_seq") == act_seq for e in self.log
        )

    def _compensation_for(self, act_seq: int) -> EffectEntry | None:
        for e in self.log:
            if e.kind == "compensate" and e.content.get("target_seq") == act_seq:
                return e
        return None

    # -- operations ----------------------------------------------------------

    def apply_effect(self, seq: int, tool: ToolSpec, values: Mapping[str, str]) -> "WorldState":
        """Apply one act's effect. I-class acts leave the world untouched."""
        if tool.klass == "I":
            return self
        if tool.klass == "R":
            entry_id = tool.entry_target or f"{tool.name}_doc"
            kind = "create" if not any(e.entry_id == entry_id for e in self.log) else "modify"
        elif tool.klass == "K":
            entry_id = f"{tool.name}.{seq}"
            kind = "send"
        elif tool.klass == "X":
            entry_id = f"{tool.name}.{seq}"
            kind = "commit"
        else:  # pragma: no cover - registry rejects other classes
            raise RegistryError(f"unclassified tool {tool.name!r}")
        entry = EffectEntry(
            entry_id=entry_id,
            source_seq=seq,
            kind=kind,
            content={"tool": tool.name, "class": tool.klass, "values": dict(values)},
        )
        return replace(self, log=self.log + (entry,))

    def invert(self, act_seq: int) -> "WorldState":
        """Undo an R-class act exactly; the target entry re-folds without it."""
        target = self._find_op(act_seq)
        if target.content.get("class") != "R":
            raise ReversibilityError(f"act {act_seq} is not R-class, cannot invert")
        if self._op_undone(act_seq):
            raise DoubleInvertError(f"act {act_seq} already inverted")
        entry = EffectEntry(
            entry_id=target.entry_id,
            source_seq=act_seq,
            kind="invert",
            content={"target_seq": act_seq, "target_entry": target.entry_id,
                     "tool": target.content.get("tool")},
        )
        return replace(self, log=self.log + (entry,))

    def compensate(self, act_seq: int, compensator: str) -> "WorldState":
        """Issue the bound compensation for a K-class act (idempotent per act)."""
        target = self._find_op(act_seq)
        if target.content.get("class") != "K":
            raise ReversibilityError(f"act {act_seq} is not K-class, cannot compensate")
        if self._compensation_for(act_seq) is not None:
            return self
        entry = EffectEntry(
            entry_id=f"{compensator}.{act_seq}",
            source_seq=act_seq,
            kind="compensate",
            content={
                "tool": compensator,
                "target_seq": act_seq,
                "target_entry": target.entry_id,
                "values": {"correction_of": target.entry_id},
            },
        )
        return replace(self, log=self.log + (entry,))

    def x_fallback(self, act_seq: int, rev: Revision, note: str | None = None) -> "WorldState":
        """Record that an irreversible act stands in conflict with a revision."""
        target = self._find_op(act_seq)
        if target.content.get("class") != "X":
            raise ReversibilityError(f"act {act_seq} is not X-class")
        ref = f"{rev.rtype.value}:{rev.text[:48]}"
        entry = EffectEntry(
            entry_id=f"fallback.{act_seq}",
            source_seq=act_seq,
            kind="fallback",
            content={"target_seq": act_seq, "target_entry": target.entry_id,
                     "revision": ref},
        )
        record = UnsatisfiableRecord(
            action_seq=act_seq,
            revision_ref=ref,
            note=note or f"{target.content.get('tool')} is settled and cannot satisfy: {rev.text}",
        )
        return WorldState(log=self.log + (entry,), unsatisfiable=self.unsatisfiable + (record,))

    def _find_op(self, act_seq: int) -> EffectEntry:
        entry = self.entry_for_act(act_seq)
        if entry is None:
            raise ReversibilityError(f"no world effect recorded for act {act_seq}")
        return entry


def _fold(log: tuple[EffectEntry, ...]) -> dict[str, DerivedEntry]:
    undone = {
        e.content.get("target_seq") for e in log if e.kind == "invert"
    }
    compensated = {
        e.content.get("target_seq"): e.source_seq for e in log if e.kind == "compensate"
    }
    derived: dict[str, DerivedEntry] = {}
    for e in log:
        if e.kind in ("create", "modify"):
            if e.source_seq in undone:
                continue
            derived[e.entry_id] = DerivedEntry(
                entry_id=e.entry_id,
                kind=e.kind,
                source_seq=e.source_seq,
                tool=str(e.content.get("tool")),
                values=e.values,
            )
        elif e.kind in ("send", "commit"):
            comp = compensated.get(e.source_seq)
            derived[e.entry_id] = DerivedEntry(
                entry_id=e.entry_id,
                kind=e.kind,
                source_seq=e.source_seq,
                tool=str(e.content.get("tool")),
                values=e.values,
                compensated_by=comp,
            )
        elif e.kind in ("compensate", "fallback"):
            derived[e.entry_id] = DerivedEntry(
                entry_id=e.entry_id,
                kind=e.kind,
                source_seq=e.source_seq,
                tool=str(e.content.get("tool", "")),
                values=e.values,
            )
        # invert entries shape the fold; they do not materialize
    # Re-fold document entries whose ops were partially undone: drop ids whose
    # every create/modify op is undone.
    doc_ops: dict[str, list[EffectEntry]] = {}
    for e in log:
        if e.kind in ("create", "modify"):
            doc_ops.setdefault(e.entry_id, []).append(e)
    for entry_id, ops in doc_ops.items():
        surviving = [op for op in ops if op.source_seq not in undone]
        if not surviving:
            derived.pop(entry_id, None)
    return derived


# Functional wrappers mirroring the operation contracts ----------------------


def apply_effect(world: WorldState, seq: int, tool: ToolSpec,
                 values: Mapping[str, str]) -> WorldState:
    return world.apply_effect(seq, tool, values)


def invert(world: WorldState, act_seq: int) -> WorldState:
    return world.invert(act_seq)


def compensate(world: WorldState, act_seq: int, compensator: str) -> WorldState:
    return world.compensate(act_seq, compensator)


def x_fallback(world: WorldState, act_seq: int, rev: Revision) -> WorldState:
    return world.x_fallback(act_seq, rev)
