"""Run-record serialization.

One run serializes to one JSON document; grids emit line-delimited JSON,
one run per line, written in enumeration order so identical configurations
produce byte-identical files. Documents carry no wall-clock material - the
only time in a record is the logical event sequence.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .core import EventKind, Phase, Specification
from .errors import IntegrityError
from .runtime import RunRecord

FLAT_FIELDS = (
    "run_id", "scenario", "rho", "policy", "revision_type", "seed", "timing",
    "n_injections", "length_mult", "wasted_acts", "comp_calls", "steps",
    "quality", "termination",
)


def spec_to_dict(spec: Specification) -> dict:
    return {
        "initial_query": spec.initial_query,
        "clauses": [
            {
                "id": c.clause_id,
                "text": c.text,
                "status": c.status,
                "constraints": dict(c.constraints),
                **({"ordering": {"before": list(c.ordering[0]), "after": list(c.ordering[1])}}
                   if c.ordering else {}),
            }
            for c in spec.clauses
        ],
        "absorbed": [
            {
                "rtype": r.rtype.value,
                "text": r.text,
                "target_clause": r.target_clause,
                "conflict_tags": list(r.conflict_tags),
            }
            for r in spec.absorbed
        ],
    }


def record_to_dict(record: RunRecord) -> dict:
    cfg = record.config
    return {
        "run_id": record.run_id,
        "scenario": cfg.scenario,
        "rho": cfg.rho,
        "rho_realized": record.realized_rho,
        "policy": cfg.policy,
        "revision_type": cfg.revision_type,
        "seed": cfg.seed,
        "timing": cfg.timing,
        "n_injections": cfg.n_injections,
        "length_mult": cfg.length_mult,
        "backend": cfg.backend,
        "wasted_acts": record.wasted_acts,
        "comp_calls": record.comp_calls,
        "steps": record.steps,
        "acts": record.acts,
        "token_estimate": record.token_estimate,
        "quality": record.quality,
        "termination": record.termination,
        "budget": record.budget,
        "oracle_premerge": record.oracle_premerge,
        "trace": [
            {"seq": e.seq, "kind": e.kind.value, "ts": e.timestamp, "payload": dict(e.payload)}
            for e in record.trace.events
        ],
        "spec_history": [
            {"seq": seq, "absorbed": len(spec.absorbed)} for seq, spec in record.trace.spec_history
        ],
        "world_log": [
            {"entry_id": w.entry_id, "source_seq": w.source_seq, "kind": w.kind,
             "content": dict(w.content)}
            for w in record.world.log
        ],
        "unsatisfiable": [
            {"action_seq": u.action_seq, "revision_ref": u.revision_ref, "note": u.note}
            for u in record.world.unsatisfiable
        ],
        "injections": [
            {
                "inj_seq": i.inj_seq,
                "rtype": i.revision.rtype.value,
                "k_star": i.k_star,
                "pre_act_count": i.pre_act_count,
                "pre_classes": list(i.pre_classes),
                "pre_tags": [list(t) for t in i.pre_tags],
                "conflict_tags": list(i.revision.conflict_tags),
                "incompatible": list(i.incompatible),
                "program": [[seq, action] for seq, action in i.program],
                "comp_cost": i.comp_cost,
                "waste_cost": i.waste_cost,
                "spec_updated": i.spec_updated,
            }
            for i in record.injections
        ],
        "final_spec": spec_to_dict(record.final_spec),
        "truth_spec": spec_to_dict(record.truth_spec),
    }


def dumps_record(record: RunRecord) -> str:
    return json.dumps(record_to_dict(record), sort_keys=True, indent=2) + "\n"


def dumps_line(record: RunRecord) -> str:
    return json.dumps(record_to_dict(record), sort_keys=True, separators=(",", ":")) + "\n"


def write_record(record: RunRecord, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_record(record))


def load_jsonl(path: Path) -> list[dict]:
    rows = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append(json.loads(line))
    return rows


def existing_run_ids(path: Path) -> set[str]:
    """Run ids already present in a (possibly truncated) grid output file."""
    if not path.exists():
        return set()
    ids = set()
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                ids.add(json.loads(line)["run_id"])
            except (ValueError, KeyError):
                continue  # interrupted write left a partial trailing line
    return ids


def append_lines(path: Path, lines: Iterable[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        for line in lines:
            fh.write(line)


# ---------------------------------------------------------------------------
# Counter recomputation (self-consistency)
# ---------------------------------------------------------------------------


def recompute_counters(doc: dict) -> dict:
    """Re-derive the headline counters from the stored trace.

    Wasted acts are the union over injections of plan-phase acts executed
    before that injection whose plan position lies beyond its rollback
    point; compensation calls count invert/compensate acts.
    """
    events = doc["trace"]
    act_events = [e for e in events if e["kind"] == EventKind.ACT.value]
    comp_events = [e for e in act_events
                   if e["payload"].get("phase") == Phase.COMPENSATION.value]
    plan_events = [e for e in act_events
                   if e["payload"].get("phase") != Phase.COMPENSATION.value]

    wasted: set[int] = set()
    for inj in doc["injections"]:
        for e in plan_events:
            if e["seq"] < inj["inj_seq"] and e["payload"]["act_index"] > inj["k_star"]:
                wasted.add(e["seq"])

    return {
        "steps": len(act_events),
        "acts": len(plan_events),
        "wasted_acts": len(wasted),
        "comp_calls": sum(1 for e in comp_events if e["payload"].get("action") != "fallback"),
    }


def verify_counters(doc: dict) -> None:
    computed = recompute_counters(doc)
    for key, value in computed.items():
        if doc[key] != value:
            raise IntegrityError(
                f"record {doc.get('run_id')}: stored {key}={doc[key]} but trace yields {value}"
            )
