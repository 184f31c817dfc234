"""Stream-mode agent runtime with mid-execution revision absorption."""

from .core import (
    Clause,
    EpistemicState,
    Event,
    EventKind,
    Phase,
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
from .policies import (
    AdaptCostReport,
    CompensationProgram,
    DecisionTriple,
    ExecutedAct,
    Policy,
    adapt_cost,
    decide,
    earliest_conflict_scan,
)
from .world import EffectEntry, UnsatisfiableRecord, WorldState

__version__ = "0.1.0"

__all__ = [
    "AdaptCostReport",
    "Clause",
    "CompensationProgram",
    "DecisionTriple",
    "EffectEntry",
    "EpistemicState",
    "Event",
    "EventKind",
    "ExecutedAct",
    "Phase",
    "Policy",
    "Revision",
    "RevisionType",
    "Specification",
    "ToolRegistry",
    "ToolSpec",
    "Trace",
    "UnsatisfiableRecord",
    "WorldState",
    "adapt_cost",
    "append_event",
    "apply_revision",
    "decide",
    "earliest_conflict_scan",
    "reversibility_ratio",
    "__version__",
]
