"""Benchmark harness: scenario construction, ratio instantiation, grids.

Scenario content lives in ``data/scenarios.yaml`` (fixed fixture data, so
judge inputs are stable). This module materializes scenarios at a requested
reversibility-ratio target and plan-length multiplier, builds the revision
library, computes injection schedules, and enumerates experiment grids in a
deterministic order so reruns align file-for-file.

Ratio instantiation works on whole tools: K/X tools are disabled from the
tail of the plan backwards and their steps handed to R-class draft
equivalents, so the earliest K/X act keeps its slot while any target that
whole-tool granularity cannot hit exactly snaps to the nearest achievable
value (recorded per run).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from itertools import product

import yaml

from .core import Clause, Revision, RevisionType, Specification, ToolRegistry, ToolSpec
from .core import reversibility_ratio
from .errors import ConfigError
from .policies import Policy

RHO_LEVELS = (1.0, 0.75, 0.5, 0.25)
TIMING_REGIMES = ("early", "mid", "late", "very_late")
SCENARIO_NAMES = ("event_planning", "travel", "report_publish")

# Type order used when a multi-injection run cycles through revision kinds.
MULTI_INJECTION_CYCLE = (
    RevisionType.SUBSTITUTIVE,
    RevisionType.ADDITIVE,
    RevisionType.RESTRICTIVE,
    RevisionType.PRIORITY_SHIFT,
    RevisionType.CANCELLATION,
)


@dataclass(frozen=True)
class PlanStep:
    tool: str
    values: dict[str, str] = field(default_factory=dict)
    base_tool: str = ""  # fixture tool name, stable across ratio instantiation

    def __post_init__(self) -> None:
        if not self.base_tool:
            object.__setattr__(self, "base_tool", self.tool)


@dataclass(frozen=True)
class PlanTransform:
    """Deterministic plan rewrite a revision implies for the scripted planner.

    Transforms address steps by their fixture tool name, so they apply
    unchanged when ratio instantiation has swapped a step to its draft
    equivalent.
    """

    updates: dict[str, dict[str, str]] = field(default_factory=dict)
    drops: tuple[str, ...] = ()
    reorder: tuple[tuple[str, str], ...] = ()

    def apply(self, steps: list[PlanStep]) -> list[PlanStep]:
        out: list[PlanStep] = []
        for step in steps:
            if step.base_tool in self.drops:
                continue
            extra = self.updates.get(step.base_tool)
            values = {**step.values, **extra} if extra else step.values
            out.append(PlanStep(tool=step.tool, values=values, base_tool=step.base_tool))
        for before, after in self.reorder:
            try:
                b = next(i for i, s in enumerate(out) if s.base_tool == before)
                a = next(i for i, s in enumerate(out) if s.base_tool == after)
            except StopIteration:
                continue
            if b > a:
                moved = out.pop(b)
                out.insert(a, moved)
        return out


@dataclass(frozen=True)
class Scenario:
    """A materialized scenario: steps, registry, and revision library."""

    name: str
    query: str
    steps: tuple[PlanStep, ...]
    registry: ToolRegistry
    plan_toolset: tuple[str, ...]
    clauses: tuple[Clause, ...]
    revisions: dict[str, Revision]
    transforms: dict[str, PlanTransform]
    target_rho: float
    realized_rho: float
    length_multiplier: int
    first_kx_index: int | None  # position of the earliest enabled K/X act
    mid_slot: int  # the injection slot `mid` uses even when no K/X is enabled

    @property
    def plan_length(self) -> int:
        return len(self.steps)

    def initial_spec(self) -> Specification:
        return Specification(initial_query=self.query, clauses=self.clauses)

    def tool(self, name: str) -> ToolSpec:
        return self.registry.get(name)

    def last_kx_index(self) -> int | None:
        last = None
        for i, step in enumerate(self.steps, start=1):
            if self.tool(step.tool).klass in ("K", "X"):
                last = i
        return last

    def revision(self, rtype: RevisionType | str) -> Revision:
        key = rtype.value if isinstance(rtype, RevisionType) else rtype
        try:
            return self.revisions[key]
        except KeyError:
            raise ConfigError(f"scenario {self.name} has no {key} revision") from None

    def transform(self, rtype: RevisionType | str) -> PlanTransform:
        key = rtype.value if isinstance(rtype, RevisionType) else rtype
        return self.transforms[key]


# ---------------------------------------------------------------------------
# Fixture loading
# ---------------------------------------------------------------------------


def _load_fixtures() -> dict:
    text = resources.files("revstream").joinpath("data/scenarios.yaml").read_text()
    return yaml.safe_load(text)


_FIXTURES: dict | None = None


def fixtures() -> dict:
    global _FIXTURES
    if _FIXTURES is None:
        _FIXTURES = _load_fixtures()
    return _FIXTURES


def _clause_from_fixture(raw: dict) -> Clause:
    ordering = None
    if "ordering" in raw:
        ordering = (
            tuple(raw["ordering"]["before"]),
            tuple(raw["ordering"]["after"]),
        )
    return Clause(
        clause_id=raw["id"],
        text=raw.get("text", ""),
        constraints=dict(raw.get("constraints", {})),
        ordering=ordering,
    )


def _aux_name(prefix: str, name: str) -> str:
    return f"{prefix}_{name}"


def _build_registry(fx: dict) -> tuple[ToolRegistry, dict[str, ToolSpec], dict[str, ToolSpec]]:
    """Registry with plan tools, draft equivalents, and inverse/compensator bindings."""
    registry = ToolRegistry()
    plan_tools: dict[str, ToolSpec] = {}
    drafts: dict[str, ToolSpec] = {}
    for raw in fx["tools"]:
        name = raw["name"]
        klass = raw["class"]
        tags = tuple(raw.get("tags", ()))
        if klass == "I":
            tool = ToolSpec(name=name, klass="I", effect_tags=tags)
        elif klass == "R":
            tool = ToolSpec(
                name=name, klass="R", effect_tags=tags,
                inverse_of=_aux_name("discard", name),
                entry_target=raw.get("entry"),
            )
            registry.register(ToolSpec(
                name=_aux_name("discard", name), klass="R", inverse_of=name,
                entry_target=raw.get("entry"),
            ))
        elif klass == "K":
            comp = _aux_name("amend", name)
            tool = ToolSpec(name=name, klass="K", effect_tags=tags, compensator=comp)
            registry.register(ToolSpec(name=comp, klass="K", compensator=comp))
        else:  # X
            tool = ToolSpec(name=name, klass="X", effect_tags=tags)
        registry.register(tool)
        plan_tools[name] = tool
        if "draft" in raw:
            d = raw["draft"]
            draft = ToolSpec(
                name=d["name"], klass="R", effect_tags=tags,
                inverse_of=_aux_name("discard", d["name"]),
                entry_target=d["entry"],
            )
            registry.register(draft)
            registry.register(ToolSpec(
                name=_aux_name("discard", d["name"]), klass="R", inverse_of=d["name"],
                entry_target=d["entry"],
            ))
            drafts[name] = draft
    registry.validate_bindings()
    return registry, plan_tools, drafts


def achievable_rhos(name: str) -> dict[float, int]:
    """Map of realized rho -> number of disabled K/X tools for a scenario."""
    fx = fixtures()[name]
    n_ir = sum(1 for t in fx["tools"] if t["class"] in ("I", "R"))
    n_kx = sum(1 for t in fx["tools"] if t["class"] in ("K", "X"))
    total = n_ir + n_kx
    return {(n_ir + d) / total: d for d in range(n_kx + 1)}


def build_scenario(
    name: str,
    target_rho: float = 0.25,
    length_multiplier: int = 1,
    strict_rho: bool = False,
) -> Scenario:
    """Materialize a scenario at a ratio target and plan-length multiplier."""
    try:
        fx = fixtures()[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}") from None
    if length_multiplier < 1:
        raise ConfigError("length multiplier must be >= 1")

    registry, plan_tools, drafts = _build_registry(fx)
    base_steps = [PlanStep(tool=s["tool"], values=dict(s.get("values", {})))
                  for s in fx["steps"]]

    # Stretch the plan: repeat the I/R body, keep the K/X tail structure.
    kx_positions = [i for i, s in enumerate(base_steps)
                    if plan_tools[s.tool].klass in ("K", "X")]
    first_kx0 = kx_positions[0] if kx_positions else len(base_steps)
    body, tail = base_steps[:first_kx0], base_steps[first_kx0:]
    total = len(base_steps) * length_multiplier
    body_needed = total - len(tail)
    steps = [body[i % len(body)] for i in range(body_needed)] + tail

    # Ratio instantiation: disable K/X tools from the end of the plan.
    options = achievable_rhos(name)
    realized = min(options, key=lambda r: (abs(r - target_rho), options[r]))
    if strict_rho and abs(realized - target_rho) > 1e-9:
        raise ConfigError(
            f"rho {target_rho} is unreachable for {name}; nearest achievable is {realized:.4f}"
        )
    disable_count = options[realized]
    kx_order: list[str] = []
    for s in base_steps:
        klass = plan_tools[s.tool].klass
        if klass in ("K", "X") and s.tool not in kx_order:
            kx_order.append(s.tool)
    disabled = set(kx_order[len(kx_order) - disable_count:]) if disable_count else set()

    final_steps: list[PlanStep] = []
    for s in steps:
        if s.tool in disabled:
            final_steps.append(PlanStep(tool=drafts[s.tool].name, values=s.values,
                                        base_tool=s.tool))
        else:
            final_steps.append(s)

    toolset_names: list[str] = []
    for s in base_steps:  # one entry per distinct base tool, plan order
        enabled_name = drafts[s.tool].name if s.tool in disabled else s.tool
        if enabled_name not in toolset_names:
            toolset_names.append(enabled_name)
    toolset = [registry.get(n) for n in toolset_names]
    realized_rho = reversibility_ratio(toolset)

    first_kx = None
    for i, s in enumerate(final_steps, start=1):
        if registry.get(s.tool).klass in ("K", "X"):
            first_kx = i
            break
    mid_slot = first_kx if first_kx is not None else body_needed + 1

    clauses = tuple(_clause_from_fixture(c) for c in fx["clauses"])
    revisions: dict[str, Revision] = {}
    transforms: dict[str, PlanTransform] = {}
    for key, raw in fx["revisions"].items():
        revisions[key] = Revision(
            rtype=RevisionType(key),
            text=raw["text"],
            target_clause=raw.get("target_clause"),
            conflict_tags=tuple(raw.get("conflict_tags", ())),
            new_clauses=tuple(_clause_from_fixture(c) for c in raw.get("clauses", ())),
        )
        transforms[key] = PlanTransform(
            updates={t: dict(v) for t, v in raw.get("updates", {}).items()},
            drops=tuple(raw.get("drops", ())),
            reorder=tuple((a, b) for a, b in raw.get("reorder", ())),
        )

    return Scenario(
        name=name,
        query=fx["query"],
        steps=tuple(final_steps),
        registry=registry,
        plan_toolset=tuple(toolset_names),
        clauses=clauses,
        revisions=revisions,
        transforms=transforms,
        target_rho=target_rho,
        realized_rho=realized_rho,
        length_multiplier=length_multiplier,
        first_kx_index=first_kx,
        mid_slot=mid_slot,
    )


def build_revision(scenario: Scenario, rtype: RevisionType | str) -> Revision:
    return scenario.revision(rtype)


# ---------------------------------------------------------------------------
# Injection scheduling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleEntry:
    trigger: str  # early | mid | late | very_late | at_fraction
    after_acts: int  # fire once this many plan acts have executed
    revision: Revision


@dataclass(frozen=True)
class InjectionSchedule:
    entries: tuple[ScheduleEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)


def trigger_slot(scenario: Scenario, trigger: str, fraction: float | None = None) -> int:
    """Translate a timing regime into "fire after N plan acts"."""
    n = scenario.plan_length
    last_kx = scenario.last_kx_index()
    very_late = last_kx if last_kx is not None else n
    if trigger == "early":
        return 0
    if trigger == "mid":
        return scenario.mid_slot
    if trigger == "late":
        return min(math.ceil(0.9 * n), very_late)
    if trigger == "very_late":
        return very_late
    if trigger == "at_fraction":
        if fraction is None:
            raise ConfigError("at_fraction trigger requires a fraction")
        return max(0, min(n, math.floor(fraction * n)))
    raise ConfigError(f"unknown trigger {trigger!r}")


def single_injection_schedule(
    scenario: Scenario, rtype: RevisionType | str, timing: str
) -> InjectionSchedule:
    rev = scenario.revision(rtype)
    return InjectionSchedule(entries=(
        ScheduleEntry(trigger=timing, after_acts=trigger_slot(scenario, timing), revision=rev),
    ))


def multi_injection_schedule(scenario: Scenario, n_injections: int) -> InjectionSchedule:
    """1..5 sequential injections of cycling types at evenly spaced triggers."""
    if not 1 <= n_injections <= len(MULTI_INJECTION_CYCLE):
        raise ConfigError(f"n_injections must be in 1..{len(MULTI_INJECTION_CYCLE)}")
    entries = []
    for i in range(1, n_injections + 1):
        fraction = i / (n_injections + 1)
        rtype = MULTI_INJECTION_CYCLE[i - 1]
        entries.append(ScheduleEntry(
            trigger="at_fraction",
            after_acts=trigger_slot(scenario, "at_fraction", fraction),
            revision=scenario.revision(rtype),
        ))
    return InjectionSchedule(entries=tuple(entries))


# ---------------------------------------------------------------------------
# Grid enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    rho: float
    revision_type: str  # one revision type, or "mixed" for multi-injection runs
    policy: str
    timing: str
    n_injections: int
    length_mult: int
    seed: int
    backend: str = "mock"

    @property
    def run_id(self) -> str:
        import hashlib

        key = "|".join(
            str(x) for x in (
                self.scenario, self.rho, self.revision_type, self.policy,
                self.timing, self.n_injections, self.length_mult, self.seed,
                self.backend,
            )
        )
        return hashlib.sha1(key.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class GridConfig:
    scenarios: tuple[str, ...] = SCENARIO_NAMES
    rhos: tuple[float, ...] = RHO_LEVELS
    revision_types: tuple[str, ...] = tuple(t.value for t in RevisionType)
    policies: tuple[str, ...] = ("absorber", "full_restart", "naive", "ignore")
    timings: tuple[str, ...] = ("mid",)
    n_injections: tuple[int, ...] = (1,)
    length_mults: tuple[int, ...] = (1,)
    seeds: tuple[int, ...] = (0,)
    backend: str = "mock"

    def cardinality(self) -> int:
        return (
            len(self.scenarios) * len(self.rhos) * len(self.revision_types)
            * len(self.policies) * len(self.timings) * len(self.n_injections)
            * len(self.length_mults) * len(self.seeds)
        )


def enumerate_grid(grid: GridConfig) -> list[RunConfig]:
    """Deterministic (lexicographic over dimensions, then seed) enumeration."""
    if grid.cardinality() == 0:
        raise ConfigError("grid cross-product is empty")
    for policy in grid.policies:
        Policy.parse(policy)  # fail fast on typos before any execution
    configs = []
    for scenario, rho, rtype, policy, timing, n_inj, mult, seed in product(
        grid.scenarios, grid.rhos, grid.revision_types, grid.policies,
        grid.timings, grid.n_injections, grid.length_mults, grid.seeds,
    ):
        configs.append(RunConfig(
            scenario=scenario, rho=rho, revision_type=rtype, policy=policy,
            timing=timing, n_injections=n_inj, length_mult=mult, seed=seed,
            backend=grid.backend,
        ))
    return configs


def grid_from_file(path) -> GridConfig:
    """Load a grid from a human-editable YAML file (same keys as GridConfig)."""
    from pathlib import Path

    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ConfigError(f"grid file {path} must hold a mapping")
    known = {
        "scenarios", "rhos", "revision_types", "policies", "timings",
        "n_injections", "length_mults", "seeds", "backend",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"grid file {path}: unknown keys {sorted(unknown)}")
    kwargs = {
        key: (value if key == "backend" else tuple(value))
        for key, value in raw.items()
    }
    return GridConfig(**kwargs)


PRESETS: dict[str, GridConfig] = {
    "main-grid": GridConfig(
        policies=("oracle", "absorber", "full_restart", "naive", "ignore",
                  "checkpoint5", "interrupt"),
        seeds=(0, 1),
    ),
    "rho-sweep": GridConfig(
        policies=("absorber", "full_restart"),
        seeds=(0, 1, 2),
    ),
    "timing-ablation": GridConfig(
        rhos=(0.25,),
        timings=TIMING_REGIMES,
        seeds=(0, 1),
    ),
    "multi-injection": GridConfig(
        rhos=(0.25,),
        revision_types=("mixed",),
        timings=("spread",),
        n_injections=(1, 2, 3, 4, 5),
        seeds=(0, 1),
    ),
    "plan-length": GridConfig(
        rhos=(0.25,),
        revision_types=("substitutive",),
        policies=("absorber", "full_restart"),
        length_mults=(1, 2, 3, 4, 5, 6),
        seeds=(0, 1),
    ),
}


def schedule_for_config(scenario: Scenario, config: RunConfig) -> InjectionSchedule:
    if config.revision_type == "mixed":
        return multi_injection_schedule(scenario, config.n_injections)
    if config.n_injections != 1:
        raise ConfigError("multi-injection runs use revision_type 'mixed'")
    return single_injection_schedule(scenario, config.revision_type, config.timing)
