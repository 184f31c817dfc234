"""Backend interfaces and configuration.

Three oracle roles exist: the planner (next thought+act), the compatibility
check consulted by the conflict scan, and the judge scoring a finished run.
The mock backend implements all three deterministically; the chat backend
delegates each to a chat-completions endpoint.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

from ..core import EpistemicState, Specification, Trace
from ..errors import ConfigError
from ..policies import ExecutedAct
from ..world import WorldState


@dataclass(frozen=True)
class PlannedStep:
    """One planner emission: reasoning plus the tool call it settled on."""

    thought: str
    tool: str
    values: dict[str, str] = field(default_factory=dict)


@runtime_checkable
class PlannerBackend(Protocol):
    def plan_next(
        self, epistemic: EpistemicState, world: WorldState, trace: Trace
    ) -> PlannedStep | None: ...


@runtime_checkable
class CompatBackend(Protocol):
    def is_compatible(self, act: ExecutedAct, spec_new: Specification) -> bool: ...


@runtime_checkable
class JudgeBackend(Protocol):
    def judge_quality(self, world: WorldState, spec_truth: Specification) -> float: ...


@dataclass(frozen=True)
class Backends:
    planner: PlannerBackend
    compat: CompatBackend
    judge: JudgeBackend

    @classmethod
    def single(cls, backend) -> "Backends":
        """One object serving all three roles (the usual mock arrangement)."""
        return cls(planner=backend, compat=backend, judge=backend)


@dataclass(frozen=True)
class BackendConfig:
    """Where the oracle calls go. ``chat`` requires an endpoint and a key."""

    kind: str = "mock"  # mock | chat
    base_url: str = ""
    api_key: str = ""
    agent_model: str = ""
    judge_model: str = ""
    compat_model: str = ""
    agent_temperature: float = 0.2
    judge_temperature: float = 0.0
    compat_temperature: float = 0.0
    max_concurrency: int = 4
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "chat"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "chat" and (not self.base_url or not self.api_key):
            raise ConfigError("chat backend requires CHAT_API_BASE and CHAT_API_KEY")

    @classmethod
    def from_env(cls, kind: str = "chat") -> "BackendConfig":
        if kind == "mock":
            return cls(kind="mock")
        return cls(
            kind="chat",
            base_url=os.environ.get("CHAT_API_BASE", ""),
            api_key=os.environ.get("CHAT_API_KEY", ""),
            agent_model=os.environ.get("AGENT_MODEL", ""),
            judge_model=os.environ.get("JUDGE_MODEL", ""),
            compat_model=os.environ.get("COMPAT_MODEL", ""),
        )
