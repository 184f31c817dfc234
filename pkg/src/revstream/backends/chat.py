"""Chat-completions backend.

Talks to any endpoint speaking the chat-completions message convention with
function/tool calling. Configuration comes entirely from the environment
(CHAT_API_BASE, CHAT_API_KEY, AGENT_MODEL, JUDGE_MODEL, COMPAT_MODEL);
prompts are versioned text assets next to this module.

Malformed model output is retried a bounded number of times and then raised
as a backend error - a run is marked failed rather than silently defaulted,
since a guessed verdict would corrupt the metrics downstream.
"""

from __future__ import annotations

import json
import threading
from importlib import resources

import httpx

from ..bench import Scenario
from ..core import EpistemicState, EventKind, Specification, Trace
from ..errors import BackendError
from ..policies import ExecutedAct
from ..world import WorldState
from .base import BackendConfig, PlannedStep


def _prompt(name: str) -> str:
    return resources.files("revstream.backends").joinpath(f"prompts/{name}").read_text()


def render_spec(spec: Specification) -> str:
    lines = [f"Initial request: {spec.initial_query}"]
    for c in spec.clauses:
        marker = "" if c.status == "active" else f" [{c.status}]"
        lines.append(f"- ({c.clause_id}){marker} {c.text}")
    return "\n".join(lines)


class ChatBackend:
    """Planner, compatibility check, and judge backed by a chat endpoint."""

    def __init__(
        self,
        config: BackendConfig,
        scenario: Scenario,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        if config.kind != "chat":
            raise BackendError("ChatBackend requires a chat backend config")
        self.config = config
        self.scenario = scenario
        self._client = httpx.Client(
            base_url=config.base_url,
            headers={"Authorization": f"Bearer {config.api_key}"},
            timeout=60.0,
            transport=transport,
        )
        self._semaphore = threading.Semaphore(config.max_concurrency)
        self.tokens_total = 0  # backend-reported usage, summed over all calls

    # -- wire ------------------------------------------------------------------

    def _complete(self, model: str, temperature: float, messages: list[dict],
                  tools: list[dict] | None = None) -> dict:
        body: dict = {"model": model, "temperature": temperature, "messages": messages}
        if tools:
            body["tools"] = tools
        with self._semaphore:
            response = self._client.post("/chat/completions", json=body)
        if response.status_code != 200:
            raise BackendError(f"chat endpoint returned {response.status_code}: {response.text[:200]}")
        try:
            parsed = response.json()
            self.tokens_total += int(parsed.get("usage", {}).get("total_tokens", 0))
            return parsed["choices"][0]["message"]
        except (KeyError, IndexError, ValueError, TypeError) as exc:
            raise BackendError(f"malformed chat response: {exc}") from exc

    def _tool_schemas(self) -> list[dict]:
        schemas = []
        for name in self.scenario.plan_toolset:
            tool = self.scenario.tool(name)
            schemas.append({
                "type": "function",
                "function": {
                    "name": tool.name,
                    "description": f"{tool.klass}-class tool writing {', '.join(tool.effect_tags) or 'no world keys'}",
                    "parameters": {
                        "type": "object",
                        "properties": {
                            key: {"type": "string"} for key in tool.effect_tags
                        },
                    },
                },
            })
        return schemas

    # -- roles -----------------------------------------------------------------

    def plan_next(
        self, epistemic: EpistemicState, world: WorldState, trace: Trace
    ) -> PlannedStep | None:
        system = _prompt("agent.txt").format(spec=render_spec(epistemic.spec))
        messages: list[dict] = [{"role": "system", "content": system}]
        visible = set(epistemic.context)
        for event in trace.events:
            if event.seq not in visible:
                continue
            if event.kind == EventKind.THOUGHT:
                messages.append({"role": "assistant", "content": str(event.payload.get("text", ""))})
            elif event.kind == EventKind.ACT:
                messages.append({
                    "role": "assistant",
                    "content": f"[tool call] {event.payload.get('tool')} "
                               f"{json.dumps(event.payload.get('values', {}), sort_keys=True)}",
                })
            elif event.kind == EventKind.OBS:
                messages.append({"role": "user", "content": f"[result] {event.payload.get('text', '')}"})
            elif event.kind == EventKind.INJ:
                messages.append({"role": "user", "content": f"[revision] {event.payload.get('text', '')}"})

        last_error = "no tool call"
        for _ in range(self.config.max_retries):
            message = self._complete(
                self.config.agent_model, self.config.agent_temperature, messages,
                tools=self._tool_schemas(),
            )
            calls = message.get("tool_calls") or []
            if calls:
                call = calls[0].get("function", {})
                name = call.get("name", "")
                if name in self.scenario.registry:
                    try:
                        args = json.loads(call.get("arguments") or "{}")
                    except ValueError:
                        last_error = "unparseable tool arguments"
                        continue
                    return PlannedStep(
                        thought=str(message.get("content") or ""),
                        tool=name,
                        values={k: str(v) for k, v in args.items()},
                    )
                last_error = f"unknown tool {name!r}"
                continue
            content = (message.get("content") or "").strip()
            if content.upper().startswith("DONE"):
                return None
            last_error = f"no tool call in: {content[:80]!r}"
        raise BackendError(f"planner produced no usable step after retries: {last_error}")

    def is_compatible(self, act: ExecutedAct, spec_new: Specification) -> bool:
        revision = spec_new.absorbed[-1].text if spec_new.absorbed else ""
        prompt = _prompt("compat.txt").format(
            spec=render_spec(spec_new),
            revision=revision,
            tool=act.tool,
            klass=act.klass,
            values=json.dumps(act.values, sort_keys=True),
        )
        for _ in range(self.config.max_retries):
            message = self._complete(
                self.config.compat_model, self.config.compat_temperature,
                [{"role": "user", "content": prompt}],
            )
            verdict = (message.get("content") or "").strip().upper()
            if "INCOMPATIBLE" in verdict:
                return False
            if "COMPATIBLE" in verdict:
                return True
        raise BackendError("compatibility verdict unparseable after retries")

    def judge_quality(self, world: WorldState, spec_truth: Specification) -> float:
        entries = world.entries()
        world_lines = [
            f"- {e.entry_id} [{e.kind}{'' if e.live else ', superseded'}] "
            f"{json.dumps(e.values, sort_keys=True)}"
            for e in sorted(entries.values(), key=lambda e: e.source_seq)
        ]
        unsat_lines = [f"- act {u.action_seq}: {u.note}" for u in world.unsatisfiable]
        prompt = _prompt("judge.txt").format(
            spec=render_spec(spec_truth),
            outcome="run terminated; judge the world entries listed below",
            world="\n".join(world_lines) or "(none)",
            unsatisfiable="\n".join(unsat_lines) or "(none)",
        )
        scores = []
        for _ in range(3):
            scores.append(self._score_once(prompt))
        return sum(scores) / len(scores)

    def _score_once(self, prompt: str) -> float:
        for _ in range(self.config.max_retries):
            message = self._complete(
                self.config.judge_model, self.config.judge_temperature,
                [{"role": "user", "content": prompt}],
            )
            content = message.get("content") or ""
            for line in content.splitlines():
                line = line.strip()
                if line.upper().startswith("SCORE:"):
                    try:
                        value = float(line.split(":", 1)[1].strip())
                    except ValueError:
                        break
                    if 1.0 <= value <= 5.0:
                        return value
        raise BackendError("judge score unparseable after retries")

    def close(self) -> None:
        self._client.close()
