"""Agents and the synchronized episode loop.

The loop is strictly sequential: observe -> render dashboard -> decide ->
execute, and the next frame is only produced after the previous action's
full duration has been simulated.  Decision latency is wall clock from
request start to parsed action; scripted agents report exactly 0 so their
episode results are bit-reproducible.

Remote failures never abort an episode silently: when retries are
exhausted the loop records a flagged zero action and carries on.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from itertools import cycle

import numpy as np
import requests

from .actions import DURATION_DEFAULT, DiscreteAction
from .codec import (
    Message,
    build_messages,
    default_system_prompt,
    load_fewshot_examples,
    parse_response,
    serialize_messages,
    tool_schema,
)
from .errors import (
    ExhaustedRetriesError,
    HttpStatusError,
    RemoteError,
    RemoteTimeoutError,
    ResponseParseError,
    TransportError,
)
from .navball import RenderConfig, render_dashboard
from .scenarios import Game, ScenarioSpec, init_scenario
from .telemetry import Observation, ScoreLedger
from .telemetry import score as ledger_score


@dataclass
class AgentDecision:
    """One decision: the action plus how it was obtained."""

    action: DiscreteAction
    latency_ms: float = 0.0
    raw_response: str = ""
    parse_retries: int = 0
    fault: str | None = None

    def summary(self) -> dict:
        return {
            "action": {
                "forward": self.action.forward,
                "right": self.action.right,
                "up": self.action.up,
                "duration": self.action.duration,
            },
            "latency_ms": self.latency_ms,
            "parse_retries": self.parse_retries,
            "fault": self.fault,
        }


class NaiveAgent:
    """Constant full forward burn, ignoring the observation."""

    name = "naive"

    def __init__(self, duration: float = DURATION_DEFAULT):
        self._action = DiscreteAction(forward=1, duration=duration)

    def decide(self, obs: Observation, image=None) -> AgentDecision:
        return AgentDecision(action=self._action)


class PursuitAgent:
    """PD pursuit baseline quantized onto the trinary throttles.

    Desired vessel-frame acceleration is kp*rel_position + kd*rel_velocity
    (both target-minus-self); each axis becomes a full burn of its sign,
    with a deadband so the agent coasts near balance.
    """

    name = "pursuit"

    def __init__(
        self,
        kp: float = 0.002,
        kd: float = 0.1,
        max_accel: float = 0.5,
        deadband_frac: float = 0.05,
        duration: float = DURATION_DEFAULT,
    ):
        self.kp = kp
        self.kd = kd
        self.deadband = deadband_frac * max_accel
        self.duration = duration

    def decide(self, obs: Observation, image=None) -> AgentDecision:
        desired = self.kp * obs.rel_position + self.kd * obs.rel_velocity

        def quantize(component: float) -> int:
            if abs(component) < self.deadband:
                return 0
            return 1 if component > 0 else -1

        action = DiscreteAction(
            forward=quantize(desired[1]),
            right=quantize(desired[0]),
            up=quantize(desired[2]),
            duration=self.duration,
        )
        return AgentDecision(action=action)


class MockVlmAgent:
    """Deterministic stand-in for a vision model.

    Replays a scripted sequence of response texts through the full codec
    path: every decision builds the real message list, then the next
    scripted response is parsed exactly like a remote reply would be.
    Unparseable entries consume parse retries just like the remote agent.
    """

    name = "mock"

    def __init__(
        self,
        script: list[str],
        mode: str = "few_shot",
        system_prompt: str | None = None,
        fewshots=None,
        max_parse_retries: int = 2,
        target_label: str = "Lady",
    ):
        if not script:
            raise ValueError("mock agent needs a non-empty response script")
        self._responses = cycle(script)
        self.mode = mode
        self.system_prompt = system_prompt or default_system_prompt()
        self.fewshots = (
            fewshots if fewshots is not None else load_fewshot_examples(render_images=False)
        )
        self.max_parse_retries = max_parse_retries
        self.target_label = target_label

    def decide(self, obs: Observation, image=None) -> AgentDecision:
        messages = build_messages(
            self.system_prompt, self.fewshots, obs, image, self.mode, self.target_label
        )
        serialize_messages(messages)  # exercise the wire encoding
        last_error = None
        for attempt in range(self.max_parse_retries + 1):
            raw = next(self._responses)
            try:
                action = parse_response(raw)
            except ResponseParseError as err:
                last_error = err
                continue
            return AgentDecision(
                action=action, raw_response=raw, parse_retries=attempt
            )
        return AgentDecision(
            action=DiscreteAction(),
            raw_response="",
            parse_retries=self.max_parse_retries,
            fault=f"parse retries exhausted: {last_error}",
        )


@dataclass(frozen=True)
class RemoteConfig:
    """Where and how to reach a hosted model.

    The API key is read from the named environment variable at request
    time and never stored in results.
    """

    endpoint: str
    model: str = ""
    api_key_env: str = "ORBITDECK_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0
    mode: str = "few_shot"

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "RemoteConfig":
        return cls(**doc)


def remote_invoke(
    config: RemoteConfig, messages: list[Message], tools: list[dict] | None = None
) -> tuple[str, float]:
    """POST one chat-completions-style request; return (body, latency ms).

    Transport failures (timeout, connection) are retried up to
    ``config.max_retries`` times; non-2xx statuses raise immediately.
    Latency covers the whole call including retries.
    """
    payload = {
        "model": config.model,
        "temperature": config.temperature,
        "messages": [m.to_wire() for m in messages],
    }
    if tools:
        payload["tools"] = [{"type": "function", "function": t} for t in tools]
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    start = time.perf_counter()
    last_error: RemoteError | None = None
    for _ in range(config.max_retries + 1):
        try:
            resp = requests.post(
                config.endpoint,
                data=json.dumps(payload),
                headers=headers,
                timeout=config.timeout,
            )
        except requests.Timeout:
            last_error = RemoteTimeoutError(
                f"no answer from {config.endpoint} within {config.timeout}s"
            )
            continue
        except requests.RequestException as err:
            last_error = TransportError(str(err))
            continue
        latency_ms = (time.perf_counter() - start) * 1000.0
        if not 200 <= resp.status_code < 300:
            raise HttpStatusError(resp.status_code, resp.text[:200])
        return resp.text, latency_ms
    raise last_error if last_error is not None else TransportError("request failed")


def extract_response_content(body: str):
    """Pull the model's reply out of a chat-completions response body.

    Returns either plain text or a tool-call dict for parse_response.
    Bodies that are not JSON (stub servers answering with bare text) pass
    through unchanged.
    """
    try:
        doc = json.loads(body)
    except json.JSONDecodeError:
        return body
    if not isinstance(doc, dict):
        return body
    choices = doc.get("choices")
    if isinstance(choices, list) and choices:
        message = choices[0].get("message", {})
        tool_calls = message.get("tool_calls")
        if tool_calls:
            fn = tool_calls[0].get("function", {})
            return {
                "function": fn.get("name"),
                "parameters": fn.get("arguments", {}),
            }
        content = message.get("content")
        if content is not None:
            return content
        return body
    if "function" in doc or "name" in doc:
        return doc
    return body


_CORRECTIVE_TEMPLATE = (
    "Your last response could not be used: {error}. "
    "Reply with exactly one bare call in the form "
    "perform_action(Forward Throttle: ..., Right Throttle: ..., "
    "Down Throttle: ...). Tool schema: {schema}"
)


class RemoteVlmAgent:
    """Vision agent backed by an HTTP chat endpoint.

    Each decision builds the message list, posts it, and parses the reply.
    On a parse failure the agent appends the failing reply plus a
    corrective instruction (parser error and tool schema) and asks again,
    up to ``config.max_retries`` times.  Remote or retry exhaustion yields
    a flagged zero action so the episode continues.
    """

    name = "remote"

    def __init__(
        self,
        config: RemoteConfig,
        system_prompt: str | None = None,
        fewshots=None,
        target_label: str = "Lady",
    ):
        self.config = config
        self.system_prompt = system_prompt or default_system_prompt()
        self.fewshots = (
            fewshots if fewshots is not None else load_fewshot_examples()
        )
        self.target_label = target_label

    def decide(self, obs: Observation, image=None) -> AgentDecision:
        start = time.perf_counter()
        messages = build_messages(
            self.system_prompt,
            self.fewshots,
            obs,
            image,
            self.config.mode,
            self.target_label,
        )
        tools = [tool_schema()]
        last_content = ""
        for attempt in range(self.config.max_retries + 1):
            try:
                body, _ = remote_invoke(self.config, messages, tools)
            except RemoteError as err:
                return AgentDecision(
                    action=DiscreteAction(),
                    latency_ms=(time.perf_counter() - start) * 1000.0,
                    raw_response=last_content,
                    parse_retries=attempt,
                    fault=f"{type(err).__name__}: {err}",
                )
            content = extract_response_content(body)
            last_content = content if isinstance(content, str) else json.dumps(content)
            try:
                action = parse_response(content)
            except ResponseParseError as err:
                messages = messages + [
                    Message.text("assistant", last_content),
                    Message.text(
                        "user",
                        _CORRECTIVE_TEMPLATE.format(
                            error=err, schema=json.dumps(tool_schema())
                        ),
                    ),
                ]
                continue
            return AgentDecision(
                action=action,
                latency_ms=(time.perf_counter() - start) * 1000.0,
                raw_response=last_content,
                parse_retries=attempt,
            )
        return AgentDecision(
            action=DiscreteAction(),
            latency_ms=(time.perf_counter() - start) * 1000.0,
            raw_response=last_content,
            parse_retries=self.config.max_retries,
            fault="ExhaustedRetriesError: no parseable action",
        )


@dataclass
class EpisodeResult:
    """Outcome of one episode, JSON-serializable for the report tooling."""

    scenario: str
    seed: int
    status: str  # completed | surface_impact | aborted
    clock: float
    ledger: ScoreLedger
    score: float | None
    decisions: list[dict] = field(default_factory=list)
    agent: str = ""
    schema_version: int = 1

    @property
    def latencies_ms(self) -> list[float]:
        return [d["latency_ms"] for d in self.decisions]

    @property
    def fault_count(self) -> int:
        return sum(1 for d in self.decisions if d.get("fault"))

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "agent": self.agent,
            "seed": self.seed,
            "status": self.status,
            "clock": self.clock,
            "dm_lb": self.ledger.dm_lb,
            "dm_bg": self.ledger.dm_bg,
            "score": self.score,
            "decisions": self.decisions,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EpisodeResult":
        ledger = ScoreLedger(dm_lb=doc["dm_lb"], dm_bg=doc.get("dm_bg"))
        return cls(
            scenario=doc["scenario"],
            seed=doc["seed"],
            status=doc["status"],
            clock=doc["clock"],
            ledger=ledger,
            score=doc.get("score"),
            decisions=list(doc.get("decisions", [])),
            agent=doc.get("agent", ""),
            schema_version=doc.get("schema_version", 1),
        )


def run_episode(
    spec: ScenarioSpec,
    agent,
    render: bool = True,
    render_config: RenderConfig | None = None,
) -> EpisodeResult:
    """Run one full episode with the strict observe/render/decide/step loop."""
    game = init_scenario(spec)
    if render_config is None:
        target = "Lady" if spec.family == "LBG" else "Evader"
        render_config = RenderConfig(
            scenario_id=spec.scenario_id, target_label=target
        )
    decisions: list[dict] = []
    obs = game.observe()
    while not game.done:
        image = render_dashboard(obs, render_config) if render else None
        decision = agent.decide(obs, image)
        obs, _ = game.step(decision.action)
        decisions.append(decision.summary())

    final_score = None
    if game.ledger.tracks_guard and math.isfinite(game.ledger.dm_lb):
        final_score = ledger_score(game.ledger, spec.score_params)
    return EpisodeResult(
        scenario=spec.scenario_id,
        seed=spec.rng_seed,
        status=game.status,
        clock=game.clock,
        ledger=game.ledger,
        score=final_score,
        decisions=decisions,
        agent=getattr(agent, "name", type(agent).__name__),
    )
