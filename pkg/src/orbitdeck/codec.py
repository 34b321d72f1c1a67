"""Prompt assembly and model-response parsing for the operator agents.

Builds chat-completions-style message lists (system / few-shot / user,
with optional PNG image parts), defines the ``perform_action`` tool
schema, and parses model output -- either a structured tool-call object
or the textual surface form

    perform_action(Forward Throttle: Forward, Right Throttle: Right,
                   Down Throttle: Up)

back into a :class:`~orbitdeck.actions.DiscreteAction`.  Free text is
scanned for the LAST call occurrence so reasoning preambles that mention
hypothetical actions do not confuse the parser.
"""

from __future__ import annotations

import base64
import copy
import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .actions import DURATION_DEFAULT, DURATION_MAX, DURATION_MIN, DiscreteAction
from .errors import NoExamplesError, UnknownEnumValueError, UnparseableResponseError
from .navball import DashboardImage, marker_phrase
from .telemetry import Observation

COT_CUE = "Let's think step by step."
REACT_CUE = (
    'Respond in two sections: "Reasoning:" with your analysis, then '
    '"Action:" containing exactly one perform_action call.'
)

MODES = ("zero_shot", "few_shot", "cot", "react")

TOOL_SCHEMA: dict = {
    "name": "perform_action",
    "description": (
        "Fire the spacecraft thrusters. Each throttle is a full burn along "
        "one vessel axis; omit or pass None for no thrust on that axis."
    ),
    "parameters": {
        "type": "object",
        "properties": {
            "forward_throttle": {
                "type": "string",
                "enum": ["Forward", "Backward", "None"],
            },
            "right_throttle": {
                "type": "string",
                "enum": ["Right", "Left", "None"],
            },
            "down_throttle": {
                "type": "string",
                "enum": ["Down", "Up", "None"],
            },
            "duration": {
                "type": "number",
                "description": f"Burn seconds in [{DURATION_MIN}, {DURATION_MAX}]; "
                f"defaults to {DURATION_DEFAULT}.",
            },
        },
        "required": [],
    },
}


def tool_schema() -> dict:
    """A fresh copy of the perform_action tool schema."""
    return copy.deepcopy(TOOL_SCHEMA)


@dataclass
class Message:
    """One chat message: a role plus ordered text/image parts."""

    role: str  # system | user | assistant | tool
    parts: list[dict]

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant", "tool"):
            raise ValueError(f"unknown role {self.role!r}")
        if not self.parts:
            raise ValueError("message needs at least one part")

    @classmethod
    def text(cls, role: str, text: str) -> "Message":
        return cls(role, [{"type": "text", "text": text}])

    def to_wire(self) -> dict:
        return {"role": self.role, "content": [dict(p) for p in self.parts]}


def _image_part(image) -> dict:
    png = image.to_png() if isinstance(image, DashboardImage) else bytes(image)
    return {
        "type": "image",
        "base64": base64.b64encode(png).decode("ascii"),
        "media_type": "image/png",
    }


def serialize_messages(messages: list[Message]) -> str:
    """Deterministic JSON document for a message list."""
    return json.dumps([m.to_wire() for m in messages], sort_keys=True)


@dataclass
class FewShotExample:
    """A worked (image, input, reasoning, output) demonstration."""

    input_text: str
    reasoning_text: str
    output_call_text: str
    image: bytes | None = None

    def __post_init__(self):
        # Self-validating fixture: the demonstrated output must parse.
        parse_response(self.output_call_text)


def telemetry_line(
    obs: Observation, phrase: str, target_label: str = "Lady"
) -> str:
    """Textual telemetry shown to the agent alongside the dashboard frame.

    Clauses are joined with "; " and the line ends with a single period,
    e.g. "Current distance to Lady: 2.6 kilometers; Prograde far in the
    bottom left side of the navball; Current speed: 8.7 m/s."
    """
    clauses = [
        f"Current distance to {target_label}: {obs.distance / 1000.0:.1f} kilometers",
        phrase,
        f"Current speed: {obs.speed:.1f} m/s",
    ]
    guard = obs.guard_distance
    if guard is not None:
        clauses.append(f"Current distance to Guard: {guard / 1000.0:.1f} kilometers")
    return "; ".join(clauses) + "."


def build_messages(
    system_prompt: str,
    fewshots: list[FewShotExample],
    obs: Observation,
    image,
    mode: str = "few_shot",
    target_label: str = "Lady",
) -> list[Message]:
    """Assemble the full message list for one decision.

    Order: system, then per example a (user, assistant) pair, then the
    current user turn with image and telemetry.  ``cot`` appends the
    step-by-step cue to the user text, ``react`` asks for Reasoning:/
    Action: sections, ``zero_shot`` drops the examples entirely.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "few_shot" and not fewshots:
        raise NoExamplesError("few_shot mode requires at least one example")

    messages = [Message.text("system", system_prompt)]
    if mode != "zero_shot":
        for ex in fewshots:
            parts = []
            if ex.image is not None:
                parts.append(_image_part(ex.image))
            parts.append({"type": "text", "text": ex.input_text})
            messages.append(Message("user", parts))
            messages.append(
                Message.text("assistant", f"{ex.reasoning_text}\n{ex.output_call_text}")
            )

    phrase = marker_phrase(obs.prograde)
    user_text = telemetry_line(obs, phrase, target_label)
    if mode == "cot":
        user_text = f"{user_text}\n{COT_CUE}"
    elif mode == "react":
        user_text = f"{user_text}\n{REACT_CUE}"
    parts = []
    if image is not None:
        parts.append(_image_part(image))
    parts.append({"type": "text", "text": user_text})
    messages.append(Message("user", parts))
    return messages


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------

_FORWARD_VALUES = {"forward": 1, "backward": -1, "none": 0}
_RIGHT_VALUES = {"right": 1, "left": -1, "none": 0}
_DOWN_VALUES = {"up": 1, "down": -1, "none": 0}

_CALL_RE = re.compile(r"perform_action\s*\(([^()]*)\)", re.IGNORECASE)


def _parse_duration(raw) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise UnparseableResponseError(f"invalid duration value {raw!r}") from None
    # Parser tolerance: out-of-range durations are clamped into bounds.
    return min(DURATION_MAX, max(DURATION_MIN, value))


def _axis_value(table: dict[str, int], raw, param: str) -> int:
    key = str(raw).strip().lower()
    if key not in table:
        raise UnknownEnumValueError(f"{param} has no value {raw!r}")
    return table[key]


def _action_from_params(params: dict, default_duration: float) -> DiscreteAction:
    forward = right = up = 0
    duration = default_duration
    for key, raw in params.items():
        norm = re.sub(r"[\s_]+", "_", str(key).strip().lower())
        if norm == "forward_throttle":
            forward = _axis_value(_FORWARD_VALUES, raw, "forward_throttle")
        elif norm == "right_throttle":
            right = _axis_value(_RIGHT_VALUES, raw, "right_throttle")
        elif norm == "down_throttle":
            up = _axis_value(_DOWN_VALUES, raw, "down_throttle")
        elif norm == "duration":
            duration = _parse_duration(raw)
        # Unknown parameters are ignored.
    return DiscreteAction(forward=forward, right=right, up=up, duration=duration)


def _parse_call_text(arg_text: str, default_duration: float) -> DiscreteAction:
    params = {}
    for chunk in arg_text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        m = re.match(r"^([A-Za-z_ ]+?)\s*[:=]\s*(.+)$", chunk)
        if not m:
            raise UnparseableResponseError(f"malformed call argument {chunk!r}")
        params[m.group(1)] = m.group(2).strip()
    return _action_from_params(params, default_duration)


def _parse_tool_object(doc: dict, default_duration: float) -> DiscreteAction:
    name = doc.get("function") or doc.get("name")
    if name != "perform_action":
        raise UnparseableResponseError(f"unknown function {name!r}")
    params = doc.get("parameters", doc.get("arguments", {}))
    if isinstance(params, str):
        try:
            params = json.loads(params)
        except json.JSONDecodeError:
            raise UnparseableResponseError("tool-call arguments are not JSON") from None
    if not isinstance(params, dict):
        raise UnparseableResponseError("tool-call parameters must be an object")
    return _action_from_params(params, default_duration)


def parse_response(
    raw, default_duration: float = DURATION_DEFAULT
) -> DiscreteAction:
    """Recover the commanded action from a model response.

    ``raw`` may be a structured tool-call object (dict), a JSON document
    encoding one, or free text containing the perform_action surface form
    (the last occurrence wins).  Keys and enum values match
    case-insensitively; missing parameters mean no thrust on that axis and
    the default burn duration.

    Raises UnparseableResponseError when no call is recognizable and
    UnknownEnumValueError when a parameter value is outside its
    vocabulary, so callers can issue targeted corrective retries.
    """
    if isinstance(raw, dict):
        return _parse_tool_object(raw, default_duration)
    if not isinstance(raw, str):
        raise UnparseableResponseError(f"unsupported response type {type(raw)!r}")

    text = raw.strip()
    if text.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError:
            doc = None
        if isinstance(doc, dict) and ("function" in doc or "name" in doc):
            return _parse_tool_object(doc, default_duration)

    matches = list(_CALL_RE.finditer(raw))
    if not matches:
        raise UnparseableResponseError("no perform_action call found in response")
    return _parse_call_text(matches[-1].group(1), default_duration)


# ---------------------------------------------------------------------------
# Packaged prompt assets
# ---------------------------------------------------------------------------

def default_system_prompt() -> str:
    """The packaged operator system prompt."""
    return (
        resources.files("orbitdeck.assets").joinpath("system_prompt.txt").read_text()
    )


def load_fewshot_examples(render_images: bool = True) -> list[FewShotExample]:
    """Packaged few-shot demonstrations, with images rendered on demand."""
    from . import navball  # local import: rendering is optional
    from .dynamics import vec3

    raw = json.loads(
        resources.files("orbitdeck.assets").joinpath("fewshots.json").read_text()
    )
    examples = []
    for entry in raw:
        image = None
        if render_images and "observation" in entry:
            od = entry["observation"]
            obs = Observation(
                time=od["time"],
                fuel=od["fuel"],
                rel_position=vec3(*od["rel_position"]),
                rel_velocity=vec3(*od["rel_velocity"]),
                prograde=vec3(*od["prograde"]) if od.get("prograde") else None,
            )
            image = navball.render_dashboard(obs).to_png()
        examples.append(
            FewShotExample(
                input_text=entry["input_text"],
                reasoning_text=entry["reasoning_text"],
                output_call_text=entry["output_call_text"],
                image=image,
            )
        )
    return examples
