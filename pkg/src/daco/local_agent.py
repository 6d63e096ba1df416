"""Local acting agent: location descriptions and action decisions.

Decisions come back as a final "Action:" line naming an option letter, Stop,
or Replan. Replan is only accepted while a global plan is on the table; in
fallback mode the prompt drops the plan section and the replan tip entirely.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .backends import ChatMessage, CompletionRequest, ImagePart, TextPart, complete
from .errors import ParseError
from .global_agent import GlobalPlan, serialize_plan
from .prompts import PromptTemplates, render
from .scene import ActionSpace, ViewDescriptor, orientation_caption

_ACTION_LINE = re.compile(r"(?i)[*_`'\"]*action[*_`'\"]*\s*:\s*(.*)")
_THOUGHT_LINE = re.compile(r"(?i)[*_`'\"]*thought[*_`'\"]*\s*:\s*(.*)")
_TOKEN_TRIM = " \t\r\n\"'`*_.,;:!()[]{}"

_REPLAN_TIP = (
    "\n3. If the global plan seems incorrect or lacks detail, feel free to trigger a "
    "`replan' so your partner can refine the objectives."
)
_REPLAN_CHOICE = ', or "Replan"'


@dataclass(frozen=True)
class LocalDecision:
    kind: str  # Move | Stop | Replan
    option_label: str | None = None
    thought: str = ""


@dataclass(frozen=True)
class LocationDescription:
    text: str


def strip_markdown_fences(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-zA-Z0-9_-]*\s*", "", text)
        text = re.sub(r"```\s*$", "", text)
    return text.strip()


def parse_action_response(text: str, space: ActionSpace, replan_allowed: bool) -> LocalDecision:
    """Parse a decision from the last "Action:" line of a model response."""
    matches = _ACTION_LINE.findall(text or "")
    if not matches:
        raise ParseError('no "Action:" line in the response')
    token = matches[-1].strip().strip(_TOKEN_TRIM)
    thought_match = _THOUGHT_LINE.search(text)
    thought = thought_match.group(1).strip().strip(_TOKEN_TRIM) if thought_match else ""

    lowered = token.lower()
    if lowered.startswith("option"):
        token = token[len("option"):].strip().strip(_TOKEN_TRIM)
        lowered = token.lower()
    if lowered == "stop":
        return LocalDecision(kind="Stop", thought=thought)
    if lowered == "replan":
        if not replan_allowed:
            raise ParseError('"replan" answered while replanning is not available')
        return LocalDecision(kind="Replan", thought=thought)
    if len(token) == 1 and token.isalpha():
        label = token.upper()
        if space.option(label) is None:
            raise ParseError(f"action label {label!r} is not in the presented option space")
        return LocalDecision(kind="Move", option_label=label, thought=thought)
    raise ParseError(f"unrecognized action token {token!r}")


def _direction_phrase(relative_bearing: float) -> str:
    b = relative_bearing % 360.0
    if b < 45.0 or b >= 315.0:
        return "go forward"
    if b < 135.0:
        return "turn right and go"
    if b < 225.0:
        return "turn around and go"
    return "turn left and go"


def render_options(space: ActionSpace) -> str:
    lines = [
        f"{option.label}. {_direction_phrase(option.relative_bearing)} to {option.target}"
        for option in space.options
    ]
    lines.append("stop. end the navigation here if the task is complete")
    return "\n".join(lines)


class LocalAgent:
    """Builds the action and location prompts. Stateless per call."""

    def __init__(self, templates: PromptTemplates | None = None):
        self.templates = templates or PromptTemplates.load()

    def describe_location(self, backend, frontal: list[ViewDescriptor]) -> LocationDescription:
        if len(frontal) != 12 or any(v.caption is None for v in frontal):
            raise ValueError("describe_location requires exactly 12 captioned views")
        parts: list = [TextPart(self.templates.locate)]
        for view in frontal:
            parts.append(TextPart(view.caption))
            parts.append(ImagePart(path=view.image_ref, mime="image/jpeg"))
        request = CompletionRequest(
            messages=[ChatMessage(role="user", parts=parts)], call_kind="describe"
        )
        result = complete(backend, request)
        text = strip_markdown_fences(result.text)
        if not text:
            raise ParseError("empty location description")
        return LocationDescription(text=text)

    def build_action_prompt(
        self,
        instruction: str,
        plan: GlobalPlan | None,
        history_text: str,
        space: ActionSpace,
        pano: list[ViewDescriptor],
        map_text: str = "None",
        replan_allowed: bool = True,
    ) -> CompletionRequest:
        fallback = plan is None
        values = {
            "INSTRUCTION": instruction,
            "HISTORY": history_text,
            "MAP": map_text,
            "OPTIONS": render_options(space),
        }
        if fallback:
            text = render(self.templates.action_fallback, **values)
        else:
            text = render(
                self.templates.action,
                PLAN=serialize_plan(plan),
                REPLAN_TIP=_REPLAN_TIP if replan_allowed else "",
                REPLAN_CHOICE=_REPLAN_CHOICE if replan_allowed else "",
                **values,
            )
        parts: list = [TextPart(text)]
        frontal = sorted((v for v in pano if v.elevation == 0), key=lambda v: v.azimuth_index)
        for view in frontal:
            caption = view.caption or (
                f"Image {view.azimuth_index + 1} ({orientation_caption(view.azimuth_index * 30.0)})"
            )
            parts.append(TextPart(caption))
            parts.append(ImagePart(path=view.image_ref, mime="image/jpeg"))
        if frontal:
            for option in space.options:
                facing = frontal[int(math.floor(option.relative_bearing / 30.0 + 0.5)) % 12]
                parts.append(TextPart(f"Option {option.label} view:"))
                parts.append(ImagePart(path=facing.image_ref, mime="image/jpeg"))
        return CompletionRequest(messages=[ChatMessage(role="user", parts=parts)], call_kind="action")

    def decide_action(
        self,
        backend,
        instruction: str,
        plan: GlobalPlan | None,
        history_text: str,
        space: ActionSpace,
        pano: list[ViewDescriptor],
        map_text: str = "None",
        replan_allowed: bool = True,
    ) -> LocalDecision:
        replan_allowed = replan_allowed and plan is not None
        request = self.build_action_prompt(
            instruction, plan, history_text, space, pano, map_text=map_text, replan_allowed=replan_allowed
        )
        result = complete(backend, request)
        try:
            return parse_action_response(result.text, space, replan_allowed)
        except ParseError:
            reminder = "Reminder: end your answer with one line formatted exactly as 'Action: <option letter>'"
            if replan_allowed:
                reminder += ", 'Action: Stop', or 'Action: Replan'."
            else:
                reminder += " or 'Action: Stop'."
            retry = CompletionRequest(
                messages=list(request.messages) + [ChatMessage(role="user", parts=[TextPart(reminder)])],
                temperature=request.temperature,
                max_tokens=request.max_tokens,
                call_kind=request.call_kind,
            )
            result = complete(backend, retry)
            return parse_action_response(result.text, space, replan_allowed)
