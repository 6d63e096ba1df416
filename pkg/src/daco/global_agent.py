"""Global planning agent: map-grounded plan and replan prompts plus response parsing.

The planner sees the instruction, the marked top-down maps, the previous plan
and the latest location description, and answers with a JSON object holding
"Thought" and "New Plan". Replanning drops the previous plan entirely and
starts from an extracted target location instead.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .backends import ChatMessage, CompletionRequest, ImagePart, TextPart, complete, serialize_request
from .errors import BackendError, ParseError, ProtocolError
from .prompts import PromptTemplates, render
from .topdown import MarkedMapSet

REVERIE_NOTE = (
    " (Instruction is a high-level command that directs an agent to complete a certain task "
    "at a specific location. It is worth noting that the agent does not need to complete the "
    "task itself; you only need to provide a navigation path to the target location.)"
)

_FORMAT_REMINDER = (
    '\n\nReminder: respond with raw JSON containing exactly two fields, "Thought" and "New Plan".'
)

_NUMBERED_MARKER = re.compile(r"(?:(?<=\s)|^)\d{1,3}[.)]\s+")
_FENCE = re.compile(r"```(?:[a-zA-Z0-9_-]+)?\s*(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class GlobalPlan:
    subgoals: tuple[str, ...]
    thought: str
    origin: str  # initial | dynamic-update | replan
    nonconforming_stop: bool = False


@dataclass(frozen=True)
class ReplanContext:
    target: str
    marked_maps: MarkedMapSet
    local_obs: str

    def __post_init__(self):
        if not self.target.strip():
            raise ValueError("replan context requires a non-empty target")


def serialize_plan(plan: GlobalPlan) -> str:
    return "\n".join(f"{i}. {goal}" for i, goal in enumerate(plan.subgoals, start=1))


def split_subgoals(text: str) -> list[str]:
    """Split plan text into subgoals: numbered markers first, newlines second,
    whole string last."""
    text = text.strip()
    if not text:
        return []
    markers = list(_NUMBERED_MARKER.finditer(text))
    if markers and (len(markers) >= 2 or markers[0].start() == 0):
        pieces = []
        for i, match in enumerate(markers):
            end = markers[i + 1].start() if i + 1 < len(markers) else len(text)
            pieces.append(text[match.end():end].strip())
        prefix = text[: markers[0].start()].strip()
        if prefix:
            pieces.insert(0, prefix)
        return [p for p in pieces if p]
    lines = [line.strip(" \t-*") for line in text.splitlines()]
    lines = [line for line in lines if line]
    if len(lines) > 1:
        return lines
    return [text]


def _strip_fences(text: str) -> str:
    match = _FENCE.search(text)
    return match.group(1).strip() if match else text.strip()


def _json_candidates(text: str):
    yield text
    yield _strip_fences(text)
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        yield text[start : end + 1]


def parse_plan_response(text: str) -> tuple[str, list[str]]:
    """Recover (thought, subgoals) from strict JSON, fenced JSON, or labeled text."""
    for candidate in _json_candidates(text):
        try:
            payload = json.loads(candidate)
        except (json.JSONDecodeError, TypeError):
            continue
        if not isinstance(payload, dict):
            continue
        lowered = {str(k).strip().lower(): v for k, v in payload.items()}
        plan_value = lowered.get("new plan", lowered.get("new_plan"))
        thought = str(lowered.get("thought", "") or "")
        if plan_value is None:
            raise ParseError('plan response is missing the "New Plan" field')
        if isinstance(plan_value, list):
            subgoals = [str(g).strip() for g in plan_value if str(g).strip()]
        else:
            subgoals = split_subgoals(str(plan_value))
        if not subgoals:
            raise ParseError("plan response contains an empty plan")
        return thought, subgoals

    # labeled plain text
    plan_match = re.search(r"(?is)new\s*plan\s*:\s*(.*)$", text)
    if plan_match:
        thought_match = re.search(r"(?is)thought\s*:\s*(.*?)(?=new\s*plan\s*:)", text)
        thought = thought_match.group(1).strip() if thought_match else ""
        subgoals = split_subgoals(plan_match.group(1))
        if not subgoals:
            raise ParseError("plan response contains an empty plan")
        return thought, subgoals
    raise ParseError('plan response has neither a "Thought" nor a "New Plan" field')


def _with_reminder(request: CompletionRequest) -> CompletionRequest:
    messages = list(request.messages)
    messages.append(ChatMessage(role="user", parts=[TextPart(_FORMAT_REMINDER.strip())]))
    return CompletionRequest(
        messages=messages,
        temperature=request.temperature,
        max_tokens=request.max_tokens,
        call_kind=request.call_kind,
    )


class GlobalAgent:
    """Builds planner requests and turns responses into plans. Stateless per call."""

    def __init__(self, templates: PromptTemplates | None = None, dataset_mode: str = "r2r"):
        self.templates = templates or PromptTemplates.load()
        self.dataset_mode = dataset_mode.lower()

    def _map_parts(self, marked_maps: MarkedMapSet) -> list[ImagePart]:
        return [ImagePart(data=data, mime="image/png") for _floor, data in marked_maps.png_bytes()]

    def build_planning_prompt(
        self,
        instruction: str,
        marked_maps: MarkedMapSet,
        prev_plan: GlobalPlan | None,
        local_obs: str,
    ) -> CompletionRequest:
        text = render(
            self.templates.planning,
            INSTRUCTION=instruction,
            LOCAL_OBS=local_obs if local_obs else "None",
            PREV_PLAN=serialize_plan(prev_plan) if prev_plan is not None else "None",
            REVERIE_NOTE=REVERIE_NOTE if self.dataset_mode == "reverie" else "",
        )
        parts: list = [TextPart(text)]
        parts.extend(self._map_parts(marked_maps))
        return CompletionRequest(messages=[ChatMessage(role="user", parts=parts)], call_kind="planning")

    def develop_plan(
        self,
        backend,
        instruction: str,
        marked_maps: MarkedMapSet,
        prev_plan: GlobalPlan | None,
        local_obs: str,
    ) -> GlobalPlan:
        request = self.build_planning_prompt(instruction, marked_maps, prev_plan, local_obs)
        thought, subgoals = self._ask(backend, request)
        origin = "initial" if prev_plan is None else "dynamic-update"
        return GlobalPlan(subgoals=tuple(subgoals), thought=thought, origin=origin)

    def build_replan_prompt(self, ctx: ReplanContext) -> CompletionRequest:
        text = render(
            self.templates.replan,
            TARGET=ctx.target,
            LOCAL_OBS=ctx.local_obs if ctx.local_obs else "None",
        )
        parts: list = [TextPart(text)]
        parts.extend(self._map_parts(ctx.marked_maps))
        return CompletionRequest(messages=[ChatMessage(role="user", parts=parts)], call_kind="replan")

    def replan(self, backend, ctx: ReplanContext, forbidden_text: str | None = None) -> GlobalPlan:
        """Plan from scratch. `forbidden_text` is the serialized prior plan; the
        built request is checked to contain no trace of it."""
        request = self.build_replan_prompt(ctx)
        if forbidden_text and forbidden_text in serialize_request(request):
            raise ProtocolError("previous plan text leaked into a replan request")
        thought, subgoals = self._ask(backend, request)
        nonconforming = "stop" not in subgoals[-1].lower()
        return GlobalPlan(
            subgoals=tuple(subgoals),
            thought=thought,
            origin="replan",
            nonconforming_stop=nonconforming,
        )

    def extract_target(self, backend, instruction: str) -> str:
        """Pull the goal location out of the instruction; total by fallback."""
        if not instruction:
            raise ValueError("instruction must be non-empty")
        request = CompletionRequest(
            messages=[
                ChatMessage(
                    role="user",
                    parts=[TextPart(render(self.templates.target, INSTRUCTION=instruction))],
                )
            ],
            call_kind="target",
        )
        try:
            result = complete(backend, request)
        except BackendError:
            return instruction
        target = _strip_fences(result.text).strip().strip("\"'")
        return target if target else instruction

    def _ask(self, backend, request: CompletionRequest) -> tuple[str, list[str]]:
        result = complete(backend, request)
        try:
            return parse_plan_response(result.text)
        except ParseError:
            retry = complete(backend, _with_reminder(request))
            return parse_plan_response(retry.text)
