"""Episode orchestration: the per-step plan/act cycle, replanning under budget,
single-agent fallback, and trace recording.

One episode is strictly sequential. Per step, dynamic mode runs a planning
exchange (location description out, fresh plan back), static mode plans once
at step 0, and `none` skips planning entirely. The decision phase may answer
Replan: while budget remains that triggers a from-scratch replanning exchange
and the decision is retried at the same step counter; once the budget is
exhausted the episode drops to single-agent fallback for the remainder.
Only Move actions advance the step counter; Stop and replans are free.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .backends import CompletionRequest, UsageLedger, complete, serialize_request
from .errors import BackendError, ParseError
from .global_agent import GlobalAgent, GlobalPlan, ReplanContext, serialize_plan
from .local_agent import LocalAgent, LocalDecision
from .prompts import PromptTemplates
from .scene import (
    AgentPose,
    SceneGraph,
    absolute_bearing,
    candidate_actions,
    frontal_slice,
    panoramic_observation,
    shortest_path_length,
)
from .topdown import FloorMap, annotate_trajectory

PLAN_STYLES = ("none", "static", "dynamic")
DATASET_MODES = ("r2r", "reverie", "r4r")

TERMINATION_STOPPED = "stopped"
TERMINATION_STEP_CAP = "step_cap"
TERMINATION_PARSE_FAILURE = "parse_failure"


@dataclass(frozen=True)
class Episode:
    id: str
    scan: str
    instruction: str
    start_viewpoint: str
    heading: float  # degrees
    goal: str
    gt_path: tuple[str, ...]
    dataset_mode: str = "r2r"

    def __post_init__(self):
        if not self.gt_path:
            raise ValueError(f"episode {self.id!r} has an empty ground-truth path")
        if self.start_viewpoint != self.gt_path[0]:
            raise ValueError(f"episode {self.id!r}: start must be the first ground-truth viewpoint")
        if self.goal != self.gt_path[-1]:
            raise ValueError(f"episode {self.id!r}: goal must be the last ground-truth viewpoint")


@dataclass(frozen=True)
class Budget:
    max_steps: int = 15
    max_replans: int = 1

    @classmethod
    def for_mode(cls, dataset_mode: str, max_replans: int = 1) -> "Budget":
        steps = 30 if dataset_mode.lower() == "r4r" else 15
        return cls(max_steps=steps, max_replans=max_replans)


@dataclass(frozen=True)
class AgentMessage:
    kind: str  # PlanningRequest | PlanningResponse | ReplanRequest | ReplanResponse
    payload: str
    step: int


@dataclass
class StepRecord:
    t: int
    viewpoint: str
    heading: float
    events: list[dict] = field(default_factory=list)
    requests: list[dict] = field(default_factory=list)
    plan: dict | None = None
    map_step_index: int | None = None
    fallback: bool = False
    replans_used: int = 0
    moved_to: str | None = None
    action_label: str | None = None

    def add_message(self, message: AgentMessage) -> None:
        self.events.append(
            {"type": "message", "kind": message.kind, "payload": message.payload, "step": message.step}
        )

    def add_decision(self, decision: LocalDecision) -> None:
        self.events.append(
            {
                "type": "decision",
                "kind": decision.kind,
                "label": decision.option_label,
                "thought": decision.thought,
            }
        )

    def messages(self) -> list[dict]:
        return [e for e in self.events if e["type"] == "message"]

    def decisions(self) -> list[dict]:
        return [e for e in self.events if e["type"] == "decision"]


@dataclass
class RunSettings:
    plan_style: str = "dynamic"
    replan_enabled: bool = True
    templates: PromptTemplates | None = None
    dump_map_dir: str | Path | None = None
    temperature: float | None = None  # overrides the request default when set
    max_tokens: int | None = None

    def __post_init__(self):
        if self.plan_style not in PLAN_STYLES:
            raise ValueError(f"unknown plan style {self.plan_style!r}")
        if self.plan_style == "none" and self.replan_enabled:
            raise ValueError("replan requires a planner: plan_style 'none' cannot enable replan")


@dataclass
class EpisodeTrace:
    episode: Episode
    plan_style: str
    replan_enabled: bool
    budget: Budget
    run_label: str
    steps: list[StepRecord] = field(default_factory=list)
    termination: str = TERMINATION_STEP_CAP
    final_pose: AgentPose | None = None
    path: list[str] = field(default_factory=list)
    moves: int = 0
    replans_used: int = 0
    fallback: bool = False
    error: str | None = None
    usage: UsageLedger | None = None

    def header(self) -> dict:
        return {
            "record": "header",
            "episode_id": self.episode.id,
            "scan": self.episode.scan,
            "instruction": self.episode.instruction,
            "mode": self.episode.dataset_mode,
            "run_label": self.run_label,
            "start": {"viewpoint": self.episode.start_viewpoint, "heading": self.episode.heading},
            "goal": self.episode.goal,
            "gt_path": list(self.episode.gt_path),
            "plan_style": self.plan_style,
            "replan_enabled": self.replan_enabled,
            "budget": {"max_steps": self.budget.max_steps, "max_replans": self.budget.max_replans},
            "step_semantics": "moves",  # the step cap counts Move actions; Stop and replans are free
        }

    def summary(self) -> dict:
        return {
            "record": "summary",
            "termination": self.termination,
            "final_pose": {
                "viewpoint": self.final_pose.viewpoint if self.final_pose else None,
                "heading": self.final_pose.heading if self.final_pose else None,
            },
            "path": list(self.path),
            "moves": self.moves,
            "replans_used": self.replans_used,
            "fallback": self.fallback,
            "error": self.error,
        }

    def to_records(self) -> list[dict]:
        records = [self.header()]
        for step in self.steps:
            records.append(
                {
                    "record": "step",
                    "t": step.t,
                    "pose": {"viewpoint": step.viewpoint, "heading": step.heading},
                    "events": step.events,
                    "requests": step.requests,
                    "plan": step.plan,
                    "map_step_index": step.map_step_index,
                    "fallback": step.fallback,
                    "replans_used": step.replans_used,
                    "moved_to": step.moved_to,
                    "action_label": step.action_label,
                }
            )
        records.append(self.summary())
        return records

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r, sort_keys=True) for r in self.to_records()) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl())
        return path


def load_episodes(path: str | Path, default_mode: str = "r2r") -> list[Episode]:
    """Load an episode dataset file (R2R-style schema).

    Headings in the file are radians, as distributed; they are converted to
    degrees here. Each instruction of a path becomes its own episode.
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    episodes = []
    for entry in raw:
        gt_path = tuple(str(v) for v in entry["path"])
        mode = str(entry.get("mode", default_mode)).lower()
        heading = math.degrees(float(entry.get("heading", 0.0))) % 360.0
        instructions = entry.get("instructions") or [""]
        for i, instruction in enumerate(instructions):
            episodes.append(
                Episode(
                    id=f"{entry['path_id']}_{i}",
                    scan=str(entry["scan"]),
                    instruction=str(instruction),
                    start_viewpoint=gt_path[0],
                    heading=heading,
                    goal=gt_path[-1],
                    gt_path=gt_path,
                    dataset_mode=mode,
                )
            )
    return episodes


def format_history(history: Sequence[tuple[str, str]]) -> str:
    """Render (viewpoint, action-label) pairs as "step (i): {label}" clauses."""
    if not history:
        return "None"
    return ", ".join(f"step ({i}): {{{label}}}" for i, (_vp, label) in enumerate(history, start=1))


def _map_text(graph: SceneGraph, visited: Sequence[str]) -> str:
    seen: list[str] = []
    for vid in visited:
        if vid not in seen:
            seen.append(vid)
    lines = []
    for vid in seen:
        neighbors = ", ".join(nbr for nbr, _ in graph.neighbors(vid))
        lines.append(f"Place {vid}: connects to {neighbors or 'nothing'}")
    return "\n".join(lines) if lines else "None"


class _EpisodeBackend:
    """Per-episode wrapper: stamps oracle keys and tuning, records requests and usage."""

    def __init__(self, base, ledger: UsageLedger, episode_id: str,
                 temperature: float | None = None, max_tokens: int | None = None):
        self.base = base
        self.ledger = ledger
        self.episode_id = episode_id
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.step = 0
        self.ordinal = 0
        self.sink: StepRecord | None = None

    def complete(self, request: CompletionRequest):
        request.episode_id = self.episode_id
        request.step = self.step
        request.replan_ordinal = self.ordinal
        if self.temperature is not None:
            request.temperature = self.temperature
        if self.max_tokens is not None:
            request.max_tokens = self.max_tokens
        if self.sink is not None:
            self.sink.requests.append(
                {"kind": request.call_kind, "ordinal": self.ordinal, "text": serialize_request(request)}
            )
        return complete(self.base, request, self.ledger)


def _plan_info(plan: GlobalPlan | None) -> dict | None:
    if plan is None:
        return None
    return {
        "origin": plan.origin,
        "subgoals": list(plan.subgoals),
        "K": len(plan.subgoals),
        "nonconforming_stop": plan.nonconforming_stop,
    }


def replan_cycle(
    graph: SceneGraph,
    floor_maps: Sequence[FloorMap],
    episode: Episode,
    pose: AgentPose,
    visited: Sequence[str],
    t: int,
    global_agent: GlobalAgent,
    local_agent: LocalAgent,
    backend,
    prev_plan: GlobalPlan | None,
    step: StepRecord,
) -> GlobalPlan:
    """Run one from-scratch replanning exchange and record its message pair."""
    pano = panoramic_observation(graph, pose)
    obs = local_agent.describe_location(backend, frontal_slice(pano, pose))
    step.add_message(AgentMessage(kind="ReplanRequest", payload=obs.text, step=t))
    target = global_agent.extract_target(backend, episode.instruction)
    marked = annotate_trajectory(floor_maps, list(visited), pose.viewpoint)
    ctx = ReplanContext(target=target, marked_maps=marked, local_obs=obs.text)
    forbidden = serialize_plan(prev_plan) if prev_plan is not None else None
    plan = global_agent.replan(backend, ctx, forbidden_text=forbidden)
    step.add_message(AgentMessage(kind="ReplanResponse", payload=serialize_plan(plan), step=t))
    return plan


def run_episode(
    graph: SceneGraph,
    floor_maps: Sequence[FloorMap],
    episode: Episode,
    backend,
    settings: RunSettings | None = None,
    budget: Budget | None = None,
    run_label: str = "run0",
) -> EpisodeTrace:
    """Run one episode to termination and return its full trace.

    The trace is a pure function of (scene, episode, backend behavior,
    settings): with a scripted backend, repeated runs serialize identically.
    """
    settings = settings or RunSettings()
    budget = budget or Budget.for_mode(episode.dataset_mode)
    graph.viewpoint(episode.goal)
    shortest_path_length(graph, episode.start_viewpoint, episode.goal)  # start/goal connectivity

    templates = settings.templates or PromptTemplates.load()
    global_agent = GlobalAgent(templates=templates, dataset_mode=episode.dataset_mode)
    local_agent = LocalAgent(templates=templates)
    ledger = UsageLedger(episode.id)
    caller = _EpisodeBackend(
        backend, ledger, episode.id,
        temperature=settings.temperature, max_tokens=settings.max_tokens,
    )

    trace = EpisodeTrace(
        episode=episode,
        plan_style=settings.plan_style,
        replan_enabled=settings.replan_enabled,
        budget=budget,
        run_label=run_label,
    )

    pose = AgentPose(episode.start_viewpoint, episode.heading)
    visited: list[str] = [pose.viewpoint]
    history: list[tuple[str, str]] = []
    plan: GlobalPlan | None = None
    fallback = False
    replans_used = 0
    t = 0
    termination = TERMINATION_STEP_CAP
    error: str | None = None

    while t < budget.max_steps:
        step = StepRecord(t=t, viewpoint=pose.viewpoint, heading=pose.heading)
        step.fallback = fallback
        step.replans_used = replans_used
        caller.step = t
        caller.ordinal = 0
        caller.sink = step
        trace.steps.append(step)
        try:
            wants_plan = settings.plan_style == "dynamic" or (settings.plan_style == "static" and t == 0)
            if wants_plan and not fallback:
                pano = panoramic_observation(graph, pose)
                obs = local_agent.describe_location(caller, frontal_slice(pano, pose))
                step.add_message(AgentMessage(kind="PlanningRequest", payload=obs.text, step=t))
                marked = annotate_trajectory(floor_maps, visited, pose.viewpoint)
                step.map_step_index = marked.step_index
                if settings.dump_map_dir is not None:
                    marked.save(Path(settings.dump_map_dir) / episode.id)
                plan = global_agent.develop_plan(
                    caller, episode.instruction, marked, prev_plan=plan, local_obs=obs.text
                )
                step.add_message(AgentMessage(kind="PlanningResponse", payload=serialize_plan(plan), step=t))

            pano = panoramic_observation(graph, pose)
            space = candidate_actions(graph, pose)
            history_text = format_history(history)
            map_text = _map_text(graph, visited)

            while True:
                active_plan = None if fallback else plan
                decision = local_agent.decide_action(
                    caller,
                    episode.instruction,
                    active_plan,
                    history_text,
                    space,
                    pano,
                    map_text=map_text,
                    replan_allowed=settings.replan_enabled and active_plan is not None,
                )
                step.add_decision(decision)
                if decision.kind != "Replan":
                    break
                caller.ordinal += 1
                if replans_used < budget.max_replans:
                    replans_used += 1
                    step.replans_used = replans_used
                    plan = replan_cycle(
                        graph, floor_maps, episode, pose, visited, t,
                        global_agent, local_agent, caller, plan, step,
                    )
                else:
                    # budget exhausted: single-agent mode for the remainder
                    fallback = True
                    step.fallback = True

            step.plan = _plan_info(None if fallback else plan)

            if decision.kind == "Stop":
                termination = TERMINATION_STOPPED
                break

            option = space.option(decision.option_label)
            step.action_label = decision.option_label
            step.moved_to = option.target
            history.append((pose.viewpoint, decision.option_label))
            new_heading = absolute_bearing(
                graph.viewpoints[pose.viewpoint].position, graph.viewpoints[option.target].position
            )
            pose = AgentPose(option.target, new_heading)
            visited.append(option.target)
            t += 1
        except (BackendError, ParseError) as exc:
            termination = TERMINATION_PARSE_FAILURE
            error = f"{type(exc).__name__}: {exc}"
            break

    trace.termination = termination
    trace.error = error
    trace.final_pose = pose
    trace.path = visited
    trace.moves = t
    trace.replans_used = replans_used
    trace.fallback = fallback
    ledger.verify()
    trace.usage = ledger
    return trace
