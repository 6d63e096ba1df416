"""Dual-agent vision-language navigation engine.

Graph-world simulation, top-down visual prompting, a global-planner /
local-actor collaboration loop with replan budget and fallback, and the
standard navigation metrics (NE, SR, OSR, SPL).
"""

from .backends import (
    ChatMessage,
    CompletionRequest,
    CompletionResult,
    ImagePart,
    RemoteBackend,
    ScriptedBackend,
    TextPart,
    UsageLedger,
    complete,
    report_usage,
    serialize_request,
)
from .errors import (
    AnnotationError,
    AuthenticationError,
    BackendError,
    DacoError,
    HTTPStatusError,
    OracleMissError,
    ParseError,
    ProtocolError,
    SceneError,
    TransportError,
    UnknownViewpointError,
    UnreachableError,
)
from .global_agent import GlobalAgent, GlobalPlan, ReplanContext, parse_plan_response, serialize_plan
from .local_agent import LocalAgent, LocalDecision, LocationDescription, parse_action_response
from .metrics import (
    AggregateMetrics,
    EpisodeMetrics,
    StabilityStats,
    aggregate,
    bucket_by_gt_steps,
    score_episode,
    stability,
    stability_stats,
)
from .orchestrator import (
    AgentMessage,
    Budget,
    Episode,
    EpisodeTrace,
    RunSettings,
    format_history,
    load_episodes,
    run_episode,
)
from .prompts import PromptTemplates
from .scene import (
    ActionOption,
    ActionSpace,
    AgentPose,
    SceneGraph,
    ViewDescriptor,
    Viewpoint,
    candidate_actions,
    frontal_slice,
    load_scene,
    orientation_caption,
    panoramic_observation,
    scene_from_dict,
    shortest_path_length,
)
from .topdown import FloorMap, MarkedMapSet, annotate_trajectory, load_floor_maps

__version__ = "0.1.0"
