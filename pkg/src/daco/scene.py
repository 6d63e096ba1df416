"""Discrete navigation worlds: viewpoint graphs, poses, action spaces, panoramas.

A scene is an undirected weighted graph of viewpoints. Edge lengths are the 3D
Euclidean distances between endpoint positions, in meters. Everything here is a
pure function of immutable inputs, so a loaded graph can be shared freely
across concurrently running episodes.
"""

from __future__ import annotations

import heapq
import json
import math
import string
from dataclasses import dataclass
from pathlib import Path

from .errors import SceneError, UnknownViewpointError, UnreachableError

ELEVATIONS = (-30, 0, 30)
AZIMUTH_COUNT = 12
AZIMUTH_STEP = 360.0 / AZIMUTH_COUNT


@dataclass(frozen=True)
class Viewpoint:
    id: str
    position: tuple[float, float, float]
    floor: int


@dataclass(frozen=True)
class SceneGraph:
    scan: str
    viewpoints: dict[str, Viewpoint]
    adjacency: dict[str, tuple[tuple[str, float], ...]]  # id -> ((neighbor, length), ...) sorted by neighbor id
    image_root: str

    def viewpoint(self, vid: str) -> Viewpoint:
        try:
            return self.viewpoints[vid]
        except KeyError:
            raise UnknownViewpointError(f"unknown viewpoint {vid!r} in scan {self.scan!r}") from None

    def neighbors(self, vid: str) -> tuple[tuple[str, float], ...]:
        self.viewpoint(vid)
        return self.adjacency.get(vid, ())

    def edge_length(self, a: str, b: str) -> float:
        for nbr, length in self.neighbors(a):
            if nbr == b:
                return length
        raise SceneError(f"no edge between {a!r} and {b!r}")


@dataclass(frozen=True)
class AgentPose:
    """Viewpoint plus heading in degrees, normalized to [0, 360)."""

    viewpoint: str
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", float(self.heading) % 360.0)


@dataclass(frozen=True)
class ViewDescriptor:
    azimuth_index: int  # 0..11, 0 looks along the agent heading, increasing clockwise
    elevation: int      # one of ELEVATIONS
    image_ref: str
    caption: str | None = None


@dataclass(frozen=True)
class ActionOption:
    label: str
    target: str
    relative_bearing: float  # degrees clockwise from current heading


@dataclass(frozen=True)
class ActionSpace:
    options: tuple[ActionOption, ...]
    includes_stop: bool = True

    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.options)

    def option(self, label: str) -> ActionOption | None:
        for o in self.options:
            if o.label == label:
                return o
        return None


def absolute_bearing(p_from: tuple[float, float, float], p_to: tuple[float, float, float]) -> float:
    """Compass-style bearing in degrees: 0 along +y, increasing clockwise toward +x."""
    dx = p_to[0] - p_from[0]
    dy = p_to[1] - p_from[1]
    return math.degrees(math.atan2(dx, dy)) % 360.0


def load_scene(path: str | Path) -> SceneGraph:
    """Load a scene file and validate its graph invariants.

    The file is a JSON object with "scan", "viewpoints" (id/x/y/z/floor),
    "edges" (pairs of viewpoint ids) and "image_root".
    """
    path = Path(path)
    if not path.exists():
        raise SceneError(f"scene file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"scene file {path} is not valid JSON: {exc}") from exc
    return scene_from_dict(raw, default_scan=path.stem)


def scene_from_dict(raw: dict, default_scan: str = "scene") -> SceneGraph:
    """Build and validate a SceneGraph from already-parsed scene data."""
    entries = raw.get("viewpoints", [])
    if not entries:
        raise SceneError("empty scene: no viewpoints defined")

    viewpoints: dict[str, Viewpoint] = {}
    for entry in entries:
        vid = str(entry["id"])
        if vid in viewpoints:
            raise SceneError(f"duplicate viewpoint id {vid!r}")
        floor = int(entry.get("floor", 0))
        if floor < 0:
            raise SceneError(f"viewpoint {vid!r} has negative floor {floor}")
        viewpoints[vid] = Viewpoint(
            id=vid,
            position=(float(entry["x"]), float(entry["y"]), float(entry["z"])),
            floor=floor,
        )

    adjacency: dict[str, list[tuple[str, float]]] = {vid: [] for vid in viewpoints}
    seen: set[tuple[str, str]] = set()
    for pair in raw.get("edges", []):
        a, b = str(pair[0]), str(pair[1])
        for vid in (a, b):
            if vid not in viewpoints:
                raise SceneError(f"edge endpoint {vid!r} is not a declared viewpoint")
        key = (a, b) if a <= b else (b, a)
        if key in seen or a == b:
            if a == b:
                raise SceneError(f"self-loop edge at viewpoint {a!r}")
            continue
        seen.add(key)
        length = math.dist(viewpoints[a].position, viewpoints[b].position)
        if length <= 0.0:
            raise SceneError(f"zero-length edge between {a!r} and {b!r}")
        adjacency[a].append((b, length))
        adjacency[b].append((a, length))

    return SceneGraph(
        scan=str(raw.get("scan", default_scan)),
        viewpoints=viewpoints,
        adjacency={vid: tuple(sorted(nbrs)) for vid, nbrs in adjacency.items()},
        image_root=str(raw.get("image_root", "")),
    )


def candidate_actions(graph: SceneGraph, pose: AgentPose) -> ActionSpace:
    """Enumerate the navigable options at a pose, plus the always-present STOP.

    Options are labeled A, B, C, ... in ascending relative-bearing order
    (front first, then clockwise); bearing ties break on target id.
    """
    current = graph.viewpoint(pose.viewpoint)
    ranked = []
    for nbr, _length in graph.neighbors(pose.viewpoint):
        rel = (absolute_bearing(current.position, graph.viewpoints[nbr].position) - pose.heading) % 360.0
        ranked.append((rel, nbr))
    ranked.sort()
    if len(ranked) > len(string.ascii_uppercase):
        raise SceneError(f"viewpoint {pose.viewpoint!r} has more than 26 neighbors")
    options = tuple(
        ActionOption(label=string.ascii_uppercase[i], target=nbr, relative_bearing=rel)
        for i, (rel, nbr) in enumerate(ranked)
    )
    return ActionSpace(options=options, includes_stop=True)


def shortest_path_length(graph: SceneGraph, from_id: str, to_id: str) -> float:
    """Geodesic distance in meters over edge weights.

    Symmetric by construction: the search always runs from the
    lexicographically smaller endpoint, so float accumulation order does not
    depend on argument order.
    """
    graph.viewpoint(from_id)
    graph.viewpoint(to_id)
    if from_id == to_id:
        return 0.0
    source, target = (from_id, to_id) if from_id <= to_id else (to_id, from_id)

    dist = {source: 0.0}
    queue: list[tuple[float, str]] = [(0.0, source)]
    done: set[str] = set()
    while queue:
        d, node = heapq.heappop(queue)
        if node in done:
            continue
        if node == target:
            return d
        done.add(node)
        for nbr, length in graph.adjacency.get(node, ()):
            nd = d + length
            if nd < dist.get(nbr, math.inf):
                dist[nbr] = nd
                heapq.heappush(queue, (nd, nbr))
    raise UnreachableError(f"no path between {from_id!r} and {to_id!r}")


def panoramic_observation(graph: SceneGraph, pose: AgentPose) -> list[ViewDescriptor]:
    """Full 36-view panorama: 12 azimuths at each elevation in ELEVATIONS.

    Azimuth index 0 is the slot nearest the agent heading; indices increase
    clockwise. Image files live on a fixed 30-degree absolute grid per
    viewpoint (slot 0 at absolute bearing 0), so rotating the pose re-orders
    which file lands at which index without inventing new assets.
    """
    graph.viewpoint(pose.viewpoint)
    head_slot = int(math.floor(pose.heading / AZIMUTH_STEP + 0.5)) % AZIMUTH_COUNT
    views = []
    for elevation in ELEVATIONS:
        for az in range(AZIMUTH_COUNT):
            slot = (head_slot + az) % AZIMUTH_COUNT
            views.append(
                ViewDescriptor(
                    azimuth_index=az,
                    elevation=elevation,
                    image_ref=f"{graph.image_root}/{pose.viewpoint}/{elevation}_{slot}.jpg",
                )
            )
    return views


def orientation_caption(bearing: float) -> str:
    """Map a relative bearing to one of four orientation phrases."""
    b = bearing % 360.0
    if b < 45.0 or b >= 315.0:
        return "in front of you"
    if b < 135.0:
        return "on your right"
    if b < 225.0:
        return "behind you"
    return "on your left"


def frontal_slice(pano: list[ViewDescriptor], pose: AgentPose) -> list[ViewDescriptor]:
    """The 12 elevation-0 views, captioned, ordered front then clockwise."""
    if len(pano) != AZIMUTH_COUNT * len(ELEVATIONS):
        raise SceneError(f"malformed panorama: expected 36 descriptors, got {len(pano)}")
    head_slot = int(math.floor(pose.heading / AZIMUTH_STEP + 0.5)) % AZIMUTH_COUNT
    sliced = []
    for view in pano:
        if view.elevation != 0:
            continue
        slot = (head_slot + view.azimuth_index) % AZIMUTH_COUNT
        rel = (slot * AZIMUTH_STEP - pose.heading) % 360.0
        caption = f"Image {view.azimuth_index + 1} ({orientation_caption(rel)})"
        sliced.append(
            ViewDescriptor(
                azimuth_index=view.azimuth_index,
                elevation=0,
                image_ref=view.image_ref,
                caption=caption,
            )
        )
    sliced.sort(key=lambda v: v.azimuth_index)
    if len(sliced) != AZIMUTH_COUNT:
        raise SceneError(f"malformed panorama: expected 12 elevation-0 views, got {len(sliced)}")
    return sliced
