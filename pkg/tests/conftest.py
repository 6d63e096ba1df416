import json
import math
import random

import pytest
from hypothesis import settings
from PIL import Image

from daco.backends import ScriptedBackend
from daco.orchestrator import Episode
from daco.scene import AgentPose, absolute_bearing, candidate_actions, scene_from_dict

settings.register_profile("ci", derandomize=True, max_examples=60, deadline=None)
settings.load_profile("ci")


# T5 fixture scene: A(0,0,0) B(4,0,0) C(8,0,0) D(8,4,0) E(4,4,0),
# edges A-B, B-C, C-D, D-E, E-B, all of length 4.
T5_RAW = {
    "scan": "T5",
    "viewpoints": [
        {"id": "A", "x": 0.0, "y": 0.0, "z": 0.0, "floor": 0},
        {"id": "B", "x": 4.0, "y": 0.0, "z": 0.0, "floor": 0},
        {"id": "C", "x": 8.0, "y": 0.0, "z": 0.0, "floor": 0},
        {"id": "D", "x": 8.0, "y": 4.0, "z": 0.0, "floor": 0},
        {"id": "E", "x": 4.0, "y": 4.0, "z": 0.0, "floor": 0},
    ],
    "edges": [["A", "B"], ["B", "C"], ["C", "D"], ["D", "E"], ["E", "B"]],
    "image_root": "/imgs/T5",
}


@pytest.fixture(scope="session")
def t5():
    return scene_from_dict(T5_RAW)


@pytest.fixture(scope="session")
def t5_scene_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scenes") / "T5.scene.json"
    path.write_text(json.dumps(T5_RAW))
    return path


def write_floor_maps(directory, graph, scan=None, size=(96, 72)):
    """Generate white background PNGs and pixel coordinates for every floor."""
    directory.mkdir(parents=True, exist_ok=True)
    scan = scan or graph.scan
    floors = sorted({vp.floor for vp in graph.viewpoints.values()})
    xs = [vp.position[0] for vp in graph.viewpoints.values()]
    ys = [vp.position[1] for vp in graph.viewpoints.values()]
    span_x = max(xs) - min(xs) or 1.0
    span_y = max(ys) - min(ys) or 1.0
    margin = 14
    entries = []
    for floor in floors:
        image_path = directory / f"{scan}_floor{floor}.png"
        Image.new("RGB", size, (255, 255, 255)).save(image_path)
        coords = {}
        for vp in graph.viewpoints.values():
            if vp.floor != floor:
                continue
            px = margin + int((vp.position[0] - min(xs)) / span_x * (size[0] - 2 * margin))
            py = margin + int((vp.position[1] - min(ys)) / span_y * (size[1] - 2 * margin))
            coords[vp.id] = [px, py]
        entries.append({"floor": floor, "image": image_path.name, "coords": coords})
    meta_path = directory / f"{scan}.maps.json"
    meta_path.write_text(json.dumps({"scan": scan, "floors": entries}))
    return meta_path


def floor_maps_for(directory, graph, scan=None):
    from daco.topdown import load_floor_maps

    return load_floor_maps(write_floor_maps(directory, graph, scan=scan))


@pytest.fixture()
def t5_floor_maps(t5, tmp_path):
    return floor_maps_for(tmp_path / "maps", t5)


def walk_gt_labels(graph, episode):
    """Replay the ground-truth path, returning the option label taken at each step."""
    pose = AgentPose(episode.start_viewpoint, episode.heading)
    labels = []
    for nxt in episode.gt_path[1:]:
        space = candidate_actions(graph, pose)
        option = next(o for o in space.options if o.target == nxt)
        labels.append(option.label)
        heading = absolute_bearing(
            graph.viewpoints[pose.viewpoint].position, graph.viewpoints[nxt].position
        )
        pose = AgentPose(nxt, heading)
    return labels


def gt_oracle_entries(graph, episode, plan_style="dynamic"):
    """Scripted responses for a perfect run: ground-truth moves, then Stop."""
    entries = []
    labels = walk_gt_labels(graph, episode)
    plan_json = json.dumps(
        {"Thought": "heading for the goal", "New Plan": "1. follow the corridor\n2. stop at the goal"}
    )
    total_steps = len(labels) + 1  # moves plus the final Stop decision
    for t in range(total_steps):
        if plan_style == "dynamic" or (plan_style == "static" and t == 0):
            entries.append({"episode": episode.id, "step": t, "kind": "describe",
                            "replan_ordinal": 0, "response": "A plain test corridor."})
            entries.append({"episode": episode.id, "step": t, "kind": "planning",
                            "replan_ordinal": 0, "response": plan_json})
        answer = f"Thought: moving on.\nAction: {labels[t]}" if t < len(labels) else "Thought: arrived.\nAction: stop"
        entries.append({"episode": episode.id, "step": t, "kind": "action",
                        "replan_ordinal": 0, "response": answer})
    return entries


def line_scene(n, spacing=2.0, scan="line"):
    """A corridor of n viewpoints spaced `spacing` meters apart along x."""
    viewpoints = [
        {"id": f"L{i}", "x": i * spacing, "y": 0.0, "z": 0.0, "floor": 0} for i in range(n)
    ]
    edges = [[f"L{i}", f"L{i+1}"] for i in range(n - 1)]
    return scene_from_dict(
        {"scan": scan, "viewpoints": viewpoints, "edges": edges, "image_root": f"/imgs/{scan}"}
    )


def make_episode(graph, gt_path, episode_id="ep0", instruction="walk to the goal", heading=0.0, mode="r2r"):
    return Episode(
        id=episode_id,
        scan=graph.scan,
        instruction=instruction,
        start_viewpoint=gt_path[0],
        heading=heading,
        goal=gt_path[-1],
        gt_path=tuple(gt_path),
        dataset_mode=mode,
    )


def gt_backend(graph, episode, plan_style="dynamic"):
    return ScriptedBackend(gt_oracle_entries(graph, episode, plan_style))


# ---------------------------------------------------------------------------
# independent distance oracle: exhaustive simple-path enumeration
# ---------------------------------------------------------------------------

def enumerate_simple_path_lengths(graph, source, target):
    """All simple-path lengths source->target, each summed left to right."""
    lengths = []

    def walk(node, seen, total):
        if node == target:
            lengths.append(total)
            return
        for nbr, w in graph.adjacency.get(node, ()):
            if nbr not in seen:
                walk(nbr, seen | {nbr}, total + w)

    walk(source, {source}, 0.0)
    return lengths


def brute_distance(graph, a, b):
    """Shortest distance by exhaustive enumeration; direction canonicalized to
    the lexicographically smaller endpoint, matching the library's symmetry rule."""
    if a == b:
        return 0.0
    source, target = (a, b) if a <= b else (b, a)
    lengths = enumerate_simple_path_lengths(graph, source, target)
    return min(lengths) if lengths else None


def brute_score(graph, path, goal, termination="stopped", threshold=3.0):
    """Independent scorer: distances from exhaustive simple-path enumeration,
    traversed length summed from raw endpoint positions."""
    ne = brute_distance(graph, path[-1], goal)
    shortest = brute_distance(graph, path[0], goal)
    traversed = 0.0
    for a, b in zip(path, path[1:]):
        traversed += math.dist(graph.viewpoints[a].position, graph.viewpoints[b].position)
    success = ne <= threshold and termination != "parse_failure"
    oracle = min(brute_distance(graph, v, goal) for v in path) <= threshold
    if success:
        denom = max(shortest, traversed)
        spl = 1.0 if denom == 0.0 else shortest / denom
    else:
        spl = 0.0
    return ne, success, oracle, spl, traversed, shortest


def random_connected_graph(rng: random.Random, max_nodes=12, extra_edges=3):
    """Random tree plus a few extra edges; positions random so path lengths are unique."""
    n = rng.randint(2, max_nodes)
    ids = [f"v{i:02d}" for i in range(n)]
    viewpoints = [
        {"id": vid, "x": rng.uniform(0, 30), "y": rng.uniform(0, 30), "z": 0.0, "floor": 0}
        for vid in ids
    ]
    edges = []
    have = set()
    for i in range(1, n):
        j = rng.randrange(i)
        edges.append([ids[j], ids[i]])
        have.add((min(i, j), max(i, j)))
    for _ in range(rng.randint(0, extra_edges)):
        i, j = rng.randrange(n), rng.randrange(n)
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in have:
            continue
        have.add(key)
        edges.append([ids[i], ids[j]])
    return scene_from_dict(
        {"scan": f"rand{n}", "viewpoints": viewpoints, "edges": edges, "image_root": "/imgs/rand"}
    )


def random_walk(rng: random.Random, graph, max_len=10):
    start = rng.choice(sorted(graph.viewpoints))
    path = [start]
    for _ in range(rng.randint(0, max_len)):
        nbrs = graph.neighbors(path[-1])
        if not nbrs:
            break
        path.append(rng.choice(nbrs)[0])
    return path
