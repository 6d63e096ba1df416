"""One full episode of the dual-agent loop, driven by a scripted backend.

    python3 demos/03_scripted_episode.py

The script plays a model that asks for one replan at step 1, then follows the
corridor and stops. Watch the protocol messages, the replan budget, and the
usage ledger in the printed trace.
"""

import json
from pathlib import Path

from PIL import Image

from daco import Episode, FloorMap, RunSettings, ScriptedBackend, run_episode, scene_from_dict

SCENE = {
    "scan": "corridor",
    "viewpoints": [
        {"id": f"L{i}", "x": 2.0 * i, "y": 0.0, "z": 0.0, "floor": 0} for i in range(5)
    ],
    "edges": [[f"L{i}", f"L{i+1}"] for i in range(4)],
    "image_root": "/data/views/corridor",
}
graph = scene_from_dict(SCENE)

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(parents=True, exist_ok=True)
background = out_dir / "corridor_floor0.png"
Image.new("RGB", (200, 80), (250, 250, 250)).save(background)
floor_maps = [
    FloorMap(
        floor=0,
        image_ref=str(background),
        pixel_coords={f"L{i}": (20 + 40 * i, 40) for i in range(5)},
    )
]

episode = Episode(
    id="demo_ep",
    scan="corridor",
    instruction="Walk down the corridor and stop at the far door.",
    start_viewpoint="L0",
    heading=90.0,  # facing along +x, straight down the corridor
    goal="L4",
    gt_path=("L0", "L1", "L2", "L3", "L4"),
)

plan = json.dumps({"Thought": "the door is at the far end",
                   "New Plan": "1. walk straight along the corridor\n2. stop at the door"})
replan = json.dumps({"Thought": "recomputed from the current position",
                     "New Plan": "1. keep heading towards the door\n2. stop at the door"})

# Script keyed by (episode, step, kind, replan ordinal); "*" is a wildcard.
entries = [
    {"episode": "demo_ep", "step": "*", "kind": "describe", "replan_ordinal": "*",
     "response": "A long corridor stretches ahead with a door at the end."},
    {"episode": "demo_ep", "step": "*", "kind": "planning", "replan_ordinal": "*", "response": plan},
    {"episode": "demo_ep", "step": "*", "kind": "target", "replan_ordinal": "*", "response": "the far door"},
    {"episode": "demo_ep", "step": "*", "kind": "replan", "replan_ordinal": "*", "response": replan},
    # forward is always option A in this corridor; ask for a replan once at step 1
    {"episode": "demo_ep", "step": "*", "kind": "action", "replan_ordinal": "*",
     "response": "Thought: keep going.\nAction: A"},
    {"episode": "demo_ep", "step": 1, "kind": "action", "replan_ordinal": 0,
     "response": "Thought: the plan feels stale.\nAction: replan"},
    {"episode": "demo_ep", "step": 4, "kind": "action", "replan_ordinal": 0,
     "response": "Thought: this is the door.\nAction: stop"},
]

trace = run_episode(graph, floor_maps, episode, ScriptedBackend(entries), RunSettings())

print(f"termination: {trace.termination} at {trace.final_pose.viewpoint}")
print(f"moves: {trace.moves}, replans used: {trace.replans_used}, fallback: {trace.fallback}")
print("\nper-step protocol messages:")
for step in trace.steps:
    kinds = [e["kind"] for e in step.messages()]
    decisions = [e["kind"] for e in step.decisions()]
    print(f"  t={step.t} at {step.viewpoint}: messages={kinds} decisions={decisions}")

ledger = trace.usage
print(f"\nusage: {len(ledger.records)} calls, "
      f"{ledger.prompt_tokens} prompt tokens, {ledger.completion_tokens} completion tokens")

trace_path = out_dir / "demo_ep.trace.jsonl"
trace.write(trace_path)
print(f"\nfull trace written to {trace_path}")
