"""Tour of the graph world: scenes, action spaces, distances, panoramas.

Run from the repository root after `pip install -e .`:

    python3 demos/01_scene_world.py
"""

from daco import (
    AgentPose,
    candidate_actions,
    frontal_slice,
    panoramic_observation,
    scene_from_dict,
    shortest_path_length,
)

# A tiny five-room house: a corridor A-B-C with a side loop through D and E.
#
#        E ---- D
#        |      |
#   A -- B ---- C
#
SCENE = {
    "scan": "demo_house",
    "viewpoints": [
        {"id": "A", "x": 0.0, "y": 0.0, "z": 0.0, "floor": 0},
        {"id": "B", "x": 4.0, "y": 0.0, "z": 0.0, "floor": 0},
        {"id": "C", "x": 8.0, "y": 0.0, "z": 0.0, "floor": 0},
        {"id": "D", "x": 8.0, "y": 4.0, "z": 0.0, "floor": 0},
        {"id": "E", "x": 4.0, "y": 4.0, "z": 0.0, "floor": 0},
    ],
    "edges": [["A", "B"], ["B", "C"], ["C", "D"], ["D", "E"], ["E", "B"]],
    "image_root": "/data/views/demo_house",
}

graph = scene_from_dict(SCENE)
print(f"loaded scan {graph.scan!r}: {len(graph.viewpoints)} viewpoints")

# --- candidate actions -----------------------------------------------------
# Standing at B facing north (+y). Options come out front-first, clockwise,
# labeled A, B, C... and STOP is always available.
pose = AgentPose("B", heading=0.0)
space = candidate_actions(graph, pose)
print("\naction options at B, heading 0:")
for option in space.options:
    print(f"  {option.label}. to {option.target} (bearing {option.relative_bearing:.0f} deg)")
print("  plus STOP")

# --- geodesic distances ----------------------------------------------------
print("\nshortest-path distances:")
for a, b in (("A", "D"), ("A", "E"), ("C", "E")):
    print(f"  {a} -> {b}: {shortest_path_length(graph, a, b):.1f} m")

# --- panoramic observation ---------------------------------------------------
# 36 views: 12 azimuth slots at elevations -30/0/30. Index 0 looks along the
# agent heading; the underlying image files sit on a fixed absolute grid.
pano = panoramic_observation(graph, pose)
print(f"\npanorama at B: {len(pano)} views, "
      f"{sum(1 for v in pano if v.elevation == 0)} at eye level")
print(f"  first file: {pano[0].image_ref}")

# The frontal slice is what the local agent describes to the planner:
# the 12 eye-level views, each captioned relative to the heading.
for view in frontal_slice(pano, pose)[:4]:
    print(f"  {view.caption}")
