"""Scoring trajectories: NE, SR, OSR, SPL, step buckets, and stability stats.

    python3 demos/04_metrics_report.py
"""

from daco import aggregate, bucket_by_gt_steps, score_episode, scene_from_dict, stability_stats
from daco.metrics import format_stability_table, format_table

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
}
graph = scene_from_dict(SCENE)

# Three agents attempt "go from A to E":
#   - one walks the shortest route,
#   - one takes a detour twice as long (success, but SPL halves),
#   - one stops early at B, 8 m short (failure; never came within 3 m).
runs = {
    "direct": ["A", "B", "E"],
    "detour": ["A", "B", "C", "B", "E"],
    "lost": ["A", "B"],
}
metrics = []
print("per-episode scores against goal E:")
for name, path in runs.items():
    m = score_episode(graph, path, "E")
    metrics.append(m)
    print(f"  {name:>7}: NE={m.ne:.1f}m success={m.success} oracle={m.oracle_success} "
          f"spl={m.spl_contribution:.2f} (walked {m.path_length:.0f}m, shortest {m.shortest_length:.0f}m)")

print("\naggregate over the three episodes:")
print(format_table({"overall": aggregate(metrics)}))

# Buckets group episodes by how many moves the ground-truth path takes.
items = [((["A", "B", "E"]), metrics[0]), ((["A", "B", "E"]), metrics[1]), ((["A", "B", "C", "D", "E"]), metrics[2])]
print("\nby ground-truth move count:")
print(format_table({f"{k} moves": v for k, v in bucket_by_gt_steps(items).items()}))

# Stability over repeated runs: range, sample SD, and CV = SD/mean.
print("\nsuccess-rate stability over three repeated runs {48, 50, 52}:")
print(format_stability_table({"SR": stability_stats([48.0, 50.0, 52.0])}))
