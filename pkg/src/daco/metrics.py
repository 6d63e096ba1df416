"""Navigation metrics: per-episode scoring, aggregates, step buckets, stability.

Success means ending within the threshold distance (default 3 m geodesic) of
the goal; the path-efficiency term discounts success by shortest/actual
trajectory length. Bucket keys count ground-truth moves (path edges, not
nodes). Stability statistics use the sample standard deviation (n-1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SceneError
from .scene import SceneGraph, shortest_path_length

SUCCESS_THRESHOLD_M = 3.0

METRIC_NAMES = ("NE", "OSR", "SR", "SPL")


@dataclass(frozen=True)
class EpisodeMetrics:
    ne: float
    success: bool
    oracle_success: bool
    spl_contribution: float
    path_length: float      # meters actually traversed
    shortest_length: float  # geodesic start-to-goal


@dataclass(frozen=True)
class AggregateMetrics:
    ne: float
    osr: float  # percent
    sr: float   # percent
    spl: float  # percent
    count: int


@dataclass(frozen=True)
class StabilityStats:
    mean: float
    range: float
    sd: float
    cv: float | None  # percent; undefined for non-positive means


def score_episode(
    graph: SceneGraph,
    path: Sequence[str],
    goal: str,
    termination: str = "stopped",
    threshold: float = SUCCESS_THRESHOLD_M,
) -> EpisodeMetrics:
    """Score one trajectory (node sequence, start first) against a goal.

    A `parse_failure` termination is scored as a failure regardless of where
    the agent happened to be standing.
    """
    if not path:
        raise ValueError("cannot score an empty trajectory")
    for vid in path:
        graph.viewpoint(vid)
    graph.viewpoint(goal)

    ne = shortest_path_length(graph, path[-1], goal)
    traversed = 0.0
    for a, b in zip(path, path[1:]):
        try:
            traversed += graph.edge_length(a, b)
        except SceneError as exc:
            raise SceneError(f"trajectory jumps between non-adjacent viewpoints: {exc}") from exc
    shortest = shortest_path_length(graph, path[0], goal)

    success = ne <= threshold and termination != "parse_failure"
    oracle_success = min(shortest_path_length(graph, v, goal) for v in path) <= threshold
    if success:
        denom = max(shortest, traversed)
        spl = 1.0 if denom == 0.0 else shortest / denom
    else:
        spl = 0.0
    return EpisodeMetrics(
        ne=ne,
        success=success,
        oracle_success=oracle_success,
        spl_contribution=spl,
        path_length=traversed,
        shortest_length=shortest,
    )


def aggregate(metrics: Sequence[EpisodeMetrics]) -> AggregateMetrics:
    if not metrics:
        raise ValueError("cannot aggregate zero episodes")
    ne = float(np.mean([m.ne for m in metrics]))
    sr = float(np.mean([1.0 if m.success else 0.0 for m in metrics])) * 100.0
    osr = float(np.mean([1.0 if m.oracle_success else 0.0 for m in metrics])) * 100.0
    spl = float(np.mean([m.spl_contribution for m in metrics])) * 100.0
    # stopping can only lose oracle successes, and the efficiency term is capped at 1
    assert sr <= osr + 1e-9, f"SR {sr} exceeded OSR {osr}"
    assert spl <= sr + 1e-9, f"SPL {spl} exceeded SR {sr}"
    return AggregateMetrics(ne=ne, osr=osr, sr=sr, spl=spl, count=len(metrics))


def bucket_by_gt_steps(
    items: Iterable[tuple[Sequence[str], EpisodeMetrics]],
) -> dict[int, AggregateMetrics]:
    """Group by ground-truth move count (|gt_path| - 1); empty buckets are absent."""
    groups: dict[int, list[EpisodeMetrics]] = {}
    for gt_path, metric in items:
        groups.setdefault(len(gt_path) - 1, []).append(metric)
    return {steps: aggregate(ms) for steps, ms in sorted(groups.items())}


def stability_stats(values: Sequence[float]) -> StabilityStats:
    if len(values) < 2:
        raise ValueError("stability statistics need at least 2 runs")
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    return StabilityStats(
        mean=mean,
        range=float(arr.max() - arr.min()),
        sd=sd,
        cv=(sd / mean * 100.0) if mean > 0 else None,
    )


def stability(runs: Sequence[AggregateMetrics]) -> dict[str, StabilityStats]:
    """Per-metric mean/range/SD/CV over repeated runs of the same suite."""
    if len(runs) < 2:
        raise ValueError("stability statistics need at least 2 runs")
    series = {
        "NE": [r.ne for r in runs],
        "OSR": [r.osr for r in runs],
        "SR": [r.sr for r in runs],
        "SPL": [r.spl for r in runs],
    }
    return {name: stability_stats(vals) for name, vals in series.items()}


def format_table(rows: Mapping[str, AggregateMetrics]) -> str:
    """Aligned text table in NE / OSR / SR / SPL column order."""
    name_width = max([len(name) for name in rows] + [len("group")])
    header = f"{'group':<{name_width}}  {'NE':>7}  {'OSR':>7}  {'SR':>7}  {'SPL':>7}  {'n':>5}"
    lines = [header, "-" * len(header)]
    for name, agg in rows.items():
        lines.append(
            f"{name:<{name_width}}  {agg.ne:>7.2f}  {agg.osr:>7.1f}  {agg.sr:>7.1f}  {agg.spl:>7.1f}  {agg.count:>5d}"
        )
    return "\n".join(lines)


def format_stability_table(stats: Mapping[str, StabilityStats]) -> str:
    header = f"{'metric':<8}  {'mean':>8}  {'range':>8}  {'SD':>8}  {'CV%':>8}"
    lines = [header, "-" * len(header), "(SD is the sample standard deviation, n-1 denominator)"]
    for name, s in stats.items():
        cv = f"{s.cv:>8.2f}" if s.cv is not None else f"{'n/a':>8}"
        lines.append(f"{name:<8}  {s.mean:>8.2f}  {s.range:>8.2f}  {s.sd:>8.2f}  {cv}")
    return "\n".join(lines)
