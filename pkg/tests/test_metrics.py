import math
import random

import pytest
from hypothesis import given, strategies as st

from daco.errors import SceneError, UnreachableError
from daco.metrics import (
    AggregateMetrics,
    EpisodeMetrics,
    aggregate,
    bucket_by_gt_steps,
    format_stability_table,
    format_table,
    score_episode,
    stability,
    stability_stats,
)

from conftest import brute_score, random_connected_graph, random_walk


class TestScoreEpisode:
    def test_optimal_path(self, t5):
        m = score_episode(t5, ["A", "B", "E"], "E")
        assert m.ne == 0.0
        assert m.success and m.oracle_success
        assert m.path_length == pytest.approx(8.0)
        assert m.shortest_length == pytest.approx(8.0)
        assert m.spl_contribution == pytest.approx(1.0)

    def test_detour_halves_spl(self, t5):
        m = score_episode(t5, ["A", "B", "C", "B", "E"], "E")
        assert m.success
        assert m.path_length == pytest.approx(16.0)
        assert m.spl_contribution == pytest.approx(0.5)

    def test_failures(self, t5):
        m = score_episode(t5, ["A", "B"], "D")
        assert m.ne == pytest.approx(8.0)
        assert not m.success
        assert m.spl_contribution == 0.0
        m2 = score_episode(t5, ["A", "B"], "C")
        assert m2.ne == pytest.approx(4.0)
        assert not m2.success
        assert not m2.oracle_success  # best visited distance is 4.0 > 3

    def test_parse_failure_scored_as_failed(self, t5):
        m = score_episode(t5, ["A", "B", "E"], "E", termination="parse_failure")
        assert m.ne == 0.0
        assert not m.success
        assert m.spl_contribution == 0.0
        assert m.oracle_success  # the trajectory still reached the goal

    def test_degenerate_start_on_goal(self, t5):
        m = score_episode(t5, ["A"], "A")
        assert m.success
        assert m.spl_contribution == 1.0

    def test_non_adjacent_jump_rejected(self, t5):
        with pytest.raises(SceneError, match="non-adjacent"):
            score_episode(t5, ["A", "C"], "C")

    def test_unreachable_goal(self):
        from daco.scene import scene_from_dict

        graph = scene_from_dict(
            {
                "scan": "split",
                "viewpoints": [
                    {"id": "a", "x": 0, "y": 0, "z": 0, "floor": 0},
                    {"id": "b", "x": 9, "y": 0, "z": 0, "floor": 0},
                ],
                "edges": [],
            }
        )
        with pytest.raises(UnreachableError):
            score_episode(graph, ["a"], "b")

    @given(st.integers(min_value=0, max_value=300))
    def test_matches_brute_force_scorer(self, seed):
        rng = random.Random(seed)
        graph = random_connected_graph(rng)
        path = random_walk(rng, graph)
        goal = rng.choice(sorted(graph.viewpoints))
        m = score_episode(graph, path, goal)
        ne, success, oracle, spl, traversed, shortest = brute_score(graph, path, goal)
        assert m.ne == ne
        assert m.success == success
        assert m.oracle_success == oracle
        assert abs(m.spl_contribution - spl) <= 1e-12
        assert m.path_length == traversed
        assert m.shortest_length == shortest


def em(ne=0.0, success=True, oracle=True, spl=1.0, p=1.0, shortest=1.0):
    return EpisodeMetrics(
        ne=ne, success=success, oracle_success=oracle, spl_contribution=spl,
        path_length=p, shortest_length=shortest,
    )


class TestAggregate:
    def test_mean_spl(self):
        agg = aggregate([em(spl=1.0), em(success=False, spl=0.0)])
        assert agg.spl == pytest.approx(50.0)

    def test_all_success_at_goal(self):
        agg = aggregate([em(), em(), em()])
        assert agg.sr == 100.0
        assert agg.ne == 0.0

    def test_sr_and_osr_counting(self):
        agg = aggregate([em(), em(success=False, spl=0.0, oracle=True, ne=5.0)])
        assert agg.sr == pytest.approx(50.0)
        assert agg.osr == pytest.approx(100.0)

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            aggregate([])

    @given(
        st.lists(
            st.tuples(st.booleans(), st.booleans(), st.floats(min_value=0, max_value=1)),
            min_size=1,
            max_size=30,
        )
    )
    def test_invariants_hold(self, rows):
        metrics = []
        for success, oracle_extra, spl in rows:
            oracle = success or oracle_extra  # success implies oracle success
            metrics.append(
                em(ne=0.0 if success else 9.0, success=success, oracle=oracle,
                   spl=spl if success else 0.0)
            )
        agg = aggregate(metrics)
        assert agg.sr <= agg.osr + 1e-9
        assert agg.spl <= agg.sr + 1e-9


class TestBuckets:
    def test_grouping_by_gt_moves(self):
        items = [
            (["a"] * 6, em()),   # 5 moves
            (["a"] * 6, em()),
            (["a"] * 8, em()),   # 7 moves
        ]
        buckets = bucket_by_gt_steps(items)
        assert sorted(buckets) == [5, 7]
        assert buckets[5].count == 2
        assert buckets[7].count == 1

    def test_single_bucket_equals_global(self):
        metrics = [em(spl=0.5), em(success=False, spl=0.0)]
        items = [(["a", "b", "c"], m) for m in metrics]
        assert bucket_by_gt_steps(items)[2] == aggregate(metrics)

    def test_empty_input(self):
        assert bucket_by_gt_steps([]) == {}


class TestStability:
    def test_table7_arithmetic(self):
        stats = stability_stats([48.0, 50.0, 52.0])
        assert stats.mean == pytest.approx(50.0)
        assert stats.range == pytest.approx(4.0)
        assert stats.sd == pytest.approx(2.0)
        assert stats.cv == pytest.approx(4.00)

    def test_identical_runs(self):
        stats = stability_stats([40.0, 40.0, 40.0])
        assert stats.range == 0.0
        assert stats.sd == 0.0
        assert stats.cv == 0.0

    def test_two_runs_sample_sd(self):
        stats = stability_stats([30.0, 32.0])
        assert stats.mean == pytest.approx(31.0)
        assert stats.range == pytest.approx(2.0)
        assert stats.sd == pytest.approx(math.sqrt(2.0))

    def test_fewer_than_two_runs_errors(self):
        with pytest.raises(ValueError):
            stability_stats([50.0])

    def test_cv_undefined_for_zero_mean(self):
        assert stability_stats([0.0, 0.0]).cv is None

    def test_per_metric_over_runs(self):
        runs = [
            AggregateMetrics(ne=5.0, osr=60.0, sr=48.0, spl=40.0, count=10),
            AggregateMetrics(ne=5.0, osr=62.0, sr=50.0, spl=41.0, count=10),
            AggregateMetrics(ne=5.0, osr=64.0, sr=52.0, spl=42.0, count=10),
        ]
        stats = stability(runs)
        assert set(stats) == {"NE", "OSR", "SR", "SPL"}
        assert stats["SR"].mean == pytest.approx(50.0)
        assert stats["SR"].cv == pytest.approx(4.00)
        assert stats["NE"].sd == 0.0


class TestReportFormatting:
    def test_table_column_order(self):
        table = format_table({"overall": AggregateMetrics(ne=5.2, osr=63.7, sr=50.5, spl=39.7, count=216)})
        header = table.splitlines()[0]
        assert header.index("NE") < header.index("OSR") < header.index("SR") < header.index("SPL")
        assert "50.5" in table

    def test_stability_table_mentions_sample_sd(self):
        stats = {"SR": stability_stats([48.0, 50.0, 52.0])}
        text = format_stability_table(stats)
        assert "sample standard deviation" in text
        assert "4.00" in text
