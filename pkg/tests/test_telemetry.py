"""Prograde, ledger, scoring and aggregation tests.

Score expectations are hand evaluations of the formula
dm_lb^2 + a/(dm_bg + b); rotation checks use hand-built matrices.
"""

import math

import numpy as np
import pytest

from orbitdeck.dynamics import rotation_about_axis, vec3
from orbitdeck.errors import (
    EmptyRunSetError,
    MissingGuardDistanceError,
    ZeroRelativeVelocityError,
)
from orbitdeck.telemetry import (
    Observation,
    ScoreLedger,
    ScoreParams,
    aggregate_runs,
    latency_table,
    performance_table,
    prograde,
    score,
)


class TestPrograde:
    def test_345_normalization(self):
        p = prograde(vec3(3, 4, 0), vec3(0, 0, 0), np.eye(3))
        np.testing.assert_allclose(p, [0.6, 0.8, 0.0], atol=1e-15)

    def test_unit_norm(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            vp, ve = rng.normal(size=3) * 100, rng.normal(size=3) * 100
            p = prograde(vp, ve, np.eye(3))
            assert abs(np.linalg.norm(p) - 1.0) < 1e-12

    def test_rotation_round_trip(self):
        rot = rotation_about_axis(vec3(0, 0, 1), math.pi / 2.0)
        p = prograde(vec3(1, 0, 0), vec3(0, 0, 0), rot)
        np.testing.assert_allclose(p, rot.T @ vec3(1, 0, 0), atol=1e-15)
        np.testing.assert_allclose(rot @ p, [1, 0, 0], atol=1e-12)

    def test_zero_relative_velocity_rejected(self):
        with pytest.raises(ZeroRelativeVelocityError):
            prograde(vec3(1, 1, 1), vec3(1, 1, 1), np.eye(3))


class TestLedger:
    def test_running_minimum(self):
        lg = ScoreLedger.for_guard()
        lg.update(100.0, 500.0)
        lg.update(50.0, 600.0)
        assert lg.dm_lb == 50.0 and lg.dm_bg == 500.0
        lg.update(120.0, 700.0)
        assert lg.dm_lb == 50.0 and lg.dm_bg == 500.0

    def test_first_update_sets_values(self):
        lg = ScoreLedger.for_guard()
        assert math.isinf(lg.dm_lb) and math.isinf(lg.dm_bg)
        lg.update(42.0, 17.0)
        assert lg.dm_lb == 42.0 and lg.dm_bg == 17.0

    def test_pe_ledger_ignores_guard(self):
        lg = ScoreLedger()
        lg.update(10.0, 5.0)
        assert lg.dm_bg is None

    def test_update_order_does_not_matter(self):
        vals = [(90.0, 30.0), (15.0, 80.0), (44.0, 12.0)]
        a, b = ScoreLedger.for_guard(), ScoreLedger.for_guard()
        for lb, bg in vals:
            a.update(lb, bg)
        for lb, bg in reversed(vals):
            b.update(lb, bg)
        assert (a.dm_lb, a.dm_bg) == (b.dm_lb, b.dm_bg)


class TestScore:
    def test_hand_evaluation(self):
        lg = ScoreLedger.for_guard()
        lg.update(100.0, 100.0)
        assert score(lg) == pytest.approx(19990.00999000999, abs=1e-6)

    def test_far_guard_limit(self):
        lg = ScoreLedger.for_guard()
        lg.update(0.0, 1e6)
        assert score(lg) == pytest.approx(0.9999999, abs=1e-7)

    def test_monotone_in_both_arguments(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            lb, bg = rng.uniform(1, 5000), rng.uniform(1, 5000)
            base = ScoreLedger(dm_lb=lb, dm_bg=bg)
            worse_lb = ScoreLedger(dm_lb=lb * 1.5, dm_bg=bg)
            worse_bg = ScoreLedger(dm_lb=lb, dm_bg=bg * 0.5)
            assert score(worse_lb) > score(base)
            assert score(worse_bg) > score(base)

    def test_first_term_is_quadratic(self):
        a = ScoreLedger(dm_lb=100.0, dm_bg=500.0)
        b = ScoreLedger(dm_lb=200.0, dm_bg=500.0)
        guard_term = 1e6 / (500.0 + 0.1)
        assert score(b) - guard_term == pytest.approx(4 * (score(a) - guard_term))

    def test_pe_ledger_rejected(self):
        lg = ScoreLedger()
        lg.update(10.0)
        with pytest.raises(MissingGuardDistanceError):
            score(lg)


class TestAggregation:
    def test_latency_stats(self):
        lg = ScoreLedger(dm_lb=10.0, dm_bg=100.0)
        report = aggregate_runs([lg], latencies_ms=[2982, 7120, 4756])
        assert report.latency_best == 2982
        assert report.latency_worst == 7120
        assert report.latency_avg == pytest.approx(4952.67, abs=0.01)

    def test_single_episode_best_equals_avg(self):
        report = aggregate_runs([ScoreLedger(dm_lb=33.0, dm_bg=50.0)])
        assert report.best_dist == report.avg_dist == 33.0

    def test_distance_means(self):
        ledgers = [ScoreLedger(dm_lb=d, dm_bg=100.0) for d in (10.0, 20.0, 30.0)]
        report = aggregate_runs(ledgers)
        assert report.best_dist == 10.0
        assert report.avg_dist == pytest.approx(20.0)
        assert report.episodes == 3

    def test_empty_run_set_rejected(self):
        with pytest.raises(EmptyRunSetError):
            aggregate_runs([])

    def test_pe_reports_skip_score_columns(self):
        lg = ScoreLedger()
        lg.update(42.0)
        report = aggregate_runs([lg], label="naive")
        assert report.avg_guard_dist is None and report.avg_score is None
        text = performance_table([report])
        assert "Best Dist. (m)" in text and "Avg. Score" in text
        assert "naive" in text

    def test_latency_table_columns(self):
        report = aggregate_runs(
            [ScoreLedger(dm_lb=1.0, dm_bg=2.0)], latencies_ms=[100.0], label="m"
        )
        text = latency_table([report])
        for col in ("Best Latency (ms)", "Worst Latency (ms)", "Average Latency (ms)"):
            assert col in text


class TestObservation:
    def test_derived_magnitudes(self):
        obs = Observation(
            time=5.0,
            fuel=90.0,
            rel_position=vec3(3, 4, 0),
            rel_velocity=vec3(0, 0, 2),
            prograde=vec3(0, 0, -1),
            guard_rel_position=vec3(0, 600, 0),
        )
        assert obs.distance == pytest.approx(5.0)
        assert obs.speed == pytest.approx(2.0)
        assert obs.guard_distance == pytest.approx(600.0)

    def test_guard_absent(self):
        obs = Observation(
            time=0.0,
            fuel=1.0,
            rel_position=vec3(1, 0, 0),
            rel_velocity=vec3(1, 0, 0),
            prograde=None,
        )
        assert obs.guard_distance is None
