from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import build_stream, event_kinds
from phasesim import (
    DetectorConfig,
    IntervalSample,
    Normalization,
    PhaseDetector,
    PhaseEventKind,
    PhaseState,
    Similarity,
    UtilizationClass,
    classify_similarity,
    effective_utilization,
    match_recurring_phase,
    throughput_delta,
    update_running_average,
    utilization_class,
)


class TestThroughputDelta:
    def test_doubling_is_plus_hundred(self):
        assert throughput_delta(400_000.0, 200_000.0) == 100.0

    def test_equal_is_zero(self):
        assert throughput_delta(200_000.0, 200_000.0) == 0.0

    def test_drop_is_negative(self):
        assert throughput_delta(150_000.0, 200_000.0) == -25.0

    @pytest.mark.parametrize("prev", [0.0, -1.0])
    def test_nonpositive_baseline_rejected(self, prev):
        with pytest.raises(ValueError):
            throughput_delta(1.0, prev)

    @given(
        th=st.floats(0.0, 1e9, allow_nan=False),
        prev=st.floats(1e-3, 1e9, allow_nan=False),
        scale=st.floats(1e-3, 1e3, allow_nan=False),
    )
    def test_scale_invariant(self, th, prev, scale):
        base = throughput_delta(th, prev)
        scaled = throughput_delta(th * scale, prev * scale)
        assert math.isclose(base, scaled, rel_tol=1e-9, abs_tol=1e-9)

    def test_drop_cannot_exceed_default_threshold(self):
        # With the default delta_th of 100 only increases can trigger:
        # a throughput of zero is a delta of exactly -100, never beyond.
        cfg = DetectorConfig()
        assert throughput_delta(0.0, 123.456) == -100.0
        assert abs(throughput_delta(0.0, 123.456)) <= cfg.delta_th


class TestRunningAverage:
    def test_first_sample_seeds_exactly(self):
        state = update_running_average(PhaseState(phase_id=0), 3.75)
        assert state.running_avg == 3.75
        assert state.count == 1

    def test_three_samples(self):
        state = PhaseState(phase_id=0)
        for th in (100.0, 200.0, 300.0):
            state = update_running_average(state, th)
        assert state.running_avg == pytest.approx(200.0, rel=1e-12)
        assert state.count == 3

    def test_constant_stream_stays_constant(self):
        state = PhaseState(phase_id=0)
        for _ in range(50):
            state = update_running_average(state, 1.25)
        assert state.running_avg == pytest.approx(1.25, rel=1e-12)

    @given(st.lists(st.floats(0.0, 1e6, allow_nan=False), min_size=1, max_size=100))
    def test_matches_batch_mean(self, values):
        state = PhaseState(phase_id=0)
        for v in values:
            state = update_running_average(state, v)
        batch = math.fsum(values) / len(values)
        assert math.isclose(state.running_avg, batch, rel_tol=1e-9, abs_tol=1e-9)


class TestUtilization:
    def test_effective_is_max_of_pools(self):
        assert effective_utilization(0.3, 0.8) == 0.8
        assert effective_utilization(0.9, 0.1) == 0.9

    def test_classes_use_open_interval(self):
        cfg = DetectorConfig()
        assert utilization_class(0.95, cfg) is UtilizationClass.NORMAL
        assert utilization_class(0.951, cfg) is UtilizationClass.OVER
        assert utilization_class(0.30, cfg) is UtilizationClass.NORMAL
        assert utilization_class(0.299, cfg) is UtilizationClass.UNDER


class TestClassifySimilarity:
    CFG = DetectorConfig()

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            classify_similarity(0.0, [], self.CFG)

    def test_overfull_history_rejected(self):
        with pytest.raises(ValueError):
            classify_similarity(0.0, [0.5] * 6, self.CFG)

    def test_similar_when_everything_in_band(self):
        assert classify_similarity(50.0, [0.6] * 5, self.CFG) is Similarity.SIMILAR

    def test_throughput_breach(self):
        assert classify_similarity(120.0, [0.6] * 5, self.CFG) is Similarity.THROUGHPUT

    def test_throughput_exactly_at_threshold_is_similar(self):
        assert classify_similarity(100.0, [0.6] * 5, self.CFG) is Similarity.SIMILAR
        assert classify_similarity(-100.0, [0.6] * 5, self.CFG) is Similarity.SIMILAR

    def test_full_over_window(self):
        assert classify_similarity(10.0, [0.96] * 5, self.CFG) is Similarity.OVER_UTIL

    def test_full_under_window(self):
        assert classify_similarity(10.0, [0.2] * 5, self.CFG) is Similarity.UNDER_UTIL

    def test_boundary_utils_are_in_band(self):
        assert classify_similarity(0.0, [0.95] * 5, self.CFG) is Similarity.SIMILAR
        assert classify_similarity(0.0, [0.30] * 5, self.CFG) is Similarity.SIMILAR

    def test_partial_window_never_votes(self):
        assert classify_similarity(0.0, [0.96] * 4, self.CFG) is Similarity.SIMILAR
        assert classify_similarity(0.0, [0.2] * 4, self.CFG) is Similarity.SIMILAR

    def test_one_dissenter_breaks_the_streak(self):
        history = [0.96, 0.96, 0.5, 0.96, 0.96]
        assert classify_similarity(0.0, history, self.CFG) is Similarity.SIMILAR

    def test_throughput_outranks_utilization(self):
        assert classify_similarity(150.0, [0.96] * 5, self.CFG) is Similarity.THROUGHPUT

    def test_window_of_one(self):
        cfg = DetectorConfig(util_window=1)
        assert classify_similarity(0.0, [0.96], cfg) is Similarity.OVER_UTIL
        assert classify_similarity(0.0, [0.2], cfg) is Similarity.UNDER_UTIL


class TestRecurrenceMatching:
    CFG = DetectorConfig()

    def _phase(self, pid, avg, util):
        return PhaseState(phase_id=pid, running_avg=avg, count=5, util_avg=util)

    def test_empty_table_matches_nothing(self):
        assert match_recurring_phase(4.0, 0.6, [], self.CFG) is None

    def test_match_within_band_and_class(self):
        closed = [self._phase(0, 4.1, 0.5)]
        assert match_recurring_phase(4.0, 0.6, closed, self.CFG) == 0

    def test_class_mismatch_blocks(self):
        closed = [self._phase(0, 4.0, 0.98)]
        assert match_recurring_phase(4.0, 0.6, closed, self.CFG) is None

    def test_throughput_gap_blocks(self):
        closed = [self._phase(0, 1.0, 0.6)]
        assert match_recurring_phase(2.5, 0.6, closed, self.CFG) is None

    def test_most_recent_candidate_wins(self):
        closed = [self._phase(0, 4.0, 0.6), self._phase(1, 4.2, 0.55)]
        assert match_recurring_phase(4.1, 0.6, closed, self.CFG) == 1

    def test_zero_average_phase_only_matches_zero(self):
        closed = [self._phase(0, 0.0, 0.6)]
        assert match_recurring_phase(0.0, 0.6, closed, self.CFG) is not None
        assert match_recurring_phase(1.0, 0.6, closed, self.CFG) is None


class TestPhaseDetectorObserve:
    def test_first_interval_seeds_phase_zero(self):
        det = PhaseDetector()
        stream = build_stream([1.0])
        pid, events = det.observe(stream[0])
        assert pid == 0
        assert events == []
        assert det.current_phase.running_avg == pytest.approx(1.0)

    def test_indices_must_be_contiguous(self):
        det = PhaseDetector()
        a, b = build_stream([1.0, 1.0])
        det.observe(a)
        skipped = IntervalSample(
            index=5,
            start_cycle=b.start_cycle,
            tau=b.tau,
            retired_instructions=b.retired_instructions,
            util_int=b.util_int,
            util_fp=b.util_fp,
        )
        with pytest.raises(ValueError):
            det.observe(skipped)

    def test_step_up_triggers_throughput_change(self):
        det = PhaseDetector()
        events = []
        for s in build_stream([1.0] * 10 + [2.5] * 10):
            _, evs = det.observe(s)
            events.extend(evs)
        assert event_kinds(events) == [(10, "throughput_change")]
        assert events[0].old_phase_id == 0
        assert events[0].new_phase_id == 1
        assert events[0].d_i == pytest.approx(150.0, rel=1e-12)

    def test_step_down_inside_band_is_silent(self):
        det = PhaseDetector()
        events = []
        for s in build_stream([4.0] * 10 + [1.5] * 10):
            _, evs = det.observe(s)
            events.extend(evs)
        # -62.5% never breaches a 100% band; drops surface as under-utilization.
        assert events == []

    def test_under_utilization_fires_on_fifth_interval(self):
        det = PhaseDetector()
        utils = [0.6] * 5 + [0.2] * 5
        events = []
        for s in build_stream([1.0] * 10, utils=utils):
            _, evs = det.observe(s)
            events.extend(evs)
        assert event_kinds(events) == [(9, "under_util")]

    def test_over_utilization_fires_on_fifth_interval(self):
        det = PhaseDetector()
        utils = [0.6] * 5 + [0.96] * 5
        events = []
        for s in build_stream([1.0] * 10, utils=utils):
            _, evs = det.observe(s)
            events.extend(evs)
        assert event_kinds(events) == [(9, "over_util")]

    def test_four_in_a_row_is_not_enough(self):
        det = PhaseDetector()
        utils = [0.6] * 5 + [0.96] * 4 + [0.6]
        events = []
        for s in build_stream([1.0] * 10, utils=utils):
            _, evs = det.observe(s)
            events.extend(evs)
        assert events == []

    def test_history_clears_at_phase_boundary(self):
        # A persistent condition re-fires once per full window, not every
        # interval, because the boundary resets the history.
        det = PhaseDetector(DetectorConfig(recurrence_matching=False))
        events = []
        for s in build_stream([1.0] * 15, utils=[0.96] * 15):
            _, evs = det.observe(s)
            events.extend(evs)
        assert event_kinds(events) == [(4, "over_util"), (9, "over_util"), (14, "over_util")]

    def test_throughput_outranks_utilization_on_same_interval(self):
        # The over-utilization streak completes on the same interval as the
        # throughput jump; only the higher-priority cause is reported.
        det = PhaseDetector()
        events = []
        for s in build_stream([1.0] * 5 + [2.5], utils=[0.6] + [0.96] * 5):
            _, evs = det.observe(s)
            events.extend(evs)
        assert event_kinds(events) == [(5, "throughput_change")]

    def test_zero_throughput_phase_is_stable_until_signal_returns(self):
        det = PhaseDetector()
        events = []
        ths = [0.0] * 6 + [1.0]
        for s in build_stream(ths, utils=0.6):
            _, evs = det.observe(s)
            events.extend(evs)
        assert event_kinds(events) == [(6, "throughput_change")]
        assert events[0].d_i == math.inf

    def test_recurring_phase_id_is_reused(self):
        det = PhaseDetector()
        events = []
        pids = []
        utils = [0.6] * 10 + [0.2] * 10
        for s in build_stream([1.0] * 20, utils=utils):
            pid, evs = det.observe(s)
            pids.append(pid)
            events.extend(evs)
        # First breach opens phase 1; the persisting condition then re-matches
        # phase 1 (same throughput, same utilization class) instead of minting
        # phase 2.
        assert event_kinds(events) == [
            (14, "under_util"),
            (19, "under_util"),
            (19, "phase_recurred"),
        ]
        assert pids[-1] == 1
        assert len(det.phases) == 2

    def test_recurrence_reseeds_the_running_average(self):
        det = PhaseDetector()
        utils = [0.6] * 10 + [0.2] * 10
        ths = [1.0] * 15 + [1.4] * 5
        for s in build_stream(ths, utils=utils):
            det.observe(s)
        # After the recurrence at interval 19 the phase average restarts from
        # that episode alone rather than blending in the earlier visit.
        assert det.current_phase.running_avg == pytest.approx(1.4, rel=1e-12)
        assert det.current_phase.count == 1

    def test_recurrence_can_be_disabled(self):
        det = PhaseDetector(DetectorConfig(recurrence_matching=False))
        pids = []
        utils = [0.6] * 10 + [0.2] * 10
        for s in build_stream([1.0] * 20, utils=utils):
            pid, _ = det.observe(s)
            pids.append(pid)
        assert pids[-1] == 2
        assert all(b >= a for a, b in zip(pids, pids[1:]))

    def test_rescale_phase_averages(self):
        det = PhaseDetector(DetectorConfig(normalization=Normalization.RAW))
        for s in build_stream([2.0] * 3):
            det.observe(s)
        before = det.current_phase.running_avg
        det.rescale_phase_averages(2.0)
        assert det.current_phase.running_avg == pytest.approx(2.0 * before)

    @given(
        ths=st.lists(st.floats(0.0, 8.0, allow_nan=False), min_size=1, max_size=60),
        utils=st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_determinism(self, ths, utils):
        us = utils.draw(
            st.lists(
                st.floats(0.0, 1.0, allow_nan=False),
                min_size=len(ths),
                max_size=len(ths),
            )
        )
        runs = []
        for _ in range(2):
            det = PhaseDetector()
            log = []
            for s in build_stream(ths, utils=us):
                pid, evs = det.observe(s)
                log.append((pid, tuple(event_kinds(evs))))
            runs.append(log)
        assert runs[0] == runs[1]

    @given(
        ths=st.lists(st.floats(0.0, 8.0, allow_nan=False), min_size=1, max_size=80),
        utils=st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_fresh_phase_ids_increase_monotonically(self, ths, utils):
        us = utils.draw(
            st.lists(
                st.floats(0.0, 1.0, allow_nan=False),
                min_size=len(ths),
                max_size=len(ths),
            )
        )
        det = PhaseDetector(DetectorConfig(recurrence_matching=False))
        pids = []
        for s in build_stream(ths, utils=us):
            pid, _ = det.observe(s)
            pids.append(pid)
        assert all(b >= a for a, b in zip(pids, pids[1:]))
        assert sorted(set(pids)) == list(range(len(set(pids))))

    @given(
        ths=st.lists(st.floats(0.0, 8.0, allow_nan=False), min_size=2, max_size=80),
    )
    @settings(max_examples=80, deadline=None)
    def test_throughput_event_implies_band_breach(self, ths):
        cfg = DetectorConfig()
        det = PhaseDetector(cfg)
        for s in build_stream(ths, utils=0.6):
            _, evs = det.observe(s)
            for e in evs:
                if e.kind is PhaseEventKind.THROUGHPUT_CHANGE:
                    assert abs(e.d_i) > cfg.delta_th

    @given(
        ths=st.lists(st.floats(0.01, 8.0, allow_nan=False), min_size=1, max_size=50),
        exponent=st.integers(0, 8),
    )
    @settings(max_examples=60, deadline=None)
    def test_scale_invariance_under_power_of_two(self, ths, exponent):
        # Powers of two are exact in binary floating point, so the two runs
        # must agree bit for bit, not just approximately.
        factor = 2**exponent
        base = build_stream(ths, utils=0.6)
        logs = []
        for multiplier in (1, factor):
            det = PhaseDetector()
            log = []
            for s in base:
                bumped = IntervalSample(
                    index=s.index,
                    start_cycle=s.start_cycle,
                    tau=s.tau,
                    retired_instructions=s.retired_instructions * multiplier,
                    util_int=s.util_int,
                    util_fp=s.util_fp,
                )
                pid, evs = det.observe(bumped)
                log.append((pid, tuple((e.interval_index, e.kind) for e in evs)))
            logs.append(log)
        assert logs[0] == logs[1]
