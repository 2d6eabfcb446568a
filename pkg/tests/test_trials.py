import numpy as np
import pytest

from orientlab.model import ManifestEvent, SessionManifest
from orientlab.trials import (compute_trial_metrics, detect_response, duration,
                              latency, segment_trials, trial_mean_eop)


def make_stream(n_frames, fps=30.0, pid="P01"):
    from orientlab.model import LandmarkStream
    idx = np.arange(n_frames, dtype=np.int64)
    return LandmarkStream(
        participant_id=pid, group="TD", fps=fps, scheme="FAN68",
        source_video="v.mp4",
        frame_index=idx,
        timestamp_ms=idx * (1000.0 / fps),
        confidence=np.full(n_frames, 0.9),
        bbox=np.tile([0.0, 0.0, 100.0, 100.0], (n_frames, 1)),
        landmarks=np.zeros((n_frames, 68, 2)),
    )


def make_manifest(events, pid="P01"):
    return SessionManifest(
        participant_id=pid, group="TD",
        events=tuple(ManifestEvent(s, t, o) for s, t, o in events))


class TestSegmentTrials:
    def test_full_window(self):
        stream = make_stream(600)  # 20 s at 30 fps
        windows = segment_trials(stream, make_manifest([("SM", 1, 2000.0)]))
        (w,) = windows
        assert w.onset_ms == 2000.0
        assert w.end_ms == 12000.0
        assert w.first_index == 60
        assert w.last_index == 360
        assert not w.empty

    def test_clipped_by_next_onset(self):
        stream = make_stream(900)
        windows = segment_trials(
            stream, make_manifest([("SM", 1, 1000.0), ("SM", 2, 5000.0)]))
        assert windows[0].end_ms == 5000.0
        assert windows[0].last_index == windows[1].first_index

    def test_clipped_by_stream_end(self):
        stream = make_stream(150)  # 5 s
        (w,) = segment_trials(stream, make_manifest([("NR", 3, 3000.0)]))
        assert w.end_ms == pytest.approx(150 * 1000.0 / 30.0)
        assert w.last_index == 150
        assert w.span_ms == pytest.approx(2000.0)

    def test_onset_past_stream_end_is_empty(self):
        stream = make_stream(30)
        (w,) = segment_trials(stream, make_manifest([("NR", 1, 60000.0)]))
        assert w.empty
        assert w.span_ms == 0.0

    def test_participant_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            segment_trials(make_stream(30, pid="A"),
                           make_manifest([("SM", 1, 0.0)], pid="B"))

    def test_order_independent_of_event_listing(self):
        stream = make_stream(1200)
        events = [("SM", 1, 1000.0), ("SW", 1, 13000.0), ("NR", 1, 26000.0)]
        a = segment_trials(stream, make_manifest(events))
        b = segment_trials(stream, make_manifest(list(reversed(events))))
        assert sorted(a, key=lambda w: w.onset_ms) == sorted(b, key=lambda w: w.onset_ms)


class TestDetectResponse:
    def test_immediate(self):
        assert detect_response([True] * 5, 3) == (True, 0)

    def test_delayed(self):
        v = [False, False, True, True, True, False]
        assert detect_response(v, 3) == (True, 2)

    def test_interrupted_runs_do_not_count(self):
        v = [True, True, False, True, True, False, True, True]
        assert detect_response(v, 3) == (False, None)

    def test_k_one(self):
        assert detect_response([False, True], 1) == (True, 1)

    def test_empty(self):
        assert detect_response([], 3) == (False, None)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            detect_response([True], 0)


class TestLatency:
    def test_simple(self):
        assert latency(2000.0, 3700.0) == pytest.approx(1.7)

    def test_floor_at_zero(self):
        assert latency(2000.0, 1999.9) == 0.0

    def test_same_frame(self):
        assert latency(500.0, 500.0) == 0.0


class TestDuration:
    def test_solid_run(self):
        assert duration([True] * 60, 30.0) == pytest.approx(2.0)

    def test_bridged_gap(self):
        v = [True] * 60 + [False] * 2 + [True] * 60
        assert duration(v, 30.0, gap_tolerance_frames=2) == pytest.approx(122 / 30.0)

    def test_unbridged_gap(self):
        v = [True] * 60 + [False] * 30 + [True] * 120
        assert duration(v, 30.0, gap_tolerance_frames=2) == pytest.approx(4.0)

    def test_leading_trailing_invalid_ignored(self):
        v = [False] * 5 + [True] * 30 + [False] * 5
        assert duration(v, 30.0) == pytest.approx(1.0)

    def test_no_valid_frames(self):
        assert duration([False] * 100, 30.0) == 0.0

    def test_gap_tolerance_monotone(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v = rng.random(120) < 0.6
            durs = [duration(v, 30.0, gap_tolerance_frames=g) for g in range(5)]
            assert durs == sorted(durs)


class TestTrialMeanEop:
    def test_median_over_valid(self):
        eop = np.array([10.0, 90.0, 50.0, 70.0])
        valid = np.array([True, False, True, True])
        assert trial_mean_eop(eop, valid) == pytest.approx(50.0)

    def test_none_when_no_valid(self):
        assert trial_mean_eop(np.array([1.0, 2.0]), np.array([False, False])) is None

    def test_constant(self):
        assert trial_mean_eop(np.full(9, 42.0), np.ones(9, dtype=bool)) == 42.0


class TestComputeTrialMetrics:
    def test_censored_trial(self):
        stream = make_stream(600)
        (w,) = segment_trials(stream, make_manifest([("NM", 2, 2000.0)]))
        valid = np.zeros(600, dtype=bool)
        eop = np.full(600, np.nan)
        m = compute_trial_metrics(w, "TD", valid, eop, stream.timestamp_ms, 30.0)
        assert not m.responded
        assert m.latency_s is None
        assert m.duration_s == 0.0
        assert m.mean_eop is None
        assert m.valid_frame_fraction == 0.0

    def test_full_response(self):
        stream = make_stream(600)
        (w,) = segment_trials(stream, make_manifest([("SM", 1, 2000.0)]))
        valid = np.ones(600, dtype=bool)
        eop = np.full(600, 80.0)
        m = compute_trial_metrics(w, "TD", valid, eop, stream.timestamp_ms, 30.0)
        assert m.responded
        assert m.latency_s == pytest.approx(0.0, abs=1e-9)
        assert m.duration_s == pytest.approx(10.0)
        assert m.mean_eop == pytest.approx(80.0)
        assert m.valid_frame_fraction == 1.0

    def test_delayed_response_latency(self):
        stream = make_stream(600)
        (w,) = segment_trials(stream, make_manifest([("SW", 3, 2000.0)]))
        valid = np.zeros(600, dtype=bool)
        valid[105:600] = True  # first valid frame at 3500 ms
        eop = np.where(valid, 60.0, np.nan)
        m = compute_trial_metrics(w, "TD", valid, eop, stream.timestamp_ms, 30.0)
        assert m.responded
        assert m.latency_s == pytest.approx(1.5)
