import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orientlab.errors import ConfigError, DomainError
from orientlab.geometry import (ASD_PROFILE, TD_PROFILE, GateProfile,
                                canonical_eye_template, ear, eop, face_area,
                                frame_metrics, load_eye_map, mean_eop_frame,
                                polygon_area, smooth_array, smooth_series,
                                stream_metrics)
from orientlab.model import LandmarkFrame


def triangulated_area(points, center):
    """Fan-triangulation area oracle for polygons star-shaped around center."""
    pts = np.asarray(points, dtype=np.float64)
    a, b = pts - center, np.roll(pts, -1, axis=0) - center
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return 0.5 * np.abs(cross).sum()


def star_polygon(rng, n):
    """Random simple polygon: vertices sorted by angle around a center.

    Angular gaps are kept below pi so the center always lies inside the
    polygon, making the fan triangulation from it exact.
    """
    gaps = rng.uniform(0.6, 1.0, size=n)
    angles = np.cumsum(gaps) / gaps.sum() * 2.0 * math.pi
    radii = rng.uniform(0.5, 10.0, size=n)
    center = rng.uniform(-50.0, 50.0, size=2)
    pts = np.column_stack([center[0] + radii * np.cos(angles),
                           center[1] + radii * np.sin(angles)])
    return pts, center


class TestFaceArea:
    def test_unit_square(self):
        assert face_area((0, 0, 1, 1)) == 1.0

    def test_rectangle(self):
        assert face_area((10.0, 20.0, 110.0, 140.0)) == pytest.approx(12000.0)

    def test_degenerate(self):
        with pytest.raises(DomainError):
            face_area((5.0, 5.0, 5.0, 50.0))


class TestPolygonArea:
    def test_triangle(self):
        assert polygon_area([(0, 0), (4, 0), (0, 3)]) == pytest.approx(6.0)

    def test_square_both_orientations(self):
        sq = [(0, 0), (2, 0), (2, 2), (0, 2)]
        assert polygon_area(sq) == pytest.approx(4.0)
        assert polygon_area(sq[::-1]) == pytest.approx(4.0)

    def test_collinear_is_zero(self):
        assert polygon_area([(0, 0), (1, 1), (2, 2)]) == 0.0

    def test_too_few_points(self):
        with pytest.raises(DomainError):
            polygon_area([(0, 0), (1, 1)])

    def test_cyclic_rotation_invariant(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            pts, _ = star_polygon(rng, int(rng.integers(3, 12)))
            base = polygon_area(pts)
            shift = int(rng.integers(1, len(pts)))
            assert polygon_area(np.roll(pts, shift, axis=0)) == pytest.approx(
                base, abs=1e-9)
            assert polygon_area(pts[::-1]) == pytest.approx(base, abs=1e-9)

    def test_matches_triangulation_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            pts, center = star_polygon(rng, int(rng.integers(3, 16)))
            assert polygon_area(pts) == pytest.approx(
                triangulated_area(pts, center), abs=1e-9)


class TestEar:
    def test_canonical_template(self):
        assert ear(*canonical_eye_template(0.3)) == pytest.approx(0.3, abs=1e-12)
        assert ear(*canonical_eye_template(0.18)) == pytest.approx(0.18, abs=1e-12)

    def test_closed_eye(self):
        flat = [(0, 0), (1, 0), (2, 0), (4, 0), (2, 0), (1, 0)]
        assert ear(*flat) == 0.0

    def test_zero_span(self):
        with pytest.raises(DomainError):
            ear((1, 1), (0, 1), (0, 1), (1, 1), (0, 0), (0, 0))

    @given(
        st.floats(0.05, 0.6),
        st.floats(-math.pi, math.pi),
        st.floats(0.1, 50.0),
        st.floats(-1000.0, 1000.0),
        st.floats(-1000.0, 1000.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_similarity_invariance(self, ear_value, theta, scale, tx, ty):
        pts = np.asarray(canonical_eye_template(ear_value, width=80.0))
        rot = np.array([[math.cos(theta), -math.sin(theta)],
                        [math.sin(theta), math.cos(theta)]])
        moved = scale * pts @ rot.T + (tx, ty)
        assert ear(*moved) == pytest.approx(ear_value, abs=1e-9)


class TestEop:
    def test_anchors(self):
        assert eop(0.18) == 0.0
        assert eop(0.24) == pytest.approx(50.0)
        assert eop(0.30) == pytest.approx(100.0)

    def test_clipping(self):
        assert eop(0.05) == 0.0
        assert eop(0.9) == 100.0

    @given(st.floats(0.0, 0.6), st.floats(0.0, 0.6))
    @settings(max_examples=200, deadline=None)
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert eop(lo) <= eop(hi)

    def test_mean_is_symmetric(self):
        assert mean_eop_frame(30.0, 70.0) == 50.0
        assert mean_eop_frame(70.0, 30.0) == 50.0


def make_frame(conf=0.9, ear_value=0.3, scheme="FAN68"):
    n = 68
    marks = [(float(200 + (i % 10)), float(100 + i // 10)) for i in range(n)]
    left = canonical_eye_template(ear_value, center=(150.0, 200.0))
    right = canonical_eye_template(ear_value, center=(280.0, 200.0))
    marks[36:42] = list(left)
    marks[42:48] = list(right)
    return LandmarkFrame(frame_index=0, timestamp_ms=0.0, confidence=conf,
                         bbox=(50.0, 80.0, 400.0, 420.0),
                         landmarks=tuple(marks), scheme=scheme)


class TestFrameMetrics:
    def setup_method(self):
        self.eye_map = load_eye_map("FAN68")

    def test_open_eye_full_eop(self):
        m = frame_metrics(make_frame(ear_value=0.3), TD_PROFILE, self.eye_map)
        assert m.valid
        assert m.mean_eop == pytest.approx(100.0)
        assert m.face_area_px2 == pytest.approx(350.0 * 340.0)
        assert m.eye_area_L > 0 and m.eye_area_R > 0

    def test_confidence_gate_boundary(self):
        assert not frame_metrics(make_frame(conf=0.55), TD_PROFILE, self.eye_map).valid
        assert frame_metrics(make_frame(conf=0.60), TD_PROFILE, self.eye_map).valid
        assert frame_metrics(make_frame(conf=0.65), TD_PROFILE, self.eye_map).valid
        assert not frame_metrics(make_frame(conf=0.65), ASD_PROFILE, self.eye_map).valid

    def test_faceless_invalid(self):
        f = LandmarkFrame(frame_index=3, timestamp_ms=100.0, confidence=0.0,
                          bbox=None, landmarks=(), scheme="FAN68")
        m = frame_metrics(f, TD_PROFILE, self.eye_map)
        assert not m.valid and m.mean_eop is None

    def test_half_open(self):
        m = frame_metrics(make_frame(ear_value=0.24), TD_PROFILE, self.eye_map)
        assert m.mean_eop == pytest.approx(50.0)


class TestSmoothing:
    def test_window_one_identity(self):
        vals = [1.0, None, 3.0, 2.0]
        assert smooth_series(vals, 1) == vals

    def test_spike_removed(self):
        vals = [10.0, 10.0, 90.0, 10.0, 10.0]
        assert smooth_series(vals, 5)[2] == pytest.approx(10.0)

    def test_absent_stays_absent(self):
        out = smooth_series([1.0, None, 3.0, 4.0, 5.0], 3)
        assert out[1] is None
        assert out[0] == pytest.approx(1.0)

    def test_even_window_rejected(self):
        with pytest.raises(ConfigError):
            smooth_series([1.0, 2.0], 4)

    def test_edges_use_partial_windows(self):
        out = smooth_series([1.0, 2.0, 3.0, 4.0, 5.0], 5)
        assert out[0] == pytest.approx(2.0)  # median of 1,2,3
        assert out[2] == pytest.approx(3.0)

    @given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=60),
           st.sampled_from([1, 3, 5, 7]))
    @settings(max_examples=150, deadline=None)
    def test_bounded_by_input_range(self, vals, window):
        out = smooth_series(vals, window)
        lo, hi = min(vals), max(vals)
        for v in out:
            assert lo - 1e-9 <= v <= hi + 1e-9

    def test_smooth_array_nan_passthrough(self):
        arr = np.full(6, np.nan)
        assert np.isnan(smooth_array(arr, 5)).all()


class TestStreamMetrics:
    def test_matches_per_frame_path(self):
        from orientlab import synth
        rng = np.random.default_rng(42)
        script = synth.random_script(rng, participant_id="P01", group="TD")
        stream = synth.gen_landmark_stream(script, "P01", "TD", "v.mp4")
        eye_map = load_eye_map("FAN68")
        valid, mean_eop, smoothed = stream_metrics(stream, TD_PROFILE, eye_map)
        series = []
        for frame in stream.frames:
            m = frame_metrics(frame, TD_PROFILE, eye_map)
            assert m.valid == bool(valid[frame.frame_index])
            if m.valid:
                assert m.mean_eop == pytest.approx(
                    float(mean_eop[frame.frame_index]), abs=1e-9)
            series.append(m.mean_eop)
        resmoothed = smooth_series(series, TD_PROFILE.smooth_window)
        for a, b in zip(resmoothed, smoothed):
            if a is None:
                assert np.isnan(b)
            else:
                assert a == pytest.approx(float(b), abs=1e-9)


class TestGateProfile:
    def test_even_window_rejected(self):
        with pytest.raises(ConfigError):
            GateProfile(smooth_window=4)

    def test_bad_tau(self):
        with pytest.raises(ConfigError):
            GateProfile(tau_c=1.5)

    def test_defaults(self):
        assert TD_PROFILE.tau_c == 0.6 and TD_PROFILE.smooth_window == 5
        assert ASD_PROFILE.tau_c == 0.7 and ASD_PROFILE.smooth_window == 7
