import importlib.util

import pytest

from landmark_extractor.backends import Shape68Backend, make_backend
from landmark_extractor.errors import BackendUnavailableError, ExtractorError

from conftest import blank_frame, draw_face


def has_module(name):
    return importlib.util.find_spec(name) is not None


class TestShape68:
    def test_detects_drawn_face(self):
        frame = draw_face(blank_frame())
        detections = Shape68Backend().detect(frame)
        assert len(detections) == 1
        det = detections[0]
        assert det.confidence > 0.6
        x1, y1, x2, y2 = det.bbox
        # ellipse drawn at center (320, 240) with axes (110, 150)
        assert x1 < 320 < x2 and y1 < 240 < y2
        assert det.landmarks.shape == (68, 2)
        assert (det.landmarks[:, 0] >= x1).all()
        assert (det.landmarks[:, 0] <= x2).all()

    def test_blank_frame_has_no_detections(self):
        assert Shape68Backend().detect(blank_frame()) == []

    def test_two_faces_two_detections(self):
        frame = blank_frame(1280, 480)
        draw_face(frame, center=(300, 240), axes=(100, 140))
        draw_face(frame, center=(950, 240), axes=(60, 90))
        detections = Shape68Backend().detect(frame)
        assert len(detections) == 2
        areas = sorted(d.area for d in detections)
        assert areas[1] > areas[0]

    def test_scheme(self):
        assert Shape68Backend().scheme == "FAN68"


class TestFactory:
    def test_unknown_backend(self):
        with pytest.raises(ExtractorError, match="unknown backend"):
            make_backend("dlib5")

    def test_shape68_always_available(self):
        assert isinstance(make_backend("shape68"), Shape68Backend)

    @pytest.mark.skipif(has_module("mediapipe"),
                        reason="mediapipe installed; unavailability path not testable")
    def test_mesh468_unavailable(self):
        with pytest.raises(BackendUnavailableError, match="mediapipe"):
            make_backend("mesh468")

    @pytest.mark.skipif(has_module("face_alignment"),
                        reason="face-alignment installed; unavailability path not testable")
    def test_fan68_unavailable(self):
        with pytest.raises(BackendUnavailableError, match="face-alignment"):
            make_backend("fan68")
