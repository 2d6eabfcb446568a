"""Face-landmark backends behind a common detection interface.

``mesh468`` (MediaPipe Face Mesh) and ``fan68`` (S3FD + FAN) wrap their
optional third-party packages and raise :class:`BackendUnavailableError`
when those are not installed.  ``shape68`` is a dependency-light classical
fallback — contour-based face localization plus a fixed FAN-68 landmark
template — intended for integration testing and environments without the
neural backends; its landmark positions are schematic, not fitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import cv2
import numpy as np

from .errors import BackendUnavailableError, ExtractorError

BACKENDS = ("mesh468", "fan68", "shape68")


@dataclass(frozen=True)
class Detection:
    bbox: Tuple[float, float, float, float]  # x1, y1, x2, y2
    landmarks: np.ndarray                    # (L, 2) float64
    confidence: float

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.bbox
        return (x2 - x1) * (y2 - y1)


def _eye_template(center, width, ear=0.30):
    """Six FAN-style eye points (p1..p4 corners, lids at +-width/4)."""
    cx, cy = center
    h = ear * width / 2.0
    w = width / 2.0
    return [(cx - w, cy), (cx - w / 2, cy + h), (cx + w / 2, cy + h),
            (cx + w, cy), (cx + w / 2, cy - h), (cx - w / 2, cy - h)]


def fan68_template(bbox: Tuple[float, float, float, float]) -> np.ndarray:
    """Schematic 68-point layout scaled into a face box.

    Indices follow the FAN convention for the regions the analysis engine
    reads (36-41 left eye, 42-47 right eye); the remaining points sit on a
    plausible grid so downstream area computations stay well-defined.
    """
    x1, y1, x2, y2 = bbox
    w, h = x2 - x1, y2 - y1
    marks = np.zeros((68, 2))
    for i in range(68):
        marks[i] = (x1 + 0.1 * w + (i % 10) * 0.08 * w,
                    y1 + 0.1 * h + (i // 10) * 0.12 * h)
    eye_w = 0.22 * w
    marks[36:42] = _eye_template((x1 + 0.32 * w, y1 + 0.38 * h), eye_w)
    marks[42:48] = _eye_template((x1 + 0.68 * w, y1 + 0.38 * h), eye_w)
    return marks


class Shape68Backend:
    """Classical localizer: largest high-contrast blob against the frame
    border background, with template landmarks.  Deterministic and offline.
    """

    scheme = "FAN68"

    def __init__(self, diff_threshold: int = 30, min_area_frac: float = 0.01):
        self.diff_threshold = diff_threshold
        self.min_area_frac = min_area_frac

    def detect(self, frame_bgr: np.ndarray) -> List[Detection]:
        gray = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2GRAY)
        border = np.concatenate([gray[0], gray[-1], gray[:, 0], gray[:, -1]])
        bg = float(np.median(border))
        mask = (np.abs(gray.astype(np.int16) - bg) > self.diff_threshold).astype(np.uint8)
        mask = cv2.morphologyEx(mask, cv2.MORPH_OPEN, np.ones((5, 5), np.uint8))
        contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL,
                                       cv2.CHAIN_APPROX_SIMPLE)
        min_area = self.min_area_frac * gray.size
        out: List[Detection] = []
        for c in contours:
            area = cv2.contourArea(c)
            if area < min_area:
                continue
            x, y, w, h = cv2.boundingRect(c)
            bbox = (float(x), float(y), float(x + w), float(y + h))
            # confidence from how well the blob fills its box: an elliptical
            # head fills ~pi/4; speckle and edge noise fill far less
            fill = area / (w * h)
            conf = float(min(max(0.35 + 0.7 * fill, 0.0), 1.0))
            out.append(Detection(bbox=bbox, landmarks=fan68_template(bbox),
                                 confidence=conf))
        return out


class Mesh468Backend:
    """MediaPipe Face Mesh (468 points) with its short-range face detector
    providing the per-frame confidence score."""

    scheme = "MESH468"

    def __init__(self, static_image_mode: bool = False, max_faces: int = 4):
        try:
            import mediapipe as mp
        except ImportError:
            raise BackendUnavailableError(
                "mesh468 backend requires the 'mediapipe' package") from None
        self._mp = mp
        self._mesh = mp.solutions.face_mesh.FaceMesh(
            static_image_mode=static_image_mode, max_num_faces=max_faces,
            refine_landmarks=False, min_detection_confidence=0.2)
        self._detector = mp.solutions.face_detection.FaceDetection(
            model_selection=0, min_detection_confidence=0.2)

    def detect(self, frame_bgr: np.ndarray) -> List[Detection]:
        h, w = frame_bgr.shape[:2]
        rgb = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2RGB)
        mesh = self._mesh.process(rgb)
        if not mesh.multi_face_landmarks:
            return []
        det = self._detector.process(rgb)
        scores = [d.score[0] for d in (det.detections or [])]
        default = max(scores) if scores else 0.9
        out: List[Detection] = []
        for face in mesh.multi_face_landmarks:
            pts = np.array([[lm.x * w, lm.y * h] for lm in face.landmark])
            x1, y1 = pts.min(axis=0)
            x2, y2 = pts.max(axis=0)
            out.append(Detection(bbox=(float(x1), float(y1), float(x2), float(y2)),
                                 landmarks=pts, confidence=float(default)))
        return out


class Fan68Backend:
    """S3FD face detection + FAN 2-D landmarks (68 points)."""

    scheme = "FAN68"

    def __init__(self, device: str = "cpu"):
        try:
            import face_alignment
        except ImportError:
            raise BackendUnavailableError(
                "fan68 backend requires the 'face-alignment' package") from None
        self._fa = face_alignment.FaceAlignment(
            face_alignment.LandmarksType.TWO_D, device=device,
            face_detector="sfd")

    def detect(self, frame_bgr: np.ndarray) -> List[Detection]:
        rgb = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2RGB)
        boxes = self._fa.face_detector.detect_from_image(rgb.copy())
        boxes = [b for b in boxes if b[4] > 0.2]
        if not boxes:
            return []
        marks = self._fa.get_landmarks_from_image(
            rgb, detected_faces=[b[:4] for b in boxes])
        out: List[Detection] = []
        for box, lm in zip(boxes, marks or []):
            if lm is None:
                continue
            out.append(Detection(
                bbox=(float(box[0]), float(box[1]), float(box[2]), float(box[3])),
                landmarks=np.asarray(lm, dtype=np.float64),
                confidence=float(box[4])))
        return out


def make_backend(name: str, **kwargs):
    if name == "shape68":
        return Shape68Backend(**kwargs)
    if name == "mesh468":
        return Mesh468Backend(**kwargs)
    if name == "fan68":
        return Fan68Backend(**kwargs)
    raise ExtractorError(f"unknown backend {name!r}; choose from {BACKENDS}")
