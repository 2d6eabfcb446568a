"""Line-delimited landmark-stream serialization.

Matches the analysis engine's stream file interface: one JSON header line
(participant_id, group, fps, scheme, source_video) followed by one JSON
object per frame (frame_index, timestamp_ms, confidence, bbox, landmarks).
Faceless frames carry a null bbox, confidence 0, and empty landmarks.
"""

from __future__ import annotations

import json
from typing import IO, Optional, Sequence

import numpy as np

from .errors import ExtractorError

SCHEME_POINTS = {"MESH468": 468, "FAN68": 68}
GROUPS = ("TD", "ASD")


class StreamWriter:
    """Incremental writer so long videos never need a full in-memory pass."""

    def __init__(self, fh: IO[str], participant_id: str, group: str,
                 fps: float, scheme: str, source_video: str):
        if scheme not in SCHEME_POINTS:
            raise ExtractorError(f"unknown scheme {scheme!r}")
        if group not in GROUPS:
            raise ExtractorError(f"unknown group {group!r}")
        if not fps > 0:
            raise ExtractorError("fps must be positive")
        self._fh = fh
        self._n_points = SCHEME_POINTS[scheme]
        self._next_index = 0
        self._last_ts: Optional[float] = None
        header = {"participant_id": participant_id, "group": group,
                  "fps": float(fps), "scheme": scheme,
                  "source_video": source_video}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")

    def write_frame(self, frame_index: int, timestamp_ms: float,
                    confidence: float,
                    bbox: Optional[Sequence[float]],
                    landmarks: Optional[np.ndarray]) -> None:
        if frame_index != self._next_index:
            raise ExtractorError(
                f"frame {frame_index} out of order (expected {self._next_index})")
        if self._last_ts is not None and timestamp_ms <= self._last_ts:
            raise ExtractorError(f"timestamp {timestamp_ms} not increasing")
        if bbox is None:
            rec_bbox, rec_marks, confidence = None, [], 0.0
        else:
            if landmarks is None or len(landmarks) != self._n_points:
                raise ExtractorError(
                    f"expected {self._n_points} landmarks, got "
                    f"{0 if landmarks is None else len(landmarks)}")
            x1, y1, x2, y2 = (float(v) for v in bbox)
            if not (x2 > x1 and y2 > y1):
                raise ExtractorError(f"degenerate bbox {bbox}")
            rec_bbox = [x1, y1, x2, y2]
            rec_marks = [float(v) for v in np.asarray(landmarks).ravel()]
        rec = {"frame_index": int(frame_index),
               "timestamp_ms": float(timestamp_ms),
               "confidence": float(min(max(confidence, 0.0), 1.0)),
               "bbox": rec_bbox,
               "landmarks": rec_marks}
        self._fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
        self._next_index += 1
        self._last_ts = timestamp_ms

    @property
    def frames_written(self) -> int:
        return self._next_index
