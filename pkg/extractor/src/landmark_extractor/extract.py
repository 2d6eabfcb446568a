"""Video decode loop: one stream record per decoded frame, in order.

All frames are emitted — faceless ones with confidence 0 — and no
confidence gating happens here; gating belongs to the analysis engine so
the raw record stays auditable.  When several faces are detected the
largest box wins and the competing count goes to the sidecar log.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import cv2

from .errors import ExtractorError
from .stream_writer import StreamWriter

DEFAULT_FPS = 30.0


@dataclass(frozen=True)
class ExtractionSummary:
    video: str
    backend: str
    scheme: str
    fps: float
    n_frames: int
    container_frame_count: int
    n_faceless: int
    n_multi_face_frames: int
    max_competing_faces: int


def extract_video(
    video_path,
    backend,
    participant_id: str,
    group: str,
    out_path,
    backend_name: str = "",
    fps_override: Optional[float] = None,
    log_path=None,
) -> ExtractionSummary:
    """Run a backend over every frame of a video and write the stream file.

    Timestamps come from the container clock: frame_index times the
    container-reported frame interval (decode order is the clock at a
    constant frame rate).  The sidecar log records detection quality
    counters next to the stream file.
    """
    video_path = Path(video_path)
    cap = cv2.VideoCapture(str(video_path))
    if not cap.isOpened():
        raise ExtractorError(f"cannot open video {video_path}")
    try:
        fps = fps_override or float(cap.get(cv2.CAP_PROP_FPS)) or DEFAULT_FPS
        container_count = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
        dt = 1000.0 / fps

        n_faceless = 0
        n_multi = 0
        max_competing = 0
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = out_path.with_name(out_path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            writer = StreamWriter(fh, participant_id, group, fps,
                                  backend.scheme, video_path.name)
            index = 0
            while True:
                ok, frame = cap.read()
                if not ok:
                    break
                detections = backend.detect(frame)
                ts = index * dt
                if not detections:
                    n_faceless += 1
                    writer.write_frame(index, ts, 0.0, None, None)
                else:
                    if len(detections) > 1:
                        n_multi += 1
                        max_competing = max(max_competing, len(detections))
                    best = max(detections, key=lambda d: d.area)
                    writer.write_frame(index, ts, best.confidence,
                                       best.bbox, best.landmarks)
                index += 1
        if index == 0:
            tmp.unlink(missing_ok=True)
            raise ExtractorError(f"no decodable frames in {video_path}")
        tmp.replace(out_path)
    finally:
        cap.release()

    summary = ExtractionSummary(
        video=str(video_path),
        backend=backend_name or type(backend).__name__,
        scheme=backend.scheme,
        fps=fps,
        n_frames=index,
        container_frame_count=container_count,
        n_faceless=n_faceless,
        n_multi_face_frames=n_multi,
        max_competing_faces=max_competing,
    )
    log_path = Path(log_path) if log_path else out_path.with_suffix(".log.json")
    log_path.write_text(json.dumps(asdict(summary), indent=2, sort_keys=True) + "\n")
    return summary
