"""Landmark-stream and session-manifest data model, file formats, and validation.

Stream files are UTF-8 line-delimited JSON: one header object followed by one
object per frame.  Manifest files follow the same pattern with a header and one
object per stimulus event.  Parsed objects are immutable; frames are stored in
numpy arrays so multi-thousand-frame videos stay cheap to hold and process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from .errors import FormatError

SCHEME_POINTS = {"MESH468": 468, "FAN68": 68}
GROUPS = ("TD", "ASD")
STIMULI = ("SM", "SW", "NM", "NW", "NR")
TURNS = (1, 2, 3)
MAX_EVENTS = 15

_HEADER_KEYS = ("participant_id", "group", "fps", "scheme", "source_video")
_FRAME_KEYS = ("frame_index", "timestamp_ms", "confidence", "bbox", "landmarks")


@dataclass(frozen=True)
class LandmarkFrame:
    """A single decoded video frame.

    ``bbox`` is ``None`` and ``landmarks`` empty for faceless frames; otherwise
    both are fully populated.  There is no third state.
    """

    frame_index: int
    timestamp_ms: float
    confidence: float
    bbox: Optional[Tuple[float, float, float, float]]
    landmarks: Tuple[Tuple[float, float], ...]
    scheme: str

    @property
    def faceless(self) -> bool:
        return self.bbox is None


@dataclass(frozen=True, eq=False)
class LandmarkStream:
    """One video's worth of frames plus identifying header fields.

    Frame data lives in parallel arrays indexed by row; faceless frames carry
    NaN bbox/landmark rows and confidence 0.  ``frame(i)`` materializes a
    :class:`LandmarkFrame` view of row ``i``.
    """

    participant_id: str
    group: str
    fps: float
    scheme: str
    source_video: str
    frame_index: np.ndarray   # (n,) int64
    timestamp_ms: np.ndarray  # (n,) float64
    confidence: np.ndarray    # (n,) float64
    bbox: np.ndarray          # (n, 4) float64, NaN rows when faceless
    landmarks: np.ndarray     # (n, L, 2) float64, NaN rows when faceless

    def __len__(self) -> int:
        return len(self.frame_index)

    @property
    def faceless(self) -> np.ndarray:
        """Boolean array, True where no face was detected."""
        return np.isnan(self.bbox[:, 0])

    def frame(self, i: int) -> LandmarkFrame:
        if self.faceless[i]:
            bbox, marks = None, ()
        else:
            bbox = tuple(float(v) for v in self.bbox[i])
            marks = tuple((float(x), float(y)) for x, y in self.landmarks[i])
        return LandmarkFrame(
            frame_index=int(self.frame_index[i]),
            timestamp_ms=float(self.timestamp_ms[i]),
            confidence=float(self.confidence[i]),
            bbox=bbox,
            landmarks=marks,
            scheme=self.scheme,
        )

    @property
    def frames(self) -> Iterator[LandmarkFrame]:
        return (self.frame(i) for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LandmarkStream):
            return NotImplemented
        return (
            self.participant_id == other.participant_id
            and self.group == other.group
            and self.fps == other.fps
            and self.scheme == other.scheme
            and self.source_video == other.source_video
            and np.array_equal(self.frame_index, other.frame_index)
            and np.array_equal(self.timestamp_ms, other.timestamp_ms)
            and np.array_equal(self.confidence, other.confidence)
            and np.array_equal(self.bbox, other.bbox, equal_nan=True)
            and np.array_equal(self.landmarks, other.landmarks, equal_nan=True)
        )


@dataclass(frozen=True)
class ManifestEvent:
    stimulus: str
    turn: int
    onset_ms: float


@dataclass(frozen=True)
class SessionManifest:
    """Schedule of name-calling onsets for one participant session."""

    participant_id: str
    group: str
    events: Tuple[ManifestEvent, ...]


@dataclass(frozen=True)
class ValidationReport:
    """Read-only quality summary of a parsed stream."""

    n_frames: int
    faceless_frames: int
    low_confidence_frames: int
    drift_frames: int
    max_drift_ms: float
    drift_frame_indices: Tuple[int, ...] = field(default=())


def _require_keys(obj: dict, keys: Sequence[str], line: int, what: str) -> None:
    if not isinstance(obj, dict):
        raise FormatError(f"{what} must be a JSON object", line=line)
    missing = [k for k in keys if k not in obj]
    if missing:
        raise FormatError(f"{what} missing keys {missing}", line=line)


def _json_line(raw: str, line: int):
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON ({exc.msg})", line=line) from None


def parse_stream(data: bytes | str) -> LandmarkStream:
    """Parse a line-delimited stream file into a validated LandmarkStream.

    Raises :class:`FormatError` (with line number) on malformed records,
    scheme/landmark-count mismatches, or non-monotonic timestamps.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError("empty stream file", line=1)

    header = _json_line(lines[0], 1)
    _require_keys(header, _HEADER_KEYS, 1, "header")
    scheme = header["scheme"]
    if scheme not in SCHEME_POINTS:
        raise FormatError(f"unknown scheme {scheme!r}", line=1)
    if header["group"] not in GROUPS:
        raise FormatError(f"unknown group {header['group']!r}", line=1)
    fps = float(header["fps"])
    if not fps > 0:
        raise FormatError("fps must be positive", line=1)
    n_points = SCHEME_POINTS[scheme]

    n = len(lines) - 1
    frame_index = np.empty(n, dtype=np.int64)
    timestamp_ms = np.empty(n, dtype=np.float64)
    confidence = np.empty(n, dtype=np.float64)
    bbox = np.full((n, 4), np.nan)
    landmarks = np.full((n, n_points, 2), np.nan)

    loads = json.loads
    for row, raw in enumerate(lines[1:]):
        lineno = row + 2
        try:
            rec = loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", line=lineno) from None
        try:
            fi = rec["frame_index"]
            ts = rec["timestamp_ms"]
            conf = rec["confidence"]
            bb = rec["bbox"]
            lm = rec["landmarks"]
        except (KeyError, TypeError):
            _require_keys(rec, _FRAME_KEYS, lineno, "frame")
            raise
        if fi < 0 or ts < 0:
            raise FormatError("frame_index and timestamp_ms must be non-negative", line=lineno)
        if not 0.0 <= conf <= 1.0:
            raise FormatError(f"confidence {conf} outside [0,1]", line=lineno)
        if bb is None:
            if conf != 0:
                raise FormatError("faceless frame must have confidence 0", line=lineno)
            if lm:
                raise FormatError("faceless frame must have empty landmarks", line=lineno)
        else:
            if len(bb) != 4:
                raise FormatError("bbox must have 4 entries", line=lineno)
            if not (bb[2] > bb[0] and bb[3] > bb[1]):
                raise FormatError(f"degenerate bbox {bb}", line=lineno)
            if len(lm) != 2 * n_points:
                raise FormatError(
                    f"expected {2 * n_points} landmark values for {scheme}, got {len(lm)}",
                    line=lineno,
                )
            bbox[row] = bb
            landmarks[row] = np.asarray(lm, dtype=np.float64).reshape(n_points, 2)
        frame_index[row] = fi
        timestamp_ms[row] = ts
        confidence[row] = conf

    if n > 1:
        if np.any(np.diff(frame_index) <= 0):
            bad = int(np.argmax(np.diff(frame_index) <= 0)) + 1
            raise FormatError("frame_index not strictly increasing", line=bad + 2)
        if np.any(np.diff(timestamp_ms) <= 0):
            bad = int(np.argmax(np.diff(timestamp_ms) <= 0)) + 1
            raise FormatError("timestamp_ms not strictly increasing", line=bad + 2)

    return LandmarkStream(
        participant_id=str(header["participant_id"]),
        group=header["group"],
        fps=fps,
        scheme=scheme,
        source_video=str(header["source_video"]),
        frame_index=frame_index,
        timestamp_ms=timestamp_ms,
        confidence=confidence,
        bbox=bbox,
        landmarks=landmarks,
    )


def serialize_stream(stream: LandmarkStream) -> bytes:
    """Canonical byte serialization; ``parse_stream`` inverts it exactly."""
    out = []
    header = {
        "participant_id": stream.participant_id,
        "group": stream.group,
        "fps": stream.fps,
        "scheme": stream.scheme,
        "source_video": stream.source_video,
    }
    out.append(json.dumps(header, separators=(",", ":")))
    faceless = stream.faceless
    for i in range(len(stream)):
        if faceless[i]:
            bb, lm = None, []
        else:
            bb = [float(v) for v in stream.bbox[i]]
            lm = [float(v) for v in stream.landmarks[i].ravel()]
        rec = {
            "frame_index": int(stream.frame_index[i]),
            "timestamp_ms": float(stream.timestamp_ms[i]),
            "confidence": float(stream.confidence[i]),
            "bbox": bb,
            "landmarks": lm,
        }
        out.append(json.dumps(rec, separators=(",", ":")))
    return ("\n".join(out) + "\n").encode("utf-8")


def parse_manifest(data: bytes | str) -> SessionManifest:
    """Parse a line-delimited manifest file; events come back sorted by onset."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError("empty manifest file", line=1)

    header = _json_line(lines[0], 1)
    _require_keys(header, ("participant_id", "group"), 1, "header")
    if header["group"] not in GROUPS:
        raise FormatError(f"unknown group {header['group']!r}", line=1)

    events = []
    seen = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        rec = _json_line(raw, lineno)
        _require_keys(rec, ("stimulus", "turn", "onset_ms"), lineno, "event")
        stim, turn, onset = rec["stimulus"], rec["turn"], rec["onset_ms"]
        if stim not in STIMULI:
            raise FormatError(f"unknown stimulus code {stim!r}", line=lineno)
        if turn not in TURNS:
            raise FormatError(f"turn {turn!r} outside {{1,2,3}}", line=lineno)
        if onset < 0:
            raise FormatError("onset_ms must be non-negative", line=lineno)
        key = (stim, turn)
        if key in seen:
            raise FormatError(f"duplicate event {stim}{turn}", line=lineno)
        seen.add(key)
        events.append(ManifestEvent(stimulus=stim, turn=int(turn), onset_ms=float(onset)))

    if len(events) > MAX_EVENTS:
        raise FormatError(f"more than {MAX_EVENTS} events", line=len(lines))
    events.sort(key=lambda e: e.onset_ms)
    for a, b in zip(events, events[1:]):
        if b.onset_ms <= a.onset_ms:
            raise FormatError(
                f"onsets not strictly increasing ({a.stimulus}{a.turn} vs {b.stimulus}{b.turn})"
            )

    return SessionManifest(
        participant_id=str(header["participant_id"]),
        group=header["group"],
        events=tuple(events),
    )


def serialize_manifest(manifest: SessionManifest) -> bytes:
    out = [json.dumps(
        {"participant_id": manifest.participant_id, "group": manifest.group},
        separators=(",", ":"),
    )]
    for ev in manifest.events:
        out.append(json.dumps(
            {"stimulus": ev.stimulus, "turn": ev.turn, "onset_ms": ev.onset_ms},
            separators=(",", ":"),
        ))
    return ("\n".join(out) + "\n").encode("utf-8")


def validate_stream(
    stream: LandmarkStream,
    confidence_threshold: float = 0.6,
    drift_tolerance_ms: float = 1.0,
) -> ValidationReport:
    """Quality report: frame counts, faceless frames, sub-threshold detections,
    and timestamp drift against the fps-implied grid.  Never mutates the stream.
    """
    faceless = stream.faceless
    face = ~faceless
    expected = stream.frame_index.astype(np.float64) * (1000.0 / stream.fps)
    drift = stream.timestamp_ms - expected
    drifted = np.abs(drift) >= drift_tolerance_ms
    low_conf = face & (stream.confidence < confidence_threshold)
    return ValidationReport(
        n_frames=len(stream),
        faceless_frames=int(faceless.sum()),
        low_confidence_frames=int(low_conf.sum()),
        drift_frames=int(drifted.sum()),
        max_drift_ms=float(np.max(np.abs(drift))) if len(stream) else 0.0,
        drift_frame_indices=tuple(int(i) for i in stream.frame_index[drifted][:50]),
    )
