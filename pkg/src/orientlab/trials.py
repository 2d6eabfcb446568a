"""Alignment of landmark streams with stimulus onsets and per-trial metrics.

A trial window runs from a stimulus onset to the earliest of onset + window
length, the next onset, and the end of the stream.  Within a window the
response onset is the first run of at least ``k_frames`` consecutive valid
frames, latency is measured from stimulus onset to that frame's timestamp,
and duration is the longest run of valid frames where interruptions up to
``gap_tolerance_frames`` are bridged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import LandmarkStream, SessionManifest

DEFAULT_WINDOW_LEN_S = 10.0
DEFAULT_K_FRAMES = 3
DEFAULT_GAP_TOLERANCE = 2


@dataclass(frozen=True)
class TrialWindow:
    participant_id: str
    stimulus: str
    turn: int
    onset_ms: float
    end_ms: float
    first_index: int  # inclusive row index into the stream
    last_index: int   # exclusive; == first_index when the window holds no frames

    @property
    def empty(self) -> bool:
        return self.last_index <= self.first_index

    @property
    def span_ms(self) -> float:
        return self.end_ms - self.onset_ms


@dataclass(frozen=True)
class TrialMetrics:
    participant_id: str
    group: str
    stimulus: str
    turn: int
    onset_ms: float
    end_ms: float
    latency_s: Optional[float]   # None when censored (no response)
    duration_s: float
    mean_eop: Optional[float]    # None when no valid frame
    valid_frame_fraction: float
    responded: bool


def segment_trials(
    stream: LandmarkStream,
    manifest: SessionManifest,
    window_len_s: float = DEFAULT_WINDOW_LEN_S,
) -> List[TrialWindow]:
    """One window per manifest event, clipped at the next onset and stream end.

    An onset beyond the end of the stream yields an empty window, not an error.
    """
    if manifest.participant_id != stream.participant_id:
        raise ValueError(
            f"manifest participant {manifest.participant_id!r} does not match "
            f"stream participant {stream.participant_id!r}"
        )
    ts = stream.timestamp_ms
    stream_end = float(ts[-1]) + 1000.0 / stream.fps if len(ts) else 0.0
    windows = []
    events = sorted(manifest.events, key=lambda e: e.onset_ms)
    for i, ev in enumerate(events):
        end = ev.onset_ms + window_len_s * 1000.0
        if i + 1 < len(events):
            end = min(end, events[i + 1].onset_ms)
        end = min(end, stream_end)
        end = max(end, ev.onset_ms)  # onset past stream end -> empty window
        first = int(np.searchsorted(ts, ev.onset_ms, side="left"))
        last = int(np.searchsorted(ts, end, side="left"))
        windows.append(TrialWindow(
            participant_id=stream.participant_id,
            stimulus=ev.stimulus,
            turn=ev.turn,
            onset_ms=ev.onset_ms,
            end_ms=float(end),
            first_index=first,
            last_index=last,
        ))
    return windows


def detect_response(valid: Sequence[bool], k_frames: int = DEFAULT_K_FRAMES
                    ) -> Tuple[bool, Optional[int]]:
    """First index starting a run of >= k_frames consecutive valid frames."""
    if k_frames < 1:
        raise ValueError("k_frames must be positive")
    run = 0
    for i, v in enumerate(valid):
        run = run + 1 if v else 0
        if run >= k_frames:
            return True, i - k_frames + 1
    return False, None


def latency(onset_ms: float, onset_frame_timestamp_ms: float) -> float:
    """Seconds from stimulus onset to the response-onset frame, floored at 0."""
    return max((onset_frame_timestamp_ms - onset_ms) / 1000.0, 0.0)


def duration(valid: Sequence[bool], fps: float,
             gap_tolerance_frames: int = DEFAULT_GAP_TOLERANCE) -> float:
    """Longest bridged run of valid frames, in seconds.

    Invalid gaps of at most ``gap_tolerance_frames`` between valid frames are
    counted as part of the run; leading/trailing invalid frames never are.
    """
    best = 0
    run = 0   # length of current bridged run (0 when not inside one)
    gap = 0   # invalid frames since the last valid frame of the current run
    for v in valid:
        if v:
            if run > 0 and gap <= gap_tolerance_frames:
                run += gap + 1
            else:
                run = 1
            gap = 0
            best = max(best, run)
        elif run > 0:
            gap += 1
            if gap > gap_tolerance_frames:
                run = 0
                gap = 0
    return best / fps


def trial_mean_eop(eop_values: np.ndarray, valid: np.ndarray) -> Optional[float]:
    """Median of the per-frame engagement values over valid frames."""
    vals = eop_values[np.asarray(valid, dtype=bool)]
    vals = vals[~np.isnan(vals)]
    if len(vals) == 0:
        return None
    return float(np.median(vals))


def compute_trial_metrics(
    window: TrialWindow,
    group: str,
    valid: np.ndarray,
    eop_values: np.ndarray,
    timestamps_ms: np.ndarray,
    fps: float,
    k_frames: int = DEFAULT_K_FRAMES,
    gap_tolerance_frames: int = DEFAULT_GAP_TOLERANCE,
) -> TrialMetrics:
    """Derive TrialMetrics for one window from whole-stream metric arrays."""
    sl = slice(window.first_index, window.last_index)
    v = np.asarray(valid[sl], dtype=bool)
    n = len(v)
    responded, onset_frame = detect_response(v, k_frames)
    lat = None
    if responded:
        lat = latency(window.onset_ms, float(timestamps_ms[sl][onset_frame]))
    return TrialMetrics(
        participant_id=window.participant_id,
        group=group,
        stimulus=window.stimulus,
        turn=window.turn,
        onset_ms=window.onset_ms,
        end_ms=window.end_ms,
        latency_s=lat,
        duration_s=duration(v, fps, gap_tolerance_frames),
        mean_eop=trial_mean_eop(eop_values[sl], v),
        valid_frame_fraction=float(v.mean()) if n else 0.0,
        responded=responded,
    )
