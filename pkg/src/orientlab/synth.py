"""Synthetic cohorts and scripted landmark streams with known ground truth.

Ordinal cohorts are drawn from per-(group, stimulus) response distributions;
landmark streams are rendered from a continuous-time script of face-visibility
segments and blink events.  Ground-truth trial metrics are derived from the
script's timeline analytically, independent of the frame-processing path, so
the pipeline can be checked end to end.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import geometry, trials
from .errors import ConfigError
from .model import (GROUPS, STIMULI, TURNS, LandmarkStream, ManifestEvent,
                    SessionManifest)

# Table-derived response distributions (p_none, p_partial, p_full) used as
# generator defaults; group sizes match the retained manual-coding cohorts.
REFERENCE_DISTRIBUTIONS: Dict[Tuple[str, str], Tuple[float, float, float]] = {
    ("TD", "SM"): (0.0940, 0.2222, 0.6838),
    ("TD", "SW"): (0.2051, 0.0855, 0.7094),
    ("TD", "NM"): (0.1709, 0.2479, 0.5812),
    ("TD", "NW"): (0.1966, 0.3590, 0.4444),
    ("TD", "NR"): (0.2308, 0.2564, 0.5128),
    ("ASD", "SM"): (0.5139, 0.1944, 0.2917),
    ("ASD", "SW"): (0.3750, 0.2917, 0.3333),
    ("ASD", "NM"): (0.0972, 0.2500, 0.6528),
    ("ASD", "NW"): (0.1389, 0.1667, 0.6944),
    ("ASD", "NR"): (0.0556, 0.1528, 0.7917),
}
# rounded percentages do not always sum to exactly 100; renormalize
REFERENCE_DISTRIBUTIONS = {
    key: tuple(p / sum(probs) for p in probs)
    for key, probs in REFERENCE_DISTRIBUTIONS.items()
}
REFERENCE_GROUP_SIZES = {"TD": 39, "ASD": 24}


@dataclass(frozen=True)
class CohortProfile:
    """Generator parameters for an ordinal cohort."""

    group_sizes: Dict[str, int]
    cell_probs: Dict[Tuple[str, str], Tuple[float, float, float]]
    turn_slopes: Dict[Tuple[str, str], float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for g, n in self.group_sizes.items():
            if g not in GROUPS:
                raise ConfigError(f"unknown group {g!r}")
            if n < 1:
                raise ConfigError("group size must be >= 1")
        for key, probs in self.cell_probs.items():
            if len(probs) != 3 or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
                raise ConfigError(f"invalid probability vector {probs} for {key}")


def reference_profile(seed: int = 0) -> CohortProfile:
    """Profile matching the reference descriptive tables."""
    return CohortProfile(
        group_sizes=dict(REFERENCE_GROUP_SIZES),
        cell_probs=dict(REFERENCE_DISTRIBUTIONS),
        seed=seed,
    )


def _turn_probs(base: Tuple[float, float, float], slope: float, turn: int
                ) -> Tuple[float, float, float]:
    """Shift response mass between the extreme categories so the cell mean
    moves by slope * (turn - 2); clipped to keep a valid distribution."""
    if slope == 0.0:
        return base
    delta = slope * (turn - 2) / 2.0
    p0, p1, p2 = base
    move = max(min(delta, p0), -p2)
    return (p0 - move, p1, p2 + move)


def gen_ordinal_cohort(profile: CohortProfile) -> List[Dict[str, str]]:
    """Draw a wide-format ordinal table; deterministic for a fixed seed."""
    rng = np.random.default_rng(profile.seed)
    rows: List[Dict[str, str]] = []
    for group in sorted(profile.group_sizes):
        for i in range(profile.group_sizes[group]):
            row = {"participant": f"{group}{i + 1:03d}", "group": group}
            for stim in STIMULI:
                probs = profile.cell_probs.get((group, stim))
                if probs is None:
                    continue
                slope = profile.turn_slopes.get((group, stim), 0.0)
                for turn in TURNS:
                    p = _turn_probs(probs, slope, turn)
                    row[f"{stim}{turn}"] = str(int(rng.choice(3, p=p)))
            rows.append(row)
    return rows


@dataclass(frozen=True)
class FaceSegment:
    start_ms: float
    end_ms: float
    confidence: float


@dataclass(frozen=True)
class Blink:
    time_ms: float
    duration_ms: float


@dataclass(frozen=True)
class StreamScript:
    """Continuous-time description of one synthetic session video."""

    fps: float
    total_ms: float
    face_segments: Tuple[FaceSegment, ...]
    blinks: Tuple[Blink, ...] = ()
    ear_open: float = 0.30
    ear_closed: float = 0.10
    manifest: Optional[SessionManifest] = None

    def __post_init__(self):
        segs = sorted(self.face_segments, key=lambda s: s.start_ms)
        for a, b in zip(segs, segs[1:]):
            if b.start_ms < a.end_ms:
                raise ConfigError(f"overlapping face segments at {b.start_ms} ms")
        for blink in self.blinks:
            if blink.duration_ms <= 0:
                raise ConfigError("blink durations must be positive")


# Fixed synthetic head layout (FAN68): eye centers, box, and filler landmarks.
_EYE_CENTER_L = (150.0, 200.0)
_EYE_CENTER_R = (280.0, 200.0)
_EYE_WIDTH = 100.0
_BBOX = (50.0, 80.0, 400.0, 420.0)


def _base_landmarks() -> np.ndarray:
    """68-point template; non-eye points on a fixed grid inside the box."""
    marks = np.zeros((68, 2))
    for i in range(68):
        marks[i] = (60.0 + (i % 10) * 34.0, 90.0 + (i // 10) * 45.0)
    return marks


def _eye_rows(ear_value: float) -> np.ndarray:
    marks = _base_landmarks()
    tmpl_l = geometry.canonical_eye_template(ear_value, _EYE_WIDTH, _EYE_CENTER_L)
    tmpl_r = geometry.canonical_eye_template(ear_value, _EYE_WIDTH, _EYE_CENTER_R)
    marks[36:42] = tmpl_l
    marks[42:48] = tmpl_r
    return marks


def gen_landmark_stream(
    script: StreamScript,
    participant_id: str = "SYN001",
    group: str = "TD",
    source_video: str = "synthetic.mp4",
) -> LandmarkStream:
    """Render a script into a FAN68 landmark stream.

    Frames outside face segments are faceless; frames inside a blink carry the
    closed-eye template, all others the open-eye template.  Confidence is the
    containing segment's value.
    """
    dt = 1000.0 / script.fps
    n = int(math.ceil(script.total_ms / dt))
    ts = np.arange(n, dtype=np.float64) * dt

    conf = np.zeros(n)
    in_face = np.zeros(n, dtype=bool)
    for seg in script.face_segments:
        m = (ts >= seg.start_ms) & (ts < seg.end_ms)
        in_face |= m
        conf[m] = seg.confidence
    blinking = np.zeros(n, dtype=bool)
    for blink in script.blinks:
        blinking |= (ts >= blink.time_ms) & (ts < blink.time_ms + blink.duration_ms)

    open_marks = _eye_rows(script.ear_open)
    closed_marks = _eye_rows(script.ear_closed)
    landmarks = np.full((n, 68, 2), np.nan)
    landmarks[in_face & ~blinking] = open_marks
    landmarks[in_face & blinking] = closed_marks
    bbox = np.full((n, 4), np.nan)
    bbox[in_face] = _BBOX
    conf[~in_face] = 0.0

    return LandmarkStream(
        participant_id=participant_id,
        group=group,
        fps=script.fps,
        scheme="FAN68",
        source_video=source_video,
        frame_index=np.arange(n, dtype=np.int64),
        timestamp_ms=ts,
        confidence=conf,
        bbox=bbox,
        landmarks=landmarks,
    )


def script_ground_truth(
    script: StreamScript,
    profile: geometry.GateProfile,
    participant_id: str = "SYN001",
    group: str = "TD",
    window_len_s: float = trials.DEFAULT_WINDOW_LEN_S,
    k_frames: int = trials.DEFAULT_K_FRAMES,
    gap_tolerance_frames: int = trials.DEFAULT_GAP_TOLERANCE,
) -> List[trials.TrialMetrics]:
    """Analytic trial metrics straight from the script's timeline.

    Works on the segment intervals, not on rendered frames, so it is an
    independent oracle for the frame-processing path.  Assumes blinks are
    sparse enough that the per-trial EOP median equals the open-eye level.
    """
    if script.manifest is None:
        raise ConfigError("script has no manifest")
    dt = 1000.0 / script.fps
    n = int(math.ceil(script.total_ms / dt))
    stream_end = (n - 1) * dt + dt if n else 0.0
    open_eop = geometry.eop(script.ear_open, profile.eop_low, profile.eop_range)

    def first_frame_at(t_ms: float) -> int:
        # first k with k*dt >= t_ms
        return int(math.ceil(t_ms / dt - 1e-9))

    events = script.manifest.events
    out: List[trials.TrialMetrics] = []
    for i, ev in enumerate(events):
        end = ev.onset_ms + window_len_s * 1000.0
        if i + 1 < len(events):
            end = min(end, events[i + 1].onset_ms)
        end = min(end, stream_end)
        end = max(end, ev.onset_ms)
        k0 = first_frame_at(ev.onset_ms)
        k1 = min(first_frame_at(end), n)
        total_frames = max(k1 - k0, 0)

        # frame-index ranges of gated-valid presence inside the window
        ranges: List[Tuple[int, int]] = []
        for seg in sorted(script.face_segments, key=lambda s: s.start_ms):
            if seg.confidence < profile.tau_c:
                continue
            a = max(first_frame_at(max(seg.start_ms, ev.onset_ms)), k0)
            b = min(first_frame_at(min(seg.end_ms, end)), k1)
            if b > a:
                ranges.append((a, b))
        # merge abutting ranges (no faceless frame in between)
        merged: List[Tuple[int, int]] = []
        for a, b in ranges:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))

        responded, onset_frame = False, None
        for a, b in merged:
            if b - a >= k_frames:
                responded, onset_frame = True, a
                break
        lat = None
        if responded:
            lat = max((onset_frame * dt - ev.onset_ms) / 1000.0, 0.0)

        # bridge gaps of at most gap_tolerance_frames for duration
        best = 0
        run_start = None
        prev_end = None
        for a, b in merged:
            if run_start is None:
                run_start, prev_end = a, b
            elif a - prev_end <= gap_tolerance_frames:
                prev_end = b
            else:
                best = max(best, prev_end - run_start)
                run_start, prev_end = a, b
            best = max(best, prev_end - run_start)

        n_valid = sum(b - a for a, b in merged)
        out.append(trials.TrialMetrics(
            participant_id=participant_id,
            group=group,
            stimulus=ev.stimulus,
            turn=ev.turn,
            onset_ms=ev.onset_ms,
            end_ms=float(end),
            latency_s=lat,
            duration_s=best / script.fps,
            mean_eop=open_eop if n_valid > 0 else None,
            valid_frame_fraction=n_valid / total_frames if total_frames else 0.0,
            responded=responded,
        ))
    return out


def random_script(
    rng: np.random.Generator,
    fps: float = 30.0,
    n_events: int = 5,
    window_len_s: float = trials.DEFAULT_WINDOW_LEN_S,
    participant_id: str = "SYN001",
    group: str = "TD",
    spacing_ms: Optional[float] = None,
) -> StreamScript:
    """Randomized but oracle-friendly script.

    Each trial gets its own response pattern (no face, sub-threshold face,
    delayed single segment, pre-onset presence, or a split run with a short
    dropout).  Blinks are sparse and kept well away from segment and window
    boundaries so the per-trial EOP median provably equals the open-eye level.
    """
    spacing = spacing_ms if spacing_ms is not None else window_len_s * 1000.0 + 2000.0
    if spacing < window_len_s * 1000.0 + 800.0:
        raise ConfigError("spacing_ms too small for the trial window length")
    total_ms = n_events * spacing + 4000.0
    codes = [(s, t) for s in STIMULI for t in TURNS]
    picks = rng.choice(len(codes), size=n_events, replace=False)

    segments: List[FaceSegment] = []
    blinks: List[Blink] = []
    events: List[ManifestEvent] = []
    high_conf = (0.65, 0.75, 0.95)
    for i, p in enumerate(picks):
        onset = 2500.0 + i * spacing + float(rng.uniform(0, 400))
        events.append(ManifestEvent(stimulus=codes[p][0], turn=codes[p][1], onset_ms=onset))
        kind = rng.uniform()
        conf = float(high_conf[rng.integers(3)])
        trial_segments: List[FaceSegment] = []
        if kind < 0.15:
            pass  # no face at all
        elif kind < 0.30:
            # face present but below every confidence gate
            start = onset + float(rng.uniform(0, 2000))
            trial_segments.append(FaceSegment(start, start + float(rng.uniform(2000, 5000)), 0.5))
        elif kind < 0.45:
            # face already on screen at stimulus onset
            dur = float(rng.uniform(3000, 7000))
            trial_segments.append(FaceSegment(onset - float(rng.uniform(500, 2000)),
                                              onset + dur, conf))
        elif kind < 0.80:
            # delayed single response
            lat = float(rng.uniform(100, 3000))
            dur = float(rng.uniform(2000, 6000))
            trial_segments.append(FaceSegment(onset + lat, onset + lat + dur, conf))
        else:
            # split run: short dropout that may or may not be bridged
            lat = float(rng.uniform(100, 1500))
            d1 = float(rng.uniform(1500, 3000))
            gap = float(rng.choice([50.0, 400.0]))
            d2 = float(rng.uniform(1500, 3000))
            a = onset + lat
            trial_segments.append(FaceSegment(a, a + d1, conf))
            trial_segments.append(FaceSegment(a + d1 + gap, a + d1 + gap + d2, conf))
        segments.extend(trial_segments)
        for seg in trial_segments:
            if seg.confidence < 0.6:
                continue
            lo = max(seg.start_ms, onset) + 1200.0
            hi = seg.end_ms - 1200.0
            bt = lo
            while bt + 150.0 < hi:
                if rng.uniform() < 0.5:
                    blinks.append(Blink(time_ms=bt, duration_ms=float(rng.uniform(60, 120))))
                bt += float(rng.uniform(2000, 3500))

    manifest = SessionManifest(participant_id=participant_id, group=group,
                               events=tuple(events))
    return StreamScript(
        fps=fps,
        total_ms=total_ms,
        face_segments=tuple(segments),
        blinks=tuple(blinks),
        manifest=manifest,
    )


def write_synthetic_dataset(
    out_dir,
    n_td: int = 4,
    n_asd: int = 4,
    frames_per_stream: int = 1800,
    fps: float = 30.0,
    seed: int = 0,
) -> dict:
    """Write a full synthetic dataset: streams/, manifests/, and ordinal.csv.

    Deterministic for a fixed seed; per-participant sub-seeds keep generation
    order-independent.
    """
    import csv as _csv
    from pathlib import Path

    from .model import serialize_manifest, serialize_stream

    out = Path(out_dir)
    (out / "streams").mkdir(parents=True, exist_ok=True)
    (out / "manifests").mkdir(parents=True, exist_ok=True)

    total_ms = frames_per_stream / fps * 1000.0
    spacing_min = trials.DEFAULT_WINDOW_LEN_S * 1000.0 + 2000.0
    n_events = min(15, int((total_ms - 4000.0) // spacing_min))
    if n_events < 1:
        raise ConfigError("frames_per_stream too small for even one trial window")
    spacing = (total_ms - 4000.0) / n_events
    pids = [("TD", f"TD{i + 1:03d}") for i in range(n_td)]
    pids += [("ASD", f"ASD{i + 1:03d}") for i in range(n_asd)]
    for group, pid in pids:
        pid_tag = int(hashlib.sha256(pid.encode()).hexdigest()[:8], 16)
        rng = np.random.default_rng([seed, pid_tag])
        script = random_script(rng, fps=fps, n_events=n_events, participant_id=pid,
                               group=group, spacing_ms=spacing)
        stream = gen_landmark_stream(script, pid, group, source_video=f"{pid}.mp4")
        (out / "streams" / f"{pid}.jsonl").write_bytes(serialize_stream(stream))
        (out / "manifests" / f"{pid}.jsonl").write_bytes(
            serialize_manifest(script.manifest))

    profile = CohortProfile(
        group_sizes={"TD": n_td, "ASD": n_asd},
        cell_probs=dict(REFERENCE_DISTRIBUTIONS),
        seed=seed,
    )
    rows = gen_ordinal_cohort(profile)
    from .coding import WIDE_COLUMNS
    header = ["participant", "group", *WIDE_COLUMNS]
    with open(out / "ordinal.csv", "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    return {
        "streams_dir": str(out / "streams"),
        "manifests_dir": str(out / "manifests"),
        "ordinal_table": str(out / "ordinal.csv"),
        "n_streams": len(pids),
    }
