"""Per-frame geometric engagement metrics.

Face area from the detector bounding box, eye polygon area via the shoelace
formula, eye-aspect ratio (EAR) over the canonical six-point layout, and the
eye-openness percentage (EOP) rescaling of EAR onto [0, 100].  Frames that
fail the confidence gate, or whose eye geometry is degenerate, are marked
invalid rather than aborting the run.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DomainError
from .model import LandmarkFrame, LandmarkStream, SCHEME_POINTS

# EOP rescaling constants: blink threshold and dynamic openness range.
EOP_LOW_DEFAULT = 0.18
EOP_RANGE_DEFAULT = 0.12

# Horizontal eye spans below this many pixels make EAR numerically meaningless.
MIN_EYE_SPAN_PX = 1e-6


@dataclass(frozen=True)
class GateProfile:
    """Confidence gating and smoothing parameters for one participant group."""

    tau_c: float = 0.6
    smooth_window: int = 5
    eop_low: float = EOP_LOW_DEFAULT
    eop_range: float = EOP_RANGE_DEFAULT

    def __post_init__(self):
        if not 0.0 <= self.tau_c <= 1.0:
            raise ConfigError(f"tau_c {self.tau_c} outside [0,1]")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ConfigError(f"smooth_window must be odd and positive, got {self.smooth_window}")
        if self.eop_range <= 0:
            raise ConfigError("eop_range must be positive")


TD_PROFILE = GateProfile(tau_c=0.6, smooth_window=5)
ASD_PROFILE = GateProfile(tau_c=0.7, smooth_window=7)

DEFAULT_PROFILES = {"TD": TD_PROFILE, "ASD": ASD_PROFILE}


@dataclass(frozen=True)
class EyeIndexMap:
    """Landmark indices for the 6 EAR points and the M-point contour per eye."""

    scheme: str
    ear_points_L: Tuple[int, ...]
    ear_points_R: Tuple[int, ...]
    contour_L: Tuple[int, ...]
    contour_R: Tuple[int, ...]

    def __post_init__(self):
        for name in ("ear_points_L", "ear_points_R"):
            if len(getattr(self, name)) != 6:
                raise ConfigError(f"{name} must list exactly 6 indices")
        for name in ("contour_L", "contour_R"):
            if len(getattr(self, name)) < 3:
                raise ConfigError(f"{name} must list at least 3 indices")

    def check_bounds(self, n_points: int) -> None:
        indices = (self.ear_points_L + self.ear_points_R
                   + self.contour_L + self.contour_R)
        bad = [i for i in indices if not 0 <= i < n_points]
        if bad:
            raise ConfigError(f"landmark indices {bad} out of range for {n_points}-point scheme")


def load_eye_map(scheme: str) -> EyeIndexMap:
    """Load the shipped index map for a landmark scheme."""
    name = scheme.lower() + ".json"
    try:
        raw = resources.files("orientlab.maps").joinpath(name).read_text()
    except FileNotFoundError:
        raise ConfigError(f"no shipped eye map for scheme {scheme!r}") from None
    return eye_map_from_dict(json.loads(raw))


def eye_map_from_dict(obj: dict) -> EyeIndexMap:
    try:
        m = EyeIndexMap(
            scheme=obj["scheme"],
            ear_points_L=tuple(obj["ear_points_L"]),
            ear_points_R=tuple(obj["ear_points_R"]),
            contour_L=tuple(obj["contour_L"]),
            contour_R=tuple(obj["contour_R"]),
        )
    except KeyError as exc:
        raise ConfigError(f"eye map missing key {exc}") from None
    if m.scheme in SCHEME_POINTS:
        m.check_bounds(SCHEME_POINTS[m.scheme])
    return m


@dataclass(frozen=True)
class FrameMetrics:
    """Geometric quantities for one frame; metric fields are None when invalid."""

    frame_index: int
    valid: bool
    face_area_px2: Optional[float] = None
    eye_area_L: Optional[float] = None
    eye_area_R: Optional[float] = None
    ear_L: Optional[float] = None
    ear_R: Optional[float] = None
    eop_L: Optional[float] = None
    eop_R: Optional[float] = None
    mean_eop: Optional[float] = None


def face_area(bbox: Sequence[float]) -> float:
    """Bounding-box area (x2-x1)(y2-y1); degenerate boxes are a domain error."""
    x1, y1, x2, y2 = bbox
    if x2 <= x1 or y2 <= y1:
        raise DomainError(f"degenerate bbox {tuple(bbox)}")
    return (x2 - x1) * (y2 - y1)


def polygon_area(points: Sequence[Tuple[float, float]]) -> float:
    """Absolute shoelace area of a closed polygon (cyclic vertex order)."""
    if len(points) < 3:
        raise DomainError(f"polygon needs >= 3 points, got {len(points)}")
    pts = np.asarray(points, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def ear(p1, p2, p3, p4, p5, p6) -> float:
    """Eye-aspect ratio: (|p2-p6| + |p3-p5|) / (2 |p1-p4|)."""
    span = math.dist(p1, p4)
    if span < MIN_EYE_SPAN_PX:
        raise DomainError("zero horizontal eye span")
    return (math.dist(p2, p6) + math.dist(p3, p5)) / (2.0 * span)


def eop(ear_value: float, low: float = EOP_LOW_DEFAULT, rng: float = EOP_RANGE_DEFAULT) -> float:
    """Linear rescale of EAR to an openness percentage, clipped to [0, 100]."""
    return float(min(max((ear_value - low) / rng * 100.0, 0.0), 100.0))


def mean_eop_frame(eop_L: float, eop_R: float) -> float:
    """Left/right average giving the unified per-frame engagement value."""
    return (eop_L + eop_R) / 2.0


def frame_metrics(frame: LandmarkFrame, profile: GateProfile, eye_map: EyeIndexMap) -> FrameMetrics:
    """Compose all per-frame metrics behind the confidence gate.

    Faceless or sub-threshold frames come back with ``valid=False`` and no
    metric values, as do frames with degenerate eye geometry.
    """
    if frame.faceless or frame.confidence < profile.tau_c:
        return FrameMetrics(frame_index=frame.frame_index, valid=False)
    n_points = len(frame.landmarks)
    try:
        eye_map.check_bounds(n_points)
    except ConfigError:
        raise
    marks = frame.landmarks
    try:
        ear_L = ear(*(marks[i] for i in eye_map.ear_points_L))
        ear_R = ear(*(marks[i] for i in eye_map.ear_points_R))
    except DomainError:
        return FrameMetrics(frame_index=frame.frame_index, valid=False)
    eop_L = eop(ear_L, profile.eop_low, profile.eop_range)
    eop_R = eop(ear_R, profile.eop_low, profile.eop_range)
    return FrameMetrics(
        frame_index=frame.frame_index,
        valid=True,
        face_area_px2=face_area(frame.bbox),
        eye_area_L=polygon_area([marks[i] for i in eye_map.contour_L]),
        eye_area_R=polygon_area([marks[i] for i in eye_map.contour_R]),
        ear_L=ear_L,
        ear_R=ear_R,
        eop_L=eop_L,
        eop_R=eop_R,
        mean_eop=mean_eop_frame(eop_L, eop_R),
    )


def smooth_series(values: Sequence[Optional[float]], window: int):
    """Centered moving median over the valid neighbors inside ``window``.

    Absent entries (None/NaN) stay absent; window 1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"window must be odd and positive, got {window}")
    arr = np.array([np.nan if v is None else v for v in values], dtype=np.float64)
    out = smooth_array(arr, window)
    return [None if np.isnan(v) else float(v) for v in out]


def smooth_array(arr: np.ndarray, window: int) -> np.ndarray:
    """Vectorized counterpart of :func:`smooth_series` over a NaN-coded array."""
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"window must be odd and positive, got {window}")
    if window == 1 or len(arr) == 0:
        return arr.copy()
    half = window // 2
    padded = np.concatenate([np.full(half, np.nan), arr, np.full(half, np.nan)])
    win = np.lib.stride_tricks.sliding_window_view(padded, window)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        med = np.nanmedian(win, axis=1)
    med[np.isnan(arr)] = np.nan
    return med


def stream_metrics(stream: LandmarkStream, profile: GateProfile, eye_map: EyeIndexMap):
    """Vectorized per-stream metrics: (valid, mean_eop, smoothed_mean_eop).

    Produces results identical to mapping :func:`frame_metrics` over frames
    followed by :func:`smooth_series`; kept vectorized because full sessions
    run to five digits of frames.
    """
    n = len(stream)
    eye_map.check_bounds(stream.landmarks.shape[1])
    faceless = stream.faceless
    valid = (~faceless) & (stream.confidence >= profile.tau_c)

    marks = stream.landmarks
    mean_eop = np.full(n, np.nan)
    if valid.any():
        idx = np.flatnonzero(valid)
        eops = []
        for pts in (eye_map.ear_points_L, eye_map.ear_points_R):
            p = marks[np.ix_(idx, pts)]  # (m, 6, 2)
            span = np.linalg.norm(p[:, 0] - p[:, 3], axis=1)
            vert = (np.linalg.norm(p[:, 1] - p[:, 5], axis=1)
                    + np.linalg.norm(p[:, 2] - p[:, 4], axis=1))
            ok = span >= MIN_EYE_SPAN_PX
            e = np.full(len(idx), np.nan)
            e[ok] = vert[ok] / (2.0 * span[ok])
            eops.append(np.clip((e - profile.eop_low) / profile.eop_range * 100.0, 0.0, 100.0))
        frame_eop = (eops[0] + eops[1]) / 2.0
        degenerate = np.isnan(frame_eop)
        valid[idx[degenerate]] = False
        mean_eop[idx[~degenerate]] = frame_eop[~degenerate]

    smoothed = smooth_array(mean_eop, profile.smooth_window)
    return valid, mean_eop, smoothed


def canonical_eye_template(ear_value: float = 0.3, width: float = 100.0,
                           center=(0.0, 0.0)) -> Tuple[Tuple[float, float], ...]:
    """Six-point eye layout whose EAR is exactly ``ear_value``.

    Points are ordered p1..p6: corners at +-width/2, two upper and two lower
    lid points at +-width/4 with height chosen so both vertical distances are
    EAR * width / 2.
    """
    cx, cy = center
    h = ear_value * width / 2.0
    w = width / 2.0
    return (
        (cx - w, cy),
        (cx - w / 2.0, cy + h),
        (cx + w / 2.0, cy + h),
        (cx + w, cy),
        (cx + w / 2.0, cy - h),
        (cx - w / 2.0, cy - h),
    )
