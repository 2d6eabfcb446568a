"""End-to-end batch orchestration: streams + manifests + ordinal table in,
CSV reports + SVG figures + a checksummed run-manifest out.

All report content is computed first and written last (temp file + rename per
output), so a failing run never leaves partial outputs behind.  Numbers are
serialized with 6 significant digits; re-running with identical inputs and
seed produces byte-identical files for any worker count.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import coding, geometry, plots, stats, trials
from .errors import ConfigError, OrientLabError
from .geometry import GateProfile, DEFAULT_PROFILES
from .model import GROUPS, STIMULI, TURNS, parse_manifest, parse_stream, validate_stream
from .trials import TrialMetrics

VIDEO_VARIABLES = ("latency", "duration", "mean_eop")
_VAR_ATTR = {"latency": "latency_s", "duration": "duration_s", "mean_eop": "mean_eop"}

THREADS_ENV = "ORIENT_LAB_THREADS"

CSV_FILES = (
    "Trial_Metrics.csv",
    "Descriptive_byStimulus.csv",
    "Between_Group_Tests.csv",
    "Within_Group_Tests.csv",
    "Correlations.csv",
    "Reliability_Alpha.csv",
    "Trend_Slopes_BySubject.csv",
)


@dataclass
class RunConfig:
    streams_dir: Optional[Path] = None
    manifests_dir: Optional[Path] = None
    ordinal_table: Optional[Path] = None
    out_dir: Path = Path("orientlab-out")
    profiles: Dict[str, GateProfile] = field(
        default_factory=lambda: dict(DEFAULT_PROFILES))
    window_len_s: float = trials.DEFAULT_WINDOW_LEN_S
    k_frames: int = trials.DEFAULT_K_FRAMES
    gap_tolerance_frames: int = trials.DEFAULT_GAP_TOLERANCE
    n_perm: int = 10_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.n_perm < 100:
            raise ConfigError("n_perm must be >= 100")
        cap = os.environ.get(THREADS_ENV)
        if cap:
            self.workers = max(1, min(self.workers, int(cap)))

    def canonical_dict(self) -> dict:
        d = {
            "streams_dir": str(self.streams_dir) if self.streams_dir else None,
            "manifests_dir": str(self.manifests_dir) if self.manifests_dir else None,
            "ordinal_table": str(self.ordinal_table) if self.ordinal_table else None,
            "out_dir": str(self.out_dir),
            "profiles": {g: asdict(p) for g, p in sorted(self.profiles.items())},
            "window_len_s": self.window_len_s,
            "k_frames": self.k_frames,
            "gap_tolerance_frames": self.gap_tolerance_frames,
            "n_perm": self.n_perm,
            "seed": self.seed,
        }
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path: Path) -> RunConfig:
    """Read a JSON run-config file mirroring the RunConfig fields."""
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    profiles = dict(DEFAULT_PROFILES)
    for group, spec in obj.get("profiles", {}).items():
        if group not in GROUPS:
            raise ConfigError(f"unknown group {group!r} in profiles")
        base = profiles[group]
        profiles[group] = GateProfile(
            tau_c=spec.get("tau_c", base.tau_c),
            smooth_window=spec.get("smooth_window", base.smooth_window),
            eop_low=spec.get("eop_low", base.eop_low),
            eop_range=spec.get("eop_range", base.eop_range),
        )
    kwargs = {}
    for key in ("window_len_s", "k_frames", "gap_tolerance_frames", "n_perm",
                "seed", "workers"):
        if key in obj:
            kwargs[key] = obj[key]
    for key in ("streams_dir", "manifests_dir", "ordinal_table", "out_dir"):
        if obj.get(key):
            kwargs[key] = Path(obj[key])
    return RunConfig(profiles=profiles, **kwargs)


@dataclass(frozen=True)
class RunSummary:
    n_participants: int
    n_streams: int
    n_trials: int
    outputs: Dict[str, str]  # file name -> sha256
    wall_time_s: float
    out_dir: Path


def _fmt(value) -> str:
    """Fixed 6-significant-digit serialization; empty cell for absent values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if np.isnan(v):
        return ""
    return f"{v:.6g}"


def _csv_bytes(header: Sequence[str], rows: Sequence[Sequence]) -> bytes:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def process_stream_file(
    stream_path: str,
    manifest_path: Optional[str],
    profiles: Dict[str, GateProfile],
    window_len_s: float,
    k_frames: int,
    gap_tolerance_frames: int,
) -> List[TrialMetrics]:
    """Parse one stream (+ manifest), run geometry and trial segmentation."""
    stream = parse_stream(Path(stream_path).read_bytes())
    if manifest_path is None:
        raise OrientLabError(f"no manifest for stream {stream_path}")
    manifest = parse_manifest(Path(manifest_path).read_bytes())
    profile = profiles.get(stream.group)
    if profile is None:
        raise ConfigError(f"no gate profile for group {stream.group!r}")
    eye_map = geometry.load_eye_map(stream.scheme)
    valid, _, smoothed = geometry.stream_metrics(stream, profile, eye_map)
    windows = trials.segment_trials(stream, manifest, window_len_s)
    return [
        trials.compute_trial_metrics(
            w, stream.group, valid, smoothed, stream.timestamp_ms, stream.fps,
            k_frames, gap_tolerance_frames)
        for w in windows
    ]


def _discover_inputs(config: RunConfig) -> List[Tuple[str, str]]:
    """Pair stream files with manifest files by stem; fail fast listing misses."""
    if config.streams_dir is None:
        return []
    streams = sorted(Path(config.streams_dir).glob("*.jsonl"))
    if not streams:
        raise OrientLabError(f"no *.jsonl streams in {config.streams_dir}")
    manifests = {}
    if config.manifests_dir:
        manifests = {p.stem: p for p in Path(config.manifests_dir).glob("*.jsonl")}
    missing = [s.name for s in streams if s.stem not in manifests]
    if missing:
        raise OrientLabError(f"streams without manifests: {missing}")
    return [(str(s), str(manifests[s.stem])) for s in streams]


def compute_trial_table(config: RunConfig) -> List[TrialMetrics]:
    """Run geometry + segmentation over every input stream, possibly parallel.

    Results are ordered by stream file name regardless of worker count.
    """
    pairs = _discover_inputs(config)
    args = [
        (s, m, config.profiles, config.window_len_s, config.k_frames,
         config.gap_tolerance_frames)
        for s, m in pairs
    ]
    results: List[List[TrialMetrics]] = []
    if config.workers > 1 and len(args) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_worker, args, chunksize=4))
    else:
        results = [_worker(a) for a in args]
    out: List[TrialMetrics] = []
    for metrics in results:
        out.extend(metrics)
    return out


def _worker(arg) -> List[TrialMetrics]:
    return process_stream_file(*arg)


def _sub_seed(base: int, *parts: str) -> int:
    blob = (":".join(parts)).encode()
    h = hashlib.sha256(str(base).encode() + b"|" + blob).hexdigest()
    return int(h[:12], 16)


def _metric_values(metrics: Sequence[TrialMetrics], group: str, stimulus: str,
                   variable: str) -> np.ndarray:
    attr = _VAR_ATTR[variable]
    vals = [getattr(m, attr) for m in metrics
            if m.group == group and m.stimulus == stimulus
            and getattr(m, attr) is not None]
    return np.asarray(vals, dtype=np.float64)


def between_group_rows(metrics: Sequence[TrialMetrics], n_perm: int, seed: int
                       ) -> List[list]:
    """TD vs ASD per stimulus and variable: MWU, Cliff's delta, Cohen's d,
    and a seeded mean-difference permutation p; Holm across stimuli."""
    rows = []
    for variable in VIDEO_VARIABLES:
        batch = []
        for stim in STIMULI:
            x = _metric_values(metrics, "TD", stim, variable)
            y = _metric_values(metrics, "ASD", stim, variable)
            if len(x) == 0 or len(y) == 0:
                continue
            res = stats.mann_whitney_u(x, y)
            d = coding.cohens_d(float(x.mean()), float(np.std(x, ddof=1)) if len(x) > 1 else 0.0,
                                float(y.mean()), float(np.std(y, ddof=1)) if len(y) > 1 else 0.0)
            sub = _sub_seed(seed, "between", variable, stim)
            perm = stats.permutation_test(x, y, "mean_diff", n_perm, sub)
            batch.append([variable, stim, res.statistic, res.p_value, None,
                          res.effect_size, d, perm.p_value, len(x), len(y), sub])
        if batch:
            adjusted = stats.holm_adjust([b[3] for b in batch])
            for b, adj in zip(batch, adjusted):
                b[4] = adj
            rows.extend(batch)
    return rows


def within_group_rows(metrics: Sequence[TrialMetrics]) -> List[list]:
    """Per group and variable: KW across stimuli plus Holm-adjusted pairwise MWU."""
    rows = []
    for group in sorted({m.group for m in metrics}):
        for variable in VIDEO_VARIABLES:
            samples = {s: _metric_values(metrics, group, s, variable) for s in STIMULI}
            present = [s for s in STIMULI if len(samples[s]) > 0]
            if len(present) < 2:
                continue
            kw = stats.kruskal_wallis_h([samples[s] for s in present])
            rows.append([group, variable, "kruskal_wallis", "all", kw.statistic,
                         kw.p_value, None, None,
                         int(sum(len(samples[s]) for s in present))])
            pair_rows = []
            for i, a in enumerate(present):
                for b in present[i + 1:]:
                    res = stats.mann_whitney_u(samples[a], samples[b])
                    pair_rows.append([group, variable, "mann_whitney", f"{a}-{b}",
                                      res.statistic, res.p_value, None,
                                      res.effect_size,
                                      len(samples[a]) + len(samples[b])])
            adjusted = stats.holm_adjust([r[5] for r in pair_rows])
            for r, adj in zip(pair_rows, adjusted):
                r[6] = adj
            rows.extend(pair_rows)
    return rows


def correlation_rows(metrics: Sequence[TrialMetrics]) -> List[list]:
    """Spearman correlations among the trial variables, per group."""
    pairs = (("latency", "duration"), ("duration", "mean_eop"), ("latency", "mean_eop"))
    rows = []
    for group in sorted({m.group for m in metrics}):
        for va, vb in pairs:
            aa, bb = _VAR_ATTR[va], _VAR_ATTR[vb]
            xs, ys = [], []
            for m in metrics:
                if m.group != group:
                    continue
                x, y = getattr(m, aa), getattr(m, bb)
                if x is not None and y is not None:
                    xs.append(x)
                    ys.append(y)
            if len(xs) < 3:
                continue
            try:
                res = stats.spearman_rho(xs, ys)
            except OrientLabError:
                continue
            rows.append([group, f"{va}-{vb}", res.statistic, res.p_value, len(xs)])
    return rows


def reliability_rows(metrics: Sequence[TrialMetrics],
                     records: Sequence[coding.ResponseRecord]) -> List[list]:
    """Cronbach's alpha across the three turns, for ordinal codes and for each
    video variable, per (group, stimulus)."""
    rows = []
    groups = sorted({m.group for m in metrics} | {r.group for r in records})
    for group in groups:
        for stim in STIMULI:
            if records:
                mat = coding.turn_matrix(records, group, stim)
                if len(mat):
                    alpha = coding.cronbach_alpha(mat)
                    rows.append([group, stim, "response", alpha, len(mat)])
            for variable in VIDEO_VARIABLES:
                attr = _VAR_ATTR[variable]
                cell: Dict[str, Dict[int, float]] = {}
                for m in metrics:
                    if m.group == group and m.stimulus == stim:
                        v = getattr(m, attr)
                        if v is not None:
                            cell.setdefault(m.participant_id, {})[m.turn] = v
                complete = [p for p in sorted(cell) if len(cell[p]) == len(TURNS)]
                if len(complete) < 2:
                    continue
                mat = np.array([[cell[p][t] for t in TURNS] for p in complete])
                alpha = coding.cronbach_alpha(mat)
                rows.append([group, stim, variable, alpha, len(complete)])
    return rows


def slope_records(metrics: Sequence[TrialMetrics],
                  records: Sequence[coding.ResponseRecord]) -> List[stats.SlopeRecord]:
    out = []
    cells: Dict[Tuple[str, str, str, str], Dict[int, float]] = {}
    for m in metrics:
        for variable in VIDEO_VARIABLES:
            v = getattr(m, _VAR_ATTR[variable])
            if v is not None:
                cells.setdefault((m.participant_id, m.group, m.stimulus, variable),
                                 {})[m.turn] = v
    for r in records:
        cells.setdefault((r.participant_id, r.group, r.stimulus, "response"),
                         {})[r.turn] = float(r.response)
    for (pid, group, stim, variable), turns in sorted(cells.items()):
        rec = stats.per_subject_slope(pid, group, stim, variable,
                                      sorted(turns.items()))
        if rec is not None:
            out.append(rec)
    return out


def descriptive_rows(records: Sequence[coding.ResponseRecord]) -> List[list]:
    rows = []
    for group in GROUPS:
        for stim in STIMULI:
            st = coding.descriptives(records, group, stim)
            if st is None:
                continue
            rows.append([st.group, st.stimulus, st.mu, st.sigma,
                         st.pct_full, st.pct_partial, st.pct_none])
    return rows


def trial_metric_rows(metrics: Sequence[TrialMetrics]) -> List[list]:
    return [
        [m.participant_id, m.group, m.stimulus, m.turn, m.latency_s, m.duration_s,
         m.mean_eop, m.responded, m.valid_frame_fraction]
        for m in metrics
    ]


def run_pipeline(config: RunConfig) -> RunSummary:
    """Execute the full batch per the run configuration and write all outputs."""
    t0 = time.perf_counter()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    metrics: List[TrialMetrics] = []
    n_streams = 0
    if config.streams_dir is not None:
        pairs = _discover_inputs(config)
        n_streams = len(pairs)
        metrics = compute_trial_table(config)

    records: List[coding.ResponseRecord] = []
    if config.ordinal_table is not None:
        rows_in = coding.read_wide_table(Path(config.ordinal_table).read_bytes())
        records, _ = coding.wide_to_long(rows_in)

    files: Dict[str, bytes] = {}
    files["Trial_Metrics.csv"] = _csv_bytes(
        ("participant", "group", "stimulus", "turn", "latency_s", "duration_s",
         "mean_eop", "responded", "valid_frame_fraction"),
        trial_metric_rows(metrics))
    files["Descriptive_byStimulus.csv"] = _csv_bytes(
        ("group", "stimulus", "mu", "sigma", "pct_full", "pct_partial", "pct_none"),
        descriptive_rows(records))
    files["Between_Group_Tests.csv"] = _csv_bytes(
        ("variable", "stimulus", "u_statistic", "p_value", "p_holm", "cliffs_delta",
         "cohens_d", "p_permutation", "n_td", "n_asd", "perm_seed"),
        between_group_rows(metrics, config.n_perm, config.seed))
    files["Within_Group_Tests.csv"] = _csv_bytes(
        ("group", "variable", "test", "contrast", "statistic", "p_value", "p_holm",
         "cliffs_delta", "n"),
        within_group_rows(metrics))
    files["Correlations.csv"] = _csv_bytes(
        ("group", "pair", "rho", "p_value", "n"),
        correlation_rows(metrics))
    files["Reliability_Alpha.csv"] = _csv_bytes(
        ("group", "stimulus", "variable", "alpha", "n"),
        reliability_rows(metrics, records))
    slopes = slope_records(metrics, records)
    files["Trend_Slopes_BySubject.csv"] = _csv_bytes(
        ("participant", "group", "stimulus", "variable", "beta1", "n_turns"),
        [[s.participant_id, s.group, s.stimulus, s.variable, s.beta1, s.n_turns]
         for s in slopes])

    # figures straight into the output directory, then checksummed from disk
    plot_names: List[str] = []
    if plots.plot_eop_strips(metrics, out_dir / "eop_by_stimulus.svg"):
        plot_names.append("eop_by_stimulus.svg")
    if plots.plot_turn_heatmap(metrics, out_dir / "turn_means.svg"):
        plot_names.append("turn_means.svg")
    if plots.plot_slope_bars(slopes, out_dir / "slopes.svg"):
        plot_names.append("slopes.svg")

    checksums: Dict[str, str] = {}
    for name, data in files.items():
        _atomic_write(out_dir / name, data)
        checksums[name] = _sha256(data)
    for name in plot_names:
        checksums[name] = _sha256((out_dir / name).read_bytes())

    manifest = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "files": dict(sorted(checksums.items())),
        "n_streams": n_streams,
        "n_trials": len(metrics),
        "n_ordinal_records": len(records),
    }
    manifest_bytes = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
    _atomic_write(out_dir / "run_manifest.json", manifest_bytes)

    participants = {m.participant_id for m in metrics} | {r.participant_id for r in records}
    return RunSummary(
        n_participants=len(participants),
        n_streams=n_streams,
        n_trials=len(metrics),
        outputs=checksums,
        wall_time_s=time.perf_counter() - t0,
        out_dir=out_dir,
    )


def validate_inputs(stream_paths: Sequence[Path]) -> List[Tuple[str, Optional[str], Optional[object]]]:
    """Format-check stream files: returns (name, error or None, report or None)."""
    results = []
    for path in stream_paths:
        try:
            stream = parse_stream(Path(path).read_bytes())
        except OrientLabError as exc:
            results.append((str(path), str(exc), None))
            continue
        results.append((str(path), None, validate_stream(stream)))
    return results
