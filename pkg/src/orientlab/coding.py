"""Analytics over the manual three-point response codes.

Wide tables have one row per participant with columns SM1..NR3 holding codes
in {0, 1, 2} (0 = no response, 1 = partial, 2 = full).  All variances are
sample (N-1) variances.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import FormatError
from .model import GROUPS, STIMULI, TURNS

WIDE_COLUMNS = tuple(f"{s}{t}" for s in STIMULI for t in TURNS)


@dataclass(frozen=True)
class ResponseRecord:
    participant_id: str
    group: str
    stimulus: str
    turn: int
    response: int  # 0, 1, or 2


@dataclass(frozen=True)
class GroupStimulusStats:
    group: str
    stimulus: str
    n: int
    mu: float
    sigma: float
    pct_full: float
    pct_partial: float
    pct_none: float


def read_wide_table(data: bytes | str) -> List[Dict[str, str]]:
    """Read the CSV wide table into row dicts; validates the header."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    required = ["participant", "group"]
    missing = [c for c in required if c not in fields]
    if missing:
        raise FormatError(f"wide table missing columns {missing}")
    unknown = [c for c in fields if c not in required and c not in WIDE_COLUMNS]
    if unknown:
        raise FormatError(f"unknown wide-table columns {unknown}")
    return list(reader)


def wide_to_long(rows: Sequence[Dict[str, str]]) -> Tuple[List[ResponseRecord], int]:
    """Reshape wide rows into long records; returns (records, missing_count).

    Empty cells are dropped and counted; any non-{0,1,2} cell is an error.
    """
    records: List[ResponseRecord] = []
    missing = 0
    for row in rows:
        pid = row["participant"]
        group = row["group"]
        if group not in GROUPS:
            raise FormatError(f"unknown group {group!r} for participant {pid}")
        for stim in STIMULI:
            for turn in TURNS:
                cell = row.get(f"{stim}{turn}", "")
                cell = (cell or "").strip()
                if cell == "":
                    missing += 1
                    continue
                if cell not in ("0", "1", "2"):
                    raise FormatError(
                        f"participant {pid} {stim}{turn}: response {cell!r} not in {{0,1,2}}"
                    )
                records.append(ResponseRecord(pid, group, stim, turn, int(cell)))
    return records, missing


def long_to_wide(records: Sequence[ResponseRecord]) -> List[Dict[str, str]]:
    """Inverse reshape, for round-trip checks and re-export."""
    by_pid: Dict[str, Dict[str, str]] = {}
    order: List[str] = []
    for rec in records:
        if rec.participant_id not in by_pid:
            by_pid[rec.participant_id] = {"participant": rec.participant_id, "group": rec.group}
            order.append(rec.participant_id)
        by_pid[rec.participant_id][f"{rec.stimulus}{rec.turn}"] = str(rec.response)
    return [by_pid[pid] for pid in order]


def descriptives(records: Sequence[ResponseRecord], group: str, stimulus: str
                 ) -> Optional[GroupStimulusStats]:
    """Mean, sample SD, and response-type percentages for one (group, stimulus).

    Returns None when the cell is empty; SD requires at least 2 records.
    """
    vals = np.array([r.response for r in records
                     if r.group == group and r.stimulus == stimulus], dtype=np.float64)
    n = len(vals)
    if n == 0:
        return None
    sigma = float(np.std(vals, ddof=1)) if n >= 2 else float("nan")
    return GroupStimulusStats(
        group=group,
        stimulus=stimulus,
        n=n,
        mu=float(np.mean(vals)),
        sigma=sigma,
        pct_full=float(np.mean(vals == 2) * 100.0),
        pct_partial=float(np.mean(vals == 1) * 100.0),
        pct_none=float(np.mean(vals == 0) * 100.0),
    )


def cronbach_alpha(items: np.ndarray) -> Optional[float]:
    """Cronbach's alpha over an (N participants, k items) score matrix.

    Uses sample variances; returns None when the total-score variance is zero
    (alpha undefined).  Rows with any missing (NaN) value are dropped listwise.
    """
    items = np.asarray(items, dtype=np.float64)
    if items.ndim != 2:
        raise ValueError("items must be a 2-D (participants x items) array")
    items = items[~np.isnan(items).any(axis=1)]
    n, k = items.shape
    if k < 2 or n < 2:
        return None
    total_var = np.var(items.sum(axis=1), ddof=1)
    if total_var <= 0:
        return None
    item_var = np.var(items, axis=0, ddof=1).sum()
    return float(k / (k - 1) * (1.0 - item_var / total_var))


def cohens_d(mean_a: float, sd_a: float, mean_b: float, sd_b: float) -> Optional[float]:
    """Pooled-SD standardized mean difference (a minus b).

    With TD as the first argument pair, negative values indicate stronger
    responsiveness in the second (autistic) group.
    """
    denom = np.sqrt((sd_a ** 2 + sd_b ** 2) / 2.0)
    if denom == 0:
        return None
    return float((mean_a - mean_b) / denom)


def turn_slope(r1: float, r3: float) -> float:
    """Turn-wise slope (R3 - R1) / 2; negative values denote habituation."""
    return (r3 - r1) / 2.0


def d_prime(mu_a: float, sd_a: float, mu_b: float, sd_b: float) -> Optional[float]:
    """Signal-detection sensitivity |mu_a - mu_b| / sqrt(0.5 (sd_a^2 + sd_b^2))."""
    denom = np.sqrt(0.5 * (sd_a ** 2 + sd_b ** 2))
    if denom == 0:
        return None
    return float(abs(mu_a - mu_b) / denom)


def turn_matrix(records: Sequence[ResponseRecord], group: str, stimulus: str) -> np.ndarray:
    """(N, 3) matrix of responses by turn for one (group, stimulus) cell.

    Participants missing a turn get NaN in that column.
    """
    pids = sorted({r.participant_id for r in records if r.group == group})
    mat = np.full((len(pids), len(TURNS)), np.nan)
    index = {pid: i for i, pid in enumerate(pids)}
    for r in records:
        if r.group == group and r.stimulus == stimulus:
            mat[index[r.participant_id], r.turn - 1] = r.response
    return mat[~np.isnan(mat).all(axis=1)]
