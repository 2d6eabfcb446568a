"""Non-parametric inference battery.

Rank tests use mid-ranks for ties throughout.  The Mann-Whitney U test is
exact (full null distribution) for small tie-free samples and otherwise uses
the normal approximation with tie-corrected variance and an optional
continuity correction.  Permutation tests are seedable and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from .errors import DomainError

EXACT_MWU_MAX_N = 12


@dataclass(frozen=True)
class StatResult:
    test_name: str
    statistic: float
    p_value: float
    effect_size: Optional[float] = None
    effect_name: Optional[str] = None
    n_per_group: Tuple[int, ...] = ()
    adjustment: str = "none"
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SlopeRecord:
    participant_id: str
    group: str
    stimulus: str
    variable: str
    beta1: float
    n_turns: int


def midranks(pooled: np.ndarray) -> np.ndarray:
    """Mid-ranks (1-based, ties averaged) of a pooled sample."""
    return sps.rankdata(pooled, method="average")


def _tie_term(pooled: np.ndarray) -> float:
    """Sum over tie groups of t^3 - t."""
    _, counts = np.unique(pooled, return_counts=True)
    return float(np.sum(counts.astype(np.float64) ** 3 - counts))


def _exact_u_counts(n1: int, n2: int) -> np.ndarray:
    """Null distribution of U for tie-free samples: counts[u] over u=0..n1*n2.

    Gaussian-binomial recurrence, equivalent to enumerating all rank subsets.
    """
    counts = np.zeros(n1 * n2 + 1, dtype=np.float64)
    counts[0] = 1.0
    # counts becomes the coefficient list of prod_{i=1..n1} (1-q^(n2+i))/(1-q^i)
    for i in range(1, n1 + 1):
        # multiply by (1 - q^(n2+i)), divide by (1 - q^i): do it as a running sum
        new = np.zeros_like(counts)
        for u in range(len(counts)):
            new[u] = counts[u]
            if u >= i:
                new[u] += new[u - i]
            if u >= n2 + i:
                new[u] -= counts[u - (n2 + i)]
        counts = new
    return counts


def u_statistic(x: np.ndarray, y: np.ndarray) -> float:
    """U for x versus y from pooled mid-ranks."""
    n1 = len(x)
    ranks = midranks(np.concatenate([x, y]))
    return float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)


def mann_whitney_u(
    x: Sequence[float],
    y: Sequence[float],
    mode: str = "auto",
    continuity: bool = True,
) -> StatResult:
    """Two-sided Mann-Whitney U test of x versus y.

    ``auto`` uses the exact null distribution when the pooled sample is small
    (<= 12) and tie-free, else the normal approximation with tie-corrected
    variance.  The exact two-sided p is the null probability of a U at least
    as far from its mean as the observed one.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0 or len(y) == 0:
        raise DomainError("empty sample")
    if mode not in ("exact", "normal_approx", "auto"):
        raise ValueError(f"unknown mode {mode!r}")
    n1, n2 = len(x), len(y)
    pooled = np.concatenate([x, y])
    has_ties = len(np.unique(pooled)) < n1 + n2
    u = u_statistic(x, y)
    mu = n1 * n2 / 2.0

    use_exact = mode == "exact" or (mode == "auto" and n1 + n2 <= EXACT_MWU_MAX_N and not has_ties)
    if use_exact and has_ties:
        raise DomainError("exact mode requires tie-free samples")
    if use_exact:
        counts = _exact_u_counts(n1, n2)
        dev = abs(u - mu)
        us = np.arange(len(counts), dtype=np.float64)
        p = counts[np.abs(us - mu) >= dev - 1e-9].sum() / counts.sum()
        method = "exact"
    else:
        n = n1 + n2
        tie = _tie_term(pooled)
        var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
        if var <= 0:
            p, z = 1.0, 0.0
        else:
            dev = abs(u - mu)
            if continuity:
                dev = max(dev - 0.5, 0.0)
            z = dev / np.sqrt(var)
            p = min(2.0 * sps.norm.sf(z), 1.0)
        method = "normal_approx"

    return StatResult(
        test_name="mann_whitney_u",
        statistic=u,
        p_value=float(p),
        effect_size=cliffs_delta(x, y),
        effect_name="cliffs_delta",
        n_per_group=(n1, n2),
        extra={"method": method, "continuity": continuity},
    )


def kruskal_wallis_h(groups: Sequence[Sequence[float]]) -> StatResult:
    """Tie-corrected Kruskal-Wallis H with chi-square p on g-1 df."""
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(groups) < 2 or any(len(g) == 0 for g in groups):
        raise DomainError("need >= 2 non-empty groups")
    pooled = np.concatenate(groups)
    n = len(pooled)
    if n < 3:
        raise DomainError("need total N >= 3")
    ranks = midranks(pooled)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    correction = 1.0 - _tie_term(pooled) / (n ** 3 - n)
    if correction <= 0:
        # all pooled values identical
        h, p = 0.0, 1.0
    else:
        h /= correction
        p = float(sps.chi2.sf(h, df=len(groups) - 1))
    return StatResult(
        test_name="kruskal_wallis_h",
        statistic=float(h),
        p_value=p,
        n_per_group=tuple(len(g) for g in groups),
    )


def holm_adjust(p_values: Sequence[float]) -> List[float]:
    """Step-down Holm adjustment, order-aligned with the input."""
    ps = np.asarray(p_values, dtype=np.float64)
    if np.any((ps < 0) | (ps > 1)):
        raise DomainError("p-values must lie in [0,1]")
    m = len(ps)
    order = np.argsort(ps, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        val = min((m - rank) * ps[idx], 1.0)
        running = max(running, val)
        adjusted[idx] = running
    return [float(v) for v in adjusted]


def cliffs_delta(x: Sequence[float], y: Sequence[float]) -> float:
    """Ordinal dominance effect size in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0 or len(y) == 0:
        raise DomainError("empty sample")
    diff = x[:, None] - y[None, :]
    return float((np.sum(diff > 0) - np.sum(diff < 0)) / (len(x) * len(y)))


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """Tie-aware Spearman rank correlation with a t-approximation p-value."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise DomainError("paired samples must have equal length")
    n = len(x)
    if n < 3:
        raise DomainError("need n >= 3")
    rx, ry = midranks(x), midranks(y)
    sx, sy = np.std(rx), np.std(ry)
    if sx == 0 or sy == 0:
        raise DomainError("zero rank variance")
    rho = float(np.corrcoef(rx, ry)[0, 1])
    rho = max(min(rho, 1.0), -1.0)
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * np.sqrt((n - 2) / (1.0 - rho ** 2))
        p = float(2.0 * sps.t.sf(abs(t), df=n - 2))
    return StatResult(
        test_name="spearman_rho",
        statistic=rho,
        p_value=min(p, 1.0),
        n_per_group=(n,),
    )


def permutation_test(
    x: Sequence[float],
    y: Sequence[float],
    statistic: str = "mean_diff",
    n_perm: int = 10_000,
    seed: int = 0,
) -> StatResult:
    """Monte Carlo two-sided permutation test of x versus y.

    p = (1 + #{|T_perm| >= |T_obs|}) / (n_perm + 1); deterministic per seed.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0 or len(y) == 0:
        raise DomainError("empty sample")
    if n_perm < 100:
        raise DomainError("n_perm must be >= 100")
    n1 = len(x)
    pooled = np.concatenate([x, y])
    if statistic == "mean_diff":
        vec = pooled
        t_obs = x.mean() - y.mean()

        def stat(mat):
            return mat[:, :n1].mean(axis=1) - mat[:, n1:].mean(axis=1)
    elif statistic == "u_statistic":
        # labels permute over fixed pooled mid-ranks; center U for two-sidedness
        vec = midranks(pooled)
        center = n1 * len(y) / 2.0
        t_obs = vec[:n1].sum() - n1 * (n1 + 1) / 2.0 - center

        def stat(mat):
            return mat[:, :n1].sum(axis=1) - n1 * (n1 + 1) / 2.0 - center
    else:
        raise ValueError(f"unknown statistic {statistic!r}")

    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(vec, (n_perm, 1)), axis=1)
    t_perm = stat(perms)
    exceed = int(np.sum(np.abs(t_perm) >= abs(t_obs) - 1e-12))
    p = (1 + exceed) / (n_perm + 1)
    return StatResult(
        test_name=f"permutation_{statistic}",
        statistic=float(t_obs),
        p_value=float(p),
        n_per_group=(n1, len(y)),
        seed=seed,
        extra={"n_perm": n_perm},
    )


def per_subject_slope(
    participant_id: str,
    group: str,
    stimulus: str,
    variable: str,
    turn_values: Sequence[Tuple[int, float]],
) -> Optional[SlopeRecord]:
    """OLS slope of a metric against turn index for one participant cell.

    Returns None when fewer than 2 turns have defined values.
    """
    pts = [(t, v) for t, v in turn_values if v is not None and not np.isnan(v)]
    if len(pts) < 2:
        return None
    turns = np.array([t for t, _ in pts], dtype=np.float64)
    vals = np.array([v for _, v in pts], dtype=np.float64)
    beta1 = float(np.polyfit(turns, vals, 1)[0])
    return SlopeRecord(
        participant_id=participant_id,
        group=group,
        stimulus=stimulus,
        variable=variable,
        beta1=beta1,
        n_turns=len(pts),
    )
