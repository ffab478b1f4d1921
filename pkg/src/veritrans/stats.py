"""Distribution summaries and statistical tests for similarity scores."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import (DegenerateSampleError, EmptyInputError, InsufficientDataError,
                     RangeError)

DEFAULT_SEED = 42
DEFAULT_RESAMPLES = 10_000
EXACT_WILCOXON_MAX = 12
_CHUNK = 1000  # resample rows per draw; bounds peak memory

_NORMAL = NormalDist()


def lower_median(values: Sequence[float]) -> float:
    """Median; for even n the lower of the two middle values."""
    if not len(values):
        raise EmptyInputError("median of an empty sample")
    ordered = sorted(values)
    return float(ordered[(len(ordered) - 1) // 2])


@dataclass
class DistributionSummary:
    n: int
    mean: float
    median: float
    ci95_low: float
    ci95_high: float
    mass_at_tau: Dict[float, Tuple[int, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mass_at_tau"] = {str(t): {"count": c, "proportion": p} for t, (c, p) in self.mass_at_tau.items()}
        return d


def summarize(scores: Sequence[float], taus: Sequence[float] = (75.0,),
              resamples: int = DEFAULT_RESAMPLES, seed: int = DEFAULT_SEED) -> DistributionSummary:
    if not len(scores):
        raise EmptyInputError("no scores to summarize")
    values = [float(s) for s in scores]
    n = len(values)
    mean = math.fsum(values) / n
    if n >= 2:
        low, high = bootstrap_ci_bca(values, "mean", resamples=resamples, seed=seed)
    else:
        low = high = mean
    mass = {}
    for tau in taus:
        count = sum(1 for v in values if v >= tau)
        mass[float(tau)] = (count, count / n)
    return DistributionSummary(n, mean, lower_median(values), low, high, mass)


def hoeffding_bound(n: int, range_width: float, epsilon: float) -> float:
    """Two-sided Hoeffding tail bound, 2 exp(-2 n eps^2 / width^2)."""
    if n < 1 or range_width <= 0 or epsilon <= 0:
        raise RangeError("hoeffding_bound needs n >= 1, range_width > 0, epsilon > 0")
    return 2.0 * math.exp(-2.0 * n * epsilon ** 2 / range_width ** 2)


# --------------------------------------------------------------------------
# BCa bootstrap
# --------------------------------------------------------------------------

def _statistic(name: str):
    if name == "mean":
        return lambda a, axis=-1: np.mean(a, axis=axis)
    if name == "median":
        # lower median, consistent with summarize()
        def med(a, axis=-1):
            s = np.sort(a, axis=axis)
            return np.take(s, (s.shape[axis] - 1) // 2, axis=axis)
        return med
    raise ValueError(f"unknown statistic {name!r}; expected 'mean' or 'median'")


def bootstrap_ci_bca(samples: Sequence[float], statistic: str = "mean",
                     resamples: int = DEFAULT_RESAMPLES, confidence: float = 0.95,
                     seed: int = DEFAULT_SEED) -> Tuple[float, float]:
    """Bias-corrected and accelerated bootstrap interval.

    Resample indices are drawn from ``np.random.default_rng(seed)`` in fixed
    row blocks, so the interval is a pure function of the inputs.
    Interval endpoints use linear interpolation between order statistics.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise DegenerateSampleError("bootstrap needs at least two samples")
    if resamples < 1000:
        raise ValueError("use at least 1000 resamples")
    if not 0.0 < confidence < 1.0:
        raise RangeError("confidence must lie in (0, 1)")
    if np.all(x == x[0]):
        return float(x[0]), float(x[0])

    stat = _statistic(statistic)
    theta_hat = float(stat(x))
    rng = np.random.default_rng(seed)
    parts = []
    for start in range(0, resamples, _CHUNK):
        idx = rng.integers(0, n, size=(min(_CHUNK, resamples - start), n))
        parts.append(stat(x[idx], axis=1))
    boot = np.sort(np.concatenate(parts))

    below = np.count_nonzero(boot < theta_hat) / resamples
    # keep z0 finite when every resample falls on one side
    below = min(max(below, 0.5 / resamples), 1.0 - 0.5 / resamples)
    z0 = _NORMAL.inv_cdf(below)

    jack = np.array([stat(np.delete(x, i)) for i in range(n)], dtype=float)
    diffs = jack.mean() - jack
    denom = 6.0 * (np.sum(diffs ** 2) ** 1.5)
    accel = float(np.sum(diffs ** 3) / denom) if denom > 0 else 0.0

    alpha = (1.0 - confidence) / 2.0
    bounds = []
    for q in (alpha, 1.0 - alpha):
        zq = _NORMAL.inv_cdf(q)
        adj = _NORMAL.cdf(z0 + (z0 + zq) / (1.0 - accel * (z0 + zq)))
        bounds.append(float(np.quantile(boot, adj)))
    return bounds[0], bounds[1]


# --------------------------------------------------------------------------
# Wilcoxon signed-rank
# --------------------------------------------------------------------------

@dataclass
class WilcoxonResult:
    W: float
    p_value: float
    median_delta: float
    n_nonzero: int
    exact: bool


def average_ranks(values: Sequence[float]) -> List[float]:
    """1-based ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _exact_p(ranks: Sequence[float], w: float) -> float:
    """P(min(W+, W-) <= w) under random signs, via a subset-sum count.

    Average ranks are multiples of 1/2, so doubled ranks are integers.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    target = int(round(2 * w))
    hits = sum(c for s, c in enumerate(counts) if min(s, total - s) <= target)
    return hits / 2 ** len(ranks)


def wilcoxon_signed_rank(paired_a: Sequence[float], paired_b: Sequence[float]) -> WilcoxonResult:
    """Two-sided signed-rank test on differences ``b - a``.

    Zero differences are dropped. With at most 12 non-zero differences the
    p-value is exact; otherwise a normal approximation with tie-corrected
    variance and continuity correction is used.
    """
    if len(paired_a) != len(paired_b):
        raise ValueError("paired samples must have equal length")
    deltas = [float(b) - float(a) for a, b in zip(paired_a, paired_b)]
    nonzero = [d for d in deltas if d != 0.0]
    m = len(nonzero)
    if m < 5:
        raise InsufficientDataError(f"need at least 5 non-zero differences, got {m}")
    ranks = average_ranks([abs(d) for d in nonzero])
    w_plus = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, nonzero) if d < 0)
    w = min(w_plus, w_minus)
    median_delta = lower_median(deltas)

    if m <= EXACT_WILCOXON_MAX:
        return WilcoxonResult(w, min(1.0, _exact_p(ranks, w)), median_delta, m, True)

    mean = m * (m + 1) / 4.0
    tie_sizes: Dict[float, int] = {}
    for r in ranks:
        tie_sizes[r] = tie_sizes.get(r, 0) + 1
    var = m * (m + 1) * (2 * m + 1) / 24.0 - sum(t ** 3 - t for t in tie_sizes.values()) / 48.0
    d = w - mean
    corrected = d - 0.5 * math.copysign(1.0, d) if d != 0 else 0.0
    z = corrected / math.sqrt(var)
    p = min(1.0, 2.0 * _NORMAL.cdf(-abs(z)))
    return WilcoxonResult(w, p, median_delta, m, False)


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> float:
    if not len(a) or not len(b):
        raise EmptyInputError("cliffs_delta needs two non-empty samples")
    greater = less = 0
    for x in a:
        for y in b:
            if x > y:
                greater += 1
            elif x < y:
                less += 1
    return (greater - less) / (len(a) * len(b))


# conventional cutoffs for |delta|
CLIFF_CUTOFFS = ((0.147, "negligible"), (0.33, "small"), (0.474, "medium"))


def cliffs_magnitude(delta: float) -> str:
    for cutoff, label in CLIFF_CUTOFFS:
        if abs(delta) < cutoff:
            return label
    return "large"
