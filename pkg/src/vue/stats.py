from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

METRICS = ("reports", "avg_witnesses", "unsure_ratio", "benign_majority_ratio")


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    half_width: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width


def mean_ci(values: Sequence[float], confidence: float = 0.99) -> MetricSummary:
    """Sample mean with a two-sided Student-t confidence half-width."""
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two repetitions for a confidence interval")
    sd = float(x.std(ddof=1))
    t = float(stats.t.ppf(0.5 + confidence / 2.0, len(x) - 1))
    half = t * sd / math.sqrt(len(x)) if sd > 0 else 0.0
    return MetricSummary(float(x.mean()), half, len(x))


def aggregate(results, confidence: float = 0.99) -> dict[str, MetricSummary]:
    """Per-metric mean and confidence interval over repetitions of one cell."""
    results = list(results)
    if len(results) < 2:
        raise ValueError("need at least two repetitions to aggregate")
    rows = [r.metrics() for r in results]
    return {m: mean_ci([row[m] for row in rows], confidence) for m in METRICS}
