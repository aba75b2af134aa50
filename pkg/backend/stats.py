"""
Streaming estimators and verdicts comparing Monte Carlo estimates with closed forms.
"""

import math
from typing import Dict, Any, Iterable, List, Sequence, Tuple
from dataclasses import dataclass, asdict, replace

import numpy as np
from scipy.stats import binom, norm

DEFAULT_Z = 3.0
ABSOLUTE_FLOOR = 1e-12
MIN_BATCHES = 8


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with its standard error and a symmetric z-interval."""
    mean: float
    std_error: float
    n: int
    z: float = DEFAULT_Z

    @property
    def ci_low(self) -> float:
        return self.mean - self.z * self.std_error

    @property
    def ci_high(self) -> float:
        return self.mean + self.z * self.std_error

    @property
    def ci_width(self) -> float:
        return 2 * self.z * self.std_error

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def scaled(self, factor: float) -> "EstimateWithCI":
        return EstimateWithCI(self.mean * factor, self.std_error * abs(factor), self.n, self.z)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['ci_low'] = self.ci_low
        data['ci_high'] = self.ci_high
        return data


@dataclass(frozen=True)
class ComparisonVerdict:
    """Outcome of comparing an estimate with its closed-form target."""
    name: str
    target: float
    estimate: EstimateWithCI
    z_score: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'target': self.target,
            'estimate': self.estimate.to_dict(),
            'z_score': self.z_score,
            'pass': self.passed,
        }


class RunningStats:
    """Single-pass mean and variance (Welford), mergeable across workers.

    ``merge`` uses the pairwise update of Chan et al., so partitioned
    accumulation agrees with serial accumulation up to rounding.
    """

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, value: float):
        self.n += 1
        delta = value - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (value - self.mean)

    def extend(self, values: Iterable[float]):
        for value in values:
            self.push(value)

    def push_array(self, values) -> "RunningStats":
        """Add a whole batch at once."""
        batch = np.asarray(values, dtype=float)
        if batch.size == 0:
            return self
        other = RunningStats()
        other.n = int(batch.size)
        other.mean = float(batch.mean())
        other.m2 = float(np.sum((batch - other.mean) ** 2))
        return self.merge(other)

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        self.n = n
        return self

    @property
    def variance(self) -> float:
        if self.n < 2:
            return math.nan
        return self.m2 / (self.n - 1)

    @property
    def std_error(self) -> float:
        if self.n < 2:
            return math.nan
        return math.sqrt(max(self.variance, 0.0) / self.n)

    def estimate(self, z: float = DEFAULT_Z) -> EstimateWithCI:
        if self.n < 2:
            raise ValueError(f"need at least 2 samples for a confidence interval, got {self.n}")
        return EstimateWithCI(self.mean, self.std_error, self.n, z)


    @classmethod
    def from_counts(cls, hits: int, n: int) -> "RunningStats":
        """Moments of n Bernoulli indicators of which ``hits`` are one."""
        stats = cls()
        if n:
            frequency = hits / n
            stats.n, stats.mean, stats.m2 = n, frequency, n * frequency * (1 - frequency)
        return stats


class RunningCovariance:
    """Joint streaming moments of a pair (x, y), for ratio-of-means estimators."""

    def __init__(self):
        self.x = RunningStats()
        self.y = RunningStats()
        self.c = 0.0

    @property
    def n(self) -> int:
        return self.x.n

    def push_arrays(self, xs, ys) -> "RunningCovariance":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.shape != ys.shape:
            raise ValueError("paired samples must have the same length")
        if xs.size == 0:
            return self
        other = RunningCovariance()
        other.x.push_array(xs)
        other.y.push_array(ys)
        other.c = float(np.sum((xs - other.x.mean) * (ys - other.y.mean)))
        return self.merge(other)

    def merge(self, other: "RunningCovariance") -> "RunningCovariance":
        if other.n == 0:
            return self
        n_a, n_b = self.n, other.n
        n = n_a + n_b
        dx = other.x.mean - self.x.mean
        dy = other.y.mean - self.y.mean
        self.c = self.c + other.c + dx * dy * n_a * n_b / n
        self.x.merge(other.x)
        self.y.merge(other.y)
        return self

    @property
    def covariance(self) -> float:
        if self.n < 2:
            return math.nan
        return self.c / (self.n - 1)

    def ratio_estimate(self, z: float = DEFAULT_Z) -> EstimateWithCI:
        """mean(x)/mean(y) with a delta-method standard error."""
        if self.n < 2:
            raise ValueError(f"need at least 2 samples for a confidence interval, got {self.n}")
        if self.y.mean == 0:
            raise ValueError("mean denominator is zero")
        ratio = self.x.mean / self.y.mean
        residual_variance = (self.x.variance - 2 * ratio * self.covariance
                             + ratio * ratio * self.y.variance)
        std_error = math.sqrt(max(residual_variance, 0.0) / self.n) / abs(self.y.mean)
        return EstimateWithCI(ratio, std_error, self.n, z)


def accumulate(values: Iterable[float], z: float = DEFAULT_Z) -> EstimateWithCI:
    stats = RunningStats()
    stats.extend(values)
    return stats.estimate(z)


def ratio_estimate(sum_num: float, sum_den: float, batches: Sequence[Tuple[float, float]],
                   z: float = DEFAULT_Z) -> EstimateWithCI:
    """Ratio of sums with a batch-means standard error.

    A ratio of sums is not a mean of i.i.d. terms, but the ratios of
    independent batches are, which restores a central-limit basis.

    Args:
        sum_num: total numerator (e.g. revenue)
        sum_den: total denominator (e.g. elapsed time)
        batches: per-batch (numerator, denominator) sums

    Returns:
        EstimateWithCI centred on sum_num/sum_den; n is the batch count
    """
    if sum_den == 0:
        raise ValueError("total denominator is zero")
    if len(batches) < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches, got {len(batches)}")
    if any(den <= 0 for _, den in batches):
        raise ValueError("every batch denominator must be positive")
    ratios = np.array([num / den for num, den in batches])
    std_error = float(np.std(ratios, ddof=1) / math.sqrt(len(ratios)))
    return EstimateWithCI(sum_num / sum_den, std_error, len(batches), z)


def compare(name: str, target: float, estimate: EstimateWithCI, z: float = DEFAULT_Z,
            floor: float = ABSOLUTE_FLOOR) -> ComparisonVerdict:
    """Pass when |mean - target| <= z*se + floor."""
    difference = estimate.mean - target
    if estimate.std_error > 0:
        z_score = difference / estimate.std_error
    else:
        z_score = 0.0 if abs(difference) <= floor else math.copysign(math.inf, difference)
    passed = abs(difference) <= z * estimate.std_error + floor
    return ComparisonVerdict(name, target, replace(estimate, z=z), z_score, passed)


def compare_upper(name: str, bound: float, estimate: EstimateWithCI, z: float = DEFAULT_Z,
                  floor: float = ABSOLUTE_FLOOR) -> ComparisonVerdict:
    """One-sided check: pass when mean <= bound + z*se + floor."""
    difference = estimate.mean - bound
    z_score = difference / estimate.std_error if estimate.std_error > 0 else 0.0
    passed = difference <= z * estimate.std_error + floor
    return ComparisonVerdict(name, bound, replace(estimate, z=z), z_score, passed)


def z_for_confidence(level: float) -> float:
    """Two-sided normal multiplier for a confidence level, e.g. 0.95 -> 1.96."""
    if not 0 < level < 1:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    return float(norm.ppf(1 - (1 - level) / 2))


def coverage_tolerance(n_runs: int, z: float = DEFAULT_Z, alpha: float = 0.001) -> int:
    """Fewest covering runs out of n_runs still consistent with nominal coverage.

    The miss count of a calibrated z-interval is binomial; anything above its
    (1 - alpha) quantile signals a miscalibrated interval.
    """
    miss_probability = 2 * norm.sf(z)
    allowed_misses = int(binom.ppf(1 - alpha, n_runs, miss_probability))
    return n_runs - allowed_misses


def summarize_verdicts(verdicts: List[ComparisonVerdict]) -> Dict[str, Any]:
    failed = [v.name for v in verdicts if not v.passed]
    return {
        'total': len(verdicts),
        'passed': len(verdicts) - len(failed),
        'failed': failed,
    }
