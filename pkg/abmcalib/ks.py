"""
ks.py

Two-sample Kolmogorov-Smirnov comparison of epidemic time series.

A time series is turned into a cumulative distribution over the time axis by
a cumulative sum scaled by its final value, the same way cumulative meterset
weights are normalised by the final weight. Both series share the time grid,
so the statistic is the pointwise sup-norm of the CDF difference.
"""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from abmcalib.abm import EpidemicSeries
from abmcalib.errors import AllZeroSeries, LengthMismatch, UnsupportedAlpha

logger = logging.getLogger(__name__)

# two-sample large-sample coefficients c(alpha)
CRITICAL_COEFFICIENTS = {
    0.10: 1.224,
    0.05: 1.358,
    0.025: 1.48,
    0.01: 1.628,
    0.005: 1.731,
    0.001: 1.949,
}


class Label(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"

    def __bool__(self):
        return self is Label.POSITIVE


class TimeSeriesCdf:
    def __init__(self, values: np.ndarray) -> None:
        self.values = values

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return "TimeSeriesCdf(len=%d)" % len(self)


@dataclass(frozen=True)
class KsOutcome:
    statistic: float
    label: Label
    critical_value: float


def to_cdf(series: EpidemicSeries) -> TimeSeriesCdf:
    """
        Cumulative sum along time, scaled so the last value is 1
    :param series: epidemic series
    :return: TimeSeriesCdf
    """
    cumulative = np.cumsum(series.counts, dtype=np.float64)
    if len(cumulative) == 0 or cumulative[-1] == 0:
        raise AllZeroSeries()

    values = cumulative / cumulative[-1]
    # exact 1 at the end regardless of rounding in the division
    values[-1] = 1.0
    return TimeSeriesCdf(values)


def ks_statistic(real_series: EpidemicSeries, sim_series: EpidemicSeries) -> float:
    if len(real_series) != len(sim_series):
        raise LengthMismatch(
            "series lengths differ: %d vs %d" % (len(real_series), len(sim_series))
        )
    f_real = to_cdf(real_series).values
    f_sim = to_cdf(sim_series).values
    return float(np.max(np.abs(f_real - f_sim)))


def ks_critical_value(alpha: float, n: int, m: int) -> float:
    """
        c(alpha) * sqrt((n + m) / (n * m))
    :param alpha: significance level, one of CRITICAL_COEFFICIENTS
    :param n: first sample size
    :param m: second sample size
    """
    coefficient = None
    for a, c in CRITICAL_COEFFICIENTS.items():
        if math.isclose(alpha, a, rel_tol=0.0, abs_tol=1e-12):
            coefficient = c
    if coefficient is None:
        raise UnsupportedAlpha(
            "alpha=%r not in %s" % (alpha, sorted(CRITICAL_COEFFICIENTS))
        )
    if n < 1 or m < 1:
        raise ValueError("sample sizes must be >= 1")

    value = coefficient * math.sqrt((n + m) / (n * m))
    if value > 1.0:
        logger.warning(
            "critical value %.4f exceeds 1 for n=%d, m=%d: every comparison is positive",
            value,
            n,
            m,
        )
    return value


def evaluate_candidate(
    real_series: EpidemicSeries, sim_series: EpidemicSeries, alpha: float
) -> KsOutcome:
    """
        Labels a simulated series against the reference. A simulated series
        without infections is maximally dissimilar (statistic 1, Negative).
    """
    n = len(real_series)
    critical = ks_critical_value(alpha, n, n)

    # validates the reference side first, its AllZeroSeries must propagate
    to_cdf(real_series)
    if len(real_series) != len(sim_series):
        raise LengthMismatch(
            "series lengths differ: %d vs %d" % (len(real_series), len(sim_series))
        )
    if sim_series.total() == 0:
        logger.debug("simulated series has no infections")
        return KsOutcome(1.0, Label.NEGATIVE, critical)

    statistic = ks_statistic(real_series, sim_series)
    label = Label.POSITIVE if statistic <= critical else Label.NEGATIVE
    return KsOutcome(statistic, label, critical)
