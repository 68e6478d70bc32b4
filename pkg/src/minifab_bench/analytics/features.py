"""
Time-series features used to characterise throughput curves.

Moments are population (biased) central moments. Permutation entropy uses
natural logs and is normalised to [0, 1] by ``log(order!)``. Lempel-Ziv
complexity counts LZ76 phrases of the median-binarised series and divides by
the series length.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from minifab_bench.errors import ContractError, DegenerateInputError

FEATURE_NAMES = (
    "skewness",
    "excess_kurtosis",
    "linear_trend_r",
    "permutation_entropy",
    "lempel_ziv_complexity",
)


def _as_array(x, min_len: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractError(f"{what}: expected a 1-D series")
    if x.size < min_len:
        raise ContractError(f"{what}: need at least {min_len} values, got {x.size}")
    return x


def _central_moments(x: np.ndarray, what: str):
    d = x - x.mean()
    m2 = np.mean(d**2)
    if m2 == 0 or np.ptp(x) == 0:
        raise DegenerateInputError(f"{what}: series has zero variance")
    return d, m2


def skewness(x) -> float:
    """Moment coefficient of skewness ``m3 / m2**1.5``."""
    x = _as_array(x, 3, "skewness")
    d, m2 = _central_moments(x, "skewness")
    return float(np.mean(d**3) / m2**1.5)


def excess_kurtosis(x) -> float:
    """``m4 / m2**2 - 3`` (0 for a normal distribution)."""
    x = _as_array(x, 4, "excess_kurtosis")
    d, m2 = _central_moments(x, "excess_kurtosis")
    return float(np.mean(d**4) / m2**2 - 3.0)


def linear_trend_r(x) -> float:
    """Pearson correlation between the sample index and the values."""
    x = _as_array(x, 2, "linear_trend_r")
    d, m2 = _central_moments(x, "linear_trend_r")
    t = np.arange(x.size, dtype=float)
    t -= t.mean()
    return float(np.dot(t, d) / math.sqrt(np.dot(t, t) * np.dot(d, d)))


def permutation_entropy(x, order: int = 3, delay: int = 1) -> float:
    """Normalised Shannon entropy of ordinal patterns.

    Ties inside a window are ranked by position, the earlier sample ranking
    lower.
    """
    if order < 2 or delay < 1:
        raise ContractError("permutation_entropy: order >= 2 and delay >= 1 required")
    x = _as_array(x, order + (order - 1) * (delay - 1) + 1, "permutation_entropy")
    n_windows = x.size - (order - 1) * delay
    idx = np.arange(order) * delay + np.arange(n_windows)[:, None]
    patterns = np.argsort(x[idx], axis=1, kind="stable")
    _, counts = np.unique(patterns, axis=0, return_counts=True)
    p = counts / n_windows
    h = -np.sum(p * np.log(p))
    return float(max(h, 0.0) / math.log(math.factorial(order)))


def binarize_by_median(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x > np.median(x)).astype(np.uint8)


def _longest_previous_match(s: np.ndarray, p: int) -> int:
    """Length of the longest prefix of ``s[p:]`` that also starts at some ``i < p``
    (the occurrence may overlap ``p``)."""
    n = s.size
    cand = np.arange(p)
    k = 0
    while cand.size > 1 and p + k < n:
        cand = cand[s[cand + k] == s[p + k]]
        k += 1
    if cand.size == 0:
        return k - 1
    if p + k >= n:
        return n - p
    i = int(cand[0])
    m = n - p - k
    mismatch = np.flatnonzero(s[i + k : i + k + m] != s[p + k : p + k + m])
    return k + (int(mismatch[0]) if mismatch.size else m)


def lz76_phrase_count(seq) -> int:
    """Number of phrases in the LZ76 exhaustive-history parsing of ``seq``.

    Each phrase is the longest block copyable from earlier positions plus
    one new symbol; an unfinished trailing phrase counts as one.
    """
    s = np.asarray(seq, dtype=np.uint8)
    n = s.size
    count, p = 0, 0
    while p < n:
        match = _longest_previous_match(s, p) if p else 0
        count += 1
        p += match + 1
    return count


def lempel_ziv_complexity(x) -> float:
    """LZ76 phrase count of the median-binarised series over its length."""
    x = _as_array(x, 1, "lempel_ziv_complexity")
    return lz76_phrase_count(binarize_by_median(x)) / x.size


@dataclass(frozen=True)
class FeatureVector:
    skewness: float
    excess_kurtosis: float
    linear_trend_r: float
    permutation_entropy: float
    lempel_ziv_complexity: float

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)


def extract_features(x) -> FeatureVector:
    x = np.asarray(x, dtype=float)
    return FeatureVector(
        skewness(x),
        excess_kurtosis(x),
        linear_trend_r(x),
        permutation_entropy(x),
        lempel_ziv_complexity(x),
    )
