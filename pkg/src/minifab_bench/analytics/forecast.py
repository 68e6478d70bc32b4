"""
Forecast-error metrics and two baselines: persistence and a least-squares
autoregressive model with intercept, both one-step-ahead over a held-out
tail of the series.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from minifab_bench.errors import ContractError


@dataclass(frozen=True)
class MetricReport:
    mse: float
    r2: float  # nan when the actual series is constant
    mfe: float
    mape: float  # fraction; nan when every actual value is zero
    n: int
    n_nonzero: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_forecast(actual, predicted) -> MetricReport:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1:
        raise ContractError(f"actual and predicted must be equal-length series, got {a.shape} and {p.shape}")
    if a.size == 0:
        raise ContractError("cannot evaluate an empty forecast")
    err = a - p
    mse = float(np.mean(err**2))
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    r2 = 1.0 - float(np.sum(err**2)) / ss_tot if ss_tot > 0 else math.nan
    nonzero = a != 0
    n_nonzero = int(nonzero.sum())
    mape = float(np.mean(np.abs(err[nonzero]) / np.abs(a[nonzero]))) if n_nonzero else math.nan
    return MetricReport(mse, r2, float(np.mean(err)), mape, int(a.size), n_nonzero)


def split_index(n: int, split_fraction: float) -> int:
    """Index of the first test point; the training segment is ``[0, index)``."""
    if not 0 < split_fraction < 1:
        raise ContractError(f"split fraction must be in (0, 1), got {split_fraction}")
    cut = int(math.floor(n * split_fraction))
    if cut < 1 or cut >= n:
        raise ContractError(f"split {split_fraction} of {n} points leaves an empty segment")
    return cut


def persistence_forecast(series, split_fraction: float = 0.8) -> np.ndarray:
    """Predict every test point with the previous observed value."""
    x = np.asarray(series, dtype=float)
    cut = split_index(x.size, split_fraction)
    return x[cut - 1 : -1].copy()


def _windows(x: np.ndarray, lookback: int, start: int, stop: int) -> np.ndarray:
    """Rows ``[1, x[j-lookback], ..., x[j-1]]`` for targets ``j`` in ``[start, stop)``."""
    idx = np.arange(start, stop)[:, None] - lookback + np.arange(lookback)
    return np.column_stack([np.ones(stop - start), x[idx]])


def fit_autoregressive(train, lookback: int = 10) -> np.ndarray:
    """Least-squares AR coefficients ``[intercept, w_1 .. w_lookback]``.

    ``w_1`` multiplies the oldest value in the window. Rank-deficient designs
    get the minimum-norm solution.
    """
    x = np.asarray(train, dtype=float)
    if lookback < 1:
        raise ContractError("lookback must be >= 1")
    if x.size <= lookback + 1:
        raise ContractError(f"training segment of {x.size} points is too short for lookback {lookback}")
    design = _windows(x, lookback, lookback, x.size)
    coef, *_ = np.linalg.lstsq(design, x[lookback:], rcond=None)
    return coef


def autoregressive_forecast(series, lookback: int = 10, split_fraction: float = 0.8) -> np.ndarray:
    """One-step-ahead AR predictions over the test segment using true history."""
    x = np.asarray(series, dtype=float)
    if x.size < lookback + 2:
        raise ContractError(f"series of {x.size} points is too short for lookback {lookback}")
    cut = split_index(x.size, split_fraction)
    coef = fit_autoregressive(x[:cut], lookback)
    return _windows(x, lookback, cut, x.size) @ coef
