"""Core series type and the small set of statistics every other module leans on."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import DegenerateInputError, SingularFitError

ArrayLike = Union["Signal", Sequence[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class Signal:
    """A finite real-valued time series.

    ``values`` is stored as a read-only float64 array. ``sample_interval_seconds``
    is optional metadata used only when converting periods to wall-clock units.
    """

    values: np.ndarray
    sample_interval_seconds: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise DegenerateInputError("signal contains NaN or infinite values")
        if self.sample_interval_seconds is not None and not self.sample_interval_seconds > 0:
            raise DegenerateInputError("sample_interval_seconds must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def with_values(self, values) -> "Signal":
        return Signal(values, self.sample_interval_seconds, self.label)


def as_array(s: ArrayLike) -> np.ndarray:
    if isinstance(s, Signal):
        return s.values
    arr = np.asarray(s, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise DegenerateInputError("series contains NaN or infinite values")
    return arr


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int

    def predict(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=np.float64)


def find_local_extrema(s: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """Return interior (maxima, minima) indices.

    A flat run that is higher (lower) than both neighbouring runs counts once,
    at its first index. Endpoints are never extrema.
    """
    x = as_array(s)
    if x.shape[0] < 3:
        raise DegenerateInputError("need at least 3 samples to locate interior extrema")
    # first index of every run of equal values
    starts = np.flatnonzero(np.concatenate(([True], x[1:] != x[:-1])))
    v = x[starts]
    if v.shape[0] < 3:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty.copy()
    mid, left, right = v[1:-1], v[:-2], v[2:]
    is_max = (mid > left) & (mid > right)
    is_min = (mid < left) & (mid < right)
    inner = starts[1:-1]
    return inner[is_max], inner[is_min]


def count_zero_crossings(s: ArrayLike) -> int:
    """Number of strict sign flips; exact zeros take the sign of the last nonzero value."""
    x = as_array(s)
    signs = np.sign(x)
    signs = signs[signs != 0]
    if signs.shape[0] < 2:
        return 0
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def variance(s: ArrayLike) -> float:
    """Population variance (divides by the series length)."""
    x = as_array(s)
    if x.shape[0] < 2:
        raise DegenerateInputError("variance needs at least 2 samples")
    d = x - x.mean()
    return float(np.dot(d, d) / x.shape[0])


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> LinearFit:
    """Ordinary least squares ``y = intercept + slope * x``."""
    x = np.asarray(xs, dtype=np.float64).reshape(-1)
    y = np.asarray(ys, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise DegenerateInputError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    n = x.shape[0]
    if n < 2:
        raise DegenerateInputError("linear fit needs at least 2 points")
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(np.dot(dx, dx))
    if sxx == 0.0:
        raise SingularFitError("abscissae have zero variance")
    slope = float(np.dot(dx, dy)) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(dy, dy))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return LinearFit(slope=slope, intercept=intercept, r_squared=r2, n_points=n)


def percentile(values: Sequence[float], p: float) -> float:
    """Order statistic at fraction ``p`` with linear interpolation on ``p*(n-1)``."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.shape[0] == 0:
        raise DegenerateInputError("percentile of an empty list")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return float(np.quantile(v, p, method="linear"))
