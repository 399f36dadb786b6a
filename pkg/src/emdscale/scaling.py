"""IMF variance-period scaling, its Monte-Carlo validation, and the Brownian baseline score.

For a self-similar process the variance of the k-th IMF grows as a power of its
period, ``var_k ~ tau_k ** (2H)``; a log-log least-squares fit over the IMFs
therefore yields an exponent estimate ``H* = slope / 2``. Comparing a series'
IMF variances against rescaled Brownian-motion lines gives the ``<R2_Bm>``
deviation score used to rank series.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .emd import Decomposition, SiftConfig, decompose
from .exceptions import (
    DegenerateInputError,
    EnsembleFailureError,
    InsufficientComponentsError,
    SingularFitError,
)
from .series import ArrayLike, LinearFit, as_array, linear_fit, percentile
from .synth import FbmSpec, derive_seed, generate_bm, generate_fbm

log = logging.getLogger(__name__)

MIN_IMFS = 3
MAX_BASELINE_RETRIES = 3
MAX_FAILED_FRACTION = 0.10


@dataclass(frozen=True, eq=False)
class ScalingFit:
    periods: np.ndarray
    variances: np.ndarray
    h_star: float
    log_intercept: float
    r_squared: float
    n_imfs_used: int
    slope: float

    @property
    def log_periods(self) -> np.ndarray:
        return np.log(self.periods)

    @property
    def log_variances(self) -> np.ndarray:
        return np.log(self.variances)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.log_periods.tolist(), self.log_variances.tolist()))


def scaling_points(d: Decomposition) -> tuple[np.ndarray, np.ndarray]:
    """(periods, variances) of the IMFs with a defined period; the residue never counts."""
    usable = [imf for imf in d.imfs if imf.has_period and imf.variance > 0]
    periods = np.array([imf.period_samples for imf in usable], dtype=np.float64)
    variances = np.array([imf.variance for imf in usable], dtype=np.float64)
    return periods, variances


def fit_points(periods: Sequence[float], variances: Sequence[float], min_points: int = MIN_IMFS) -> ScalingFit:
    periods = np.asarray(periods, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if periods.shape[0] < min_points:
        raise InsufficientComponentsError(
            f"need at least {min_points} IMFs with a defined period, got {periods.shape[0]}"
        )
    fit = linear_fit(np.log(periods), np.log(variances))
    return ScalingFit(
        periods=periods,
        variances=variances,
        h_star=fit.slope / 2.0,
        log_intercept=fit.intercept,
        r_squared=fit.r_squared,
        n_imfs_used=fit.n_points,
        slope=fit.slope,
    )


def fit_variance_scaling(d: Decomposition, min_imfs: int = MIN_IMFS) -> ScalingFit:
    """Regress log IMF variance on log IMF period; ``h_star`` is half the slope.

    For fractional Gaussian noise input the slope is ``2(H - 1)`` instead, so the
    Hurst exponent is ``h_star + 1``.
    """
    periods, variances = scaling_points(d)
    return fit_points(periods, variances, min_imfs)


# Monte-Carlo study -----------------------------------------------------------


def _run_replicates(fn: Callable, args: Sequence, workers: int) -> list:
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args))


@dataclass
class SimulationSummary:
    hurst: float
    length: int
    n_reps: int
    seed: int
    h_stars: List[float]
    n_imfs: List[int]
    failures: List[int] = field(default_factory=list)
    h_generalized: Optional[List[float]] = None

    @property
    def mean_h_star(self) -> float:
        return float(np.mean(self.h_stars))

    @property
    def rmse(self) -> float:
        return rmse(self.h_stars, self.hurst)

    @property
    def mean_h_generalized(self) -> Optional[float]:
        return None if self.h_generalized is None else float(np.mean(self.h_generalized))

    @property
    def rmse_generalized(self) -> Optional[float]:
        return None if self.h_generalized is None else rmse(self.h_generalized, self.hurst)


def rmse(estimates: Sequence[float], truth: float) -> float:
    e = np.asarray(estimates, dtype=np.float64) - truth
    return float(np.sqrt(np.mean(e * e)))


def _simulate_one(task):
    hurst, length, seed, cfg, with_hg, q, max_lag = task
    path = generate_fbm(FbmSpec(hurst, length, seed))
    d = decompose(path, cfg)
    try:
        h = fit_variance_scaling(d).h_star
    except InsufficientComponentsError:
        h = None
    hg = generalized_hurst(path, q, max_lag) if with_hg else None
    return h, d.n_imfs, hg


def monte_carlo_h(
    hurst: float,
    length: int,
    n_reps: int,
    seed: int,
    cfg: SiftConfig = SiftConfig(),
    with_generalized: bool = False,
    q: float = 1.0,
    max_lag: int = 19,
    workers: int = 1,
) -> SimulationSummary:
    """Decompose ``n_reps`` fBm paths and summarise H* (mean and RMSE against ``hurst``).

    Replicate ``i`` uses ``derive_seed(seed, i)``. Paths yielding fewer than three
    usable IMFs are skipped and listed in ``failures``.
    """
    if n_reps < 2:
        raise ValueError("n_reps must be >= 2")
    tasks = [(hurst, length, derive_seed(seed, i), cfg, with_generalized, q, max_lag) for i in range(n_reps)]
    results = _run_replicates(_simulate_one, tasks, workers)
    summary = SimulationSummary(hurst, length, n_reps, seed, h_stars=[], n_imfs=[],
                                h_generalized=[] if with_generalized else None)
    for i, (h, n, hg) in enumerate(results):
        summary.n_imfs.append(n)
        if h is None:
            summary.failures.append(i)
            continue
        summary.h_stars.append(h)
        if with_generalized:
            summary.h_generalized.append(hg)
    if not summary.h_stars:
        raise EnsembleFailureError("every replicate failed to produce a scaling fit", summary.failures)
    if summary.failures:
        log.warning("%d of %d replicates had too few IMFs and were skipped", len(summary.failures), n_reps)
    return summary


def generalized_hurst(s: ArrayLike, q: float = 1.0, max_lag: int = 19) -> float:
    """Generalized Hurst exponent H(q) from ``E|X(t+tau) - X(t)|^q ~ tau^(q H(q))``, tau = 1..max_lag."""
    x = as_array(s)
    if q <= 0:
        raise ValueError("q must be positive")
    if max_lag < 2:
        raise ValueError("max_lag must be >= 2")
    if x.shape[0] < 10 * max_lag:
        raise DegenerateInputError(f"need at least {10 * max_lag} samples for max_lag={max_lag}")
    lags = np.arange(1, max_lag + 1)
    moments = np.array([np.mean(np.abs(x[lag:] - x[:-lag]) ** q) for lag in lags])
    if np.any(moments <= 0):
        raise SingularFitError("increment moments vanish; series is constant at some lag")
    return linear_fit(np.log(lags), np.log(moments)).slope / q


# Brownian-motion baseline -----------------------------------------------------


def mean_variance_per_period(periods: np.ndarray, variances: np.ndarray) -> float:
    return float(np.mean(variances / periods))


def rescale_factor(x_fit: ScalingFit, bm_decomposition: Decomposition) -> float:
    """Ratio of mean var/period over the series' IMFs to the same mean over a Bm replicate's IMFs."""
    bm_periods, bm_variances = scaling_points(bm_decomposition)
    return rescale_factor_from_points(x_fit.periods, x_fit.variances, bm_periods, bm_variances)


def rescale_factor_from_points(x_periods, x_variances, bm_periods, bm_variances) -> float:
    if len(x_periods) == 0 or len(bm_periods) == 0:
        raise InsufficientComponentsError("both decompositions need at least one IMF with a period")
    denom = mean_variance_per_period(np.asarray(bm_periods), np.asarray(bm_variances))
    if not denom > 0:
        raise SingularFitError("Bm replicate has zero variance per period")
    return mean_variance_per_period(np.asarray(x_periods), np.asarray(x_variances)) / denom


def unit_slope_intercept(periods: np.ndarray, variances: np.ndarray) -> float:
    """``c0`` of the least-squares line ``log var = log tau + log c0`` (slope fixed at 2 * 0.5)."""
    return float(np.exp(np.mean(np.log(variances) - np.log(periods))))


def baseline_r2(x_fit: ScalingFit, c_i: float, c0_i: float) -> float:
    """Goodness of the fixed line ``log(c_i * c0_i * tau)`` against the series' IMF points.

    Can be negative: the line is not fitted to these points.
    """
    if x_fit.n_imfs_used < 2:
        raise DegenerateInputError("need at least 2 scaling points")
    lv = x_fit.log_variances
    resid = lv - np.log(c_i * c0_i * x_fit.periods)
    centred = lv - lv.mean()
    ss_tot = float(np.dot(centred, centred))
    if ss_tot == 0.0:
        raise SingularFitError("series' log-variances have zero spread")
    return 1.0 - float(np.dot(resid, resid)) / ss_tot


@dataclass(frozen=True)
class BaselineReplicate:
    replicate_index: int
    c_i: float
    c0_i: float
    r2_bm_i: float
    n_imfs: int
    seed: int


@dataclass
class BaselineEnsemble:
    replicates: List[BaselineReplicate]
    mean_r2_bm: float
    p05: float
    p95: float
    bm_length: int
    seed: int
    failures: List[int] = field(default_factory=list)

    @property
    def r2_values(self) -> np.ndarray:
        return np.array([r.r2_bm_i for r in self.replicates])


@dataclass(frozen=True, eq=False)
class BmReplicateFit:
    """Scaling points of one decomposed Bm replicate, reusable across series of equal length."""

    replicate_index: int
    seed: int
    periods: np.ndarray
    variances: np.ndarray
    n_imfs: int


def _bm_replicate(task) -> Optional[BmReplicateFit]:
    index, length, seed, cfg = task
    for attempt in range(MAX_BASELINE_RETRIES + 1):
        s = seed if attempt == 0 else derive_seed(seed, attempt)
        d = decompose(generate_bm(length, s), cfg)
        periods, variances = scaling_points(d)
        if periods.shape[0] >= MIN_IMFS:
            return BmReplicateFit(index, s, periods, variances, d.n_imfs)
    return None


def bm_replicate_fits(length: int, n_reps: int, seed: int, cfg: SiftConfig = SiftConfig(),
                      workers: int = 1) -> list[Optional[BmReplicateFit]]:
    """Decompose ``n_reps`` Bm paths; ``None`` marks a replicate that failed every retry."""
    tasks = [(i, length, derive_seed(seed, i), cfg) for i in range(n_reps)]
    return _run_replicates(_bm_replicate, tasks, workers)


def baseline_compare(
    x_decomposition: Decomposition,
    n_reps: int = 100,
    seed: int = 0,
    cfg: SiftConfig = SiftConfig(),
    workers: int = 1,
    bm_fits: Optional[Sequence[Optional[BmReplicateFit]]] = None,
) -> BaselineEnsemble:
    """Score a series against ``n_reps`` rescaled Brownian-motion replicates of the same length.

    ``bm_fits`` may carry a precomputed :func:`bm_replicate_fits` result for the
    same (length, n_reps, seed, cfg); the outcome is identical either way.
    """
    if n_reps < 2:
        raise ValueError("n_reps must be >= 2")
    x_fit = fit_variance_scaling(x_decomposition)
    length = x_decomposition.length
    if bm_fits is None:
        bm_fits = bm_replicate_fits(length, n_reps, seed, cfg, workers)
    elif len(bm_fits) != n_reps:
        raise ValueError("bm_fits does not match n_reps")

    replicates, failures = [], []
    for i, bm in enumerate(bm_fits):
        if bm is None:
            failures.append(i)
            continue
        c_i = rescale_factor_from_points(x_fit.periods, x_fit.variances, bm.periods, bm.variances)
        c0_i = unit_slope_intercept(bm.periods, bm.variances)
        replicates.append(BaselineReplicate(i, c_i, c0_i, baseline_r2(x_fit, c_i, c0_i), bm.n_imfs, bm.seed))
    if len(failures) > MAX_FAILED_FRACTION * n_reps or not replicates:
        raise EnsembleFailureError(f"{len(failures)} of {n_reps} Bm replicates failed", failures)
    r2 = [r.r2_bm_i for r in replicates]
    return BaselineEnsemble(
        replicates=replicates,
        mean_r2_bm=float(np.mean(r2)),
        p05=percentile(r2, 0.05),
        p95=percentile(r2, 0.95),
        bm_length=length,
        seed=seed,
        failures=failures,
    )


# Ranking ------------------------------------------------------------------------


@dataclass(frozen=True)
class RankingRow:
    label: str
    n_imfs: int
    io: float
    r_squared: float
    h_star: float
    mean_r2_bm: float
    p05: float = math.nan
    p95: float = math.nan


RANK_METRICS = ("mean_r2_bm", "r_squared")


def rank(rows: Sequence[RankingRow], metric: str = "mean_r2_bm") -> list[RankingRow]:
    """Descending by ``metric``; equal values fall back to label order."""
    if metric not in RANK_METRICS:
        raise ValueError(f"metric must be one of {RANK_METRICS}")
    return sorted(rows, key=lambda r: (-getattr(r, metric), r.label))


def rank_positions(rows: Sequence[RankingRow], metric: str) -> list[int]:
    """1-based rank of each input row (in input order) under ``metric``."""
    order = rank(rows, metric)
    pos = {id(r): i + 1 for i, r in enumerate(order)}
    return [pos[id(r)] for r in rows]
