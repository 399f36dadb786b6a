"""EMD-based variance-period scaling analysis of time series."""

__version__ = "0.1.0"

from .emd import Decomposition, Imf, SiftConfig, decompose, index_of_orthogonality, sift, trend
from .scaling import (
    BaselineEnsemble,
    BaselineReplicate,
    RankingRow,
    ScalingFit,
    baseline_compare,
    baseline_r2,
    fit_variance_scaling,
    generalized_hurst,
    monte_carlo_h,
    rank,
    rescale_factor,
)
from .series import Signal, count_zero_crossings, find_local_extrema, linear_fit, percentile, variance
from .synth import FbmSpec, derive_seed, generate_bm, generate_fbm, generate_fgn
