"""Empirical mode decomposition by envelope sifting.

The decomposition peels off intrinsic mode functions (IMFs) from the fastest
oscillation to the slowest until the running residue is constant, monotone,
or has a single interior extremum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import DegenerateInputError, NotSiftableError, UndefinedPeriodError
from .series import ArrayLike, Signal, as_array, count_zero_crossings, find_local_extrema, variance

log = logging.getLogger(__name__)

IO_EPS = 1e-30
# residue spread below this fraction of max|x| is rounding noise, i.e. constant
CONSTANT_RTOL = 1e-10


@dataclass(frozen=True)
class SiftConfig:
    sd_threshold: float = 1e-4
    max_sift_iterations: int = 200
    max_imfs: int = 64
    envelope_boundary: int = 2

    def __post_init__(self):
        for name in ("sd_threshold", "max_sift_iterations", "max_imfs", "envelope_boundary"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class Imf:
    values: np.ndarray
    index_k: int
    zero_crossings: int
    extrema_count: int
    period_samples: Optional[float]
    variance: float
    sift_iterations: int = 0

    @property
    def has_period(self) -> bool:
        return self.period_samples is not None


@dataclass(eq=False)
class Decomposition:
    source: Signal
    imfs: List[Imf]
    residue: np.ndarray
    io: float = 0.0
    warnings: List[str] = field(default_factory=list)

    @property
    def n_imfs(self) -> int:
        return len(self.imfs)

    @property
    def length(self) -> int:
        return len(self.source)

    def components(self) -> np.ndarray:
        """IMFs followed by the residue, shape ``(n_imfs + 1, T)``."""
        return np.vstack([imf.values for imf in self.imfs] + [self.residue])

    def labels(self) -> List[str]:
        return [f"imf{imf.index_k}" for imf in self.imfs] + ["residue"]

    def reconstruct(self) -> np.ndarray:
        total = self.residue.copy()
        for imf in self.imfs:
            total += imf.values
        return total


def _make_imf(values: np.ndarray, k: int, iterations: int = 0) -> Imf:
    maxima, minima = find_local_extrema(values)
    zc = count_zero_crossings(values)
    return Imf(
        values=values,
        index_k=k,
        zero_crossings=zc,
        extrema_count=len(maxima) + len(minima),
        period_samples=(len(values) / zc) if zc > 0 else None,
        variance=variance(values),
        sift_iterations=iterations,
    )


def _slice_head(idx: np.ndarray, start: int, stop: int) -> np.ndarray:
    return idx[start:max(start, min(stop, len(idx)))]


def _slice_tail(idx: np.ndarray, start_from_end: int, stop_from_end: int) -> np.ndarray:
    # elements idx[n - start_from_end : n - stop_from_end]
    n = len(idx)
    return idx[max(n - start_from_end, 0):max(n - stop_from_end, 0)]


def _boundary_knots(x: np.ndarray, imax: np.ndarray, imin: np.ndarray, nsym: int):
    """Mirror ``nsym`` extrema beyond each end.

    Returns (max_positions, max_values, min_positions, min_values), sorted by position.
    The symmetry axis is the outermost extremum, or the end sample itself when the
    end sample lies beyond the outermost extremum of the opposite kind (the end
    sample then joins that envelope as a knot).
    """
    last = len(x) - 1

    # left edge
    if imax[0] < imin[0]:
        if x[0] > x[imin[0]]:
            lsym = imax[0]
            lmax = _slice_head(imax, 1, nsym + 1)
            lmin = _slice_head(imin, 0, nsym)
        else:
            lsym = 0
            lmax = _slice_head(imax, 0, nsym)
            lmin = np.append(0, _slice_head(imin, 0, nsym - 1))
    else:
        if x[0] < x[imax[0]]:
            lsym = imin[0]
            lmax = _slice_head(imax, 0, nsym)
            lmin = _slice_head(imin, 1, nsym + 1)
        else:
            lsym = 0
            lmax = np.append(0, _slice_head(imax, 0, nsym - 1))
            lmin = _slice_head(imin, 0, nsym)
    if lsym != 0 and (
        lmax.size == 0 or lmin.size == 0 or 2 * lsym - lmax.max() > 0 or 2 * lsym - lmin.max() > 0
    ):
        if lsym == imax[0]:
            lmax = _slice_head(imax, 0, nsym)
        else:
            lmin = _slice_head(imin, 0, nsym)
        lsym = 0

    # right edge
    if imax[-1] > imin[-1]:
        if x[last] > x[imin[-1]]:
            rsym = imax[-1]
            rmax = _slice_tail(imax, nsym + 1, 1)
            rmin = _slice_tail(imin, nsym, 0)
        else:
            rsym = last
            rmax = _slice_tail(imax, nsym, 0)
            rmin = np.append(_slice_tail(imin, nsym - 1, 0), last)
    else:
        if x[last] < x[imax[-1]]:
            rsym = imin[-1]
            rmax = _slice_tail(imax, nsym, 0)
            rmin = _slice_tail(imin, nsym + 1, 1)
        else:
            rsym = last
            rmax = np.append(_slice_tail(imax, nsym - 1, 0), last)
            rmin = _slice_tail(imin, nsym, 0)
    if rsym != last and (
        rmax.size == 0 or rmin.size == 0 or 2 * rsym - rmax.min() < last or 2 * rsym - rmin.min() < last
    ):
        if rsym == imax[-1]:
            rmax = _slice_tail(imax, nsym, 0)
        else:
            rmin = _slice_tail(imin, nsym, 0)
        rsym = last

    def knots(real, left, right):
        pos = np.concatenate((2 * lsym - left[::-1], real, 2 * rsym - right[::-1]))
        vals = np.concatenate((x[left[::-1]], x[real], x[right[::-1]]))
        # drop coincident knots (an end sample mirrored onto itself)
        keep = np.concatenate(([True], np.diff(pos) > 0))
        return pos[keep].astype(np.float64), vals[keep]

    tmax, vmax = knots(imax, lmax, rmax)
    tmin, vmin = knots(imin, lmin, rmin)
    return tmax, vmax, tmin, vmin


def envelope_mean(x: np.ndarray, imax: np.ndarray, imin: np.ndarray, nsym: int = 2) -> np.ndarray:
    """Mean of the natural cubic-spline upper and lower envelopes."""
    t = np.arange(len(x), dtype=np.float64)
    tmax, vmax, tmin, vmin = _boundary_knots(x, imax, imin, nsym)
    upper = CubicSpline(tmax, vmax, bc_type="natural")(t)
    lower = CubicSpline(tmin, vmin, bc_type="natural")(t)
    return 0.5 * (upper + lower)


def _satisfies_condition_one(n_extrema: int, h: np.ndarray) -> bool:
    return abs(n_extrema - count_zero_crossings(h)) <= 1


def _sift_values(r: np.ndarray, cfg: SiftConfig) -> tuple[np.ndarray, int]:
    imax, imin = find_local_extrema(r)
    if len(imax) + len(imin) < 2:
        raise NotSiftableError(f"need at least two extrema, got {len(imax) + len(imin)}")
    h = r
    last_valid = None
    it = 0
    while it < cfg.max_sift_iterations:
        it += 1
        m = envelope_mean(h, imax, imin, cfg.envelope_boundary)
        h_new = h - m
        energy = float(np.dot(h, h))
        sd = float(np.dot(m, m)) / energy if energy > 0 else 0.0
        h = h_new
        imax, imin = find_local_extrema(h)
        ok = _satisfies_condition_one(len(imax) + len(imin), h)
        if ok:
            last_valid = (h, it)
            if sd < cfg.sd_threshold:
                return h, it
        if len(imax) == 0 or len(imin) == 0:
            break
    if last_valid is not None:
        return last_valid
    log.warning("sifting stopped after %d iterations without meeting the extrema/zero-crossing condition", it)
    return h, it


def sift(residual: ArrayLike, cfg: SiftConfig = SiftConfig(), index_k: int = 1) -> Imf:
    """Extract one IMF from ``residual``.

    Sifting stops once the candidate's extrema and zero-crossing counts differ by
    at most one and ``sum(m^2) / sum(h^2)`` (envelope mean ``m`` against the
    previous candidate ``h``) drops below ``cfg.sd_threshold``. Raises
    NotSiftableError when the input has at most one interior extremum.
    """
    r = as_array(residual)
    if len(r) < 3:
        raise NotSiftableError("signal shorter than 3 samples")
    values, iterations = _sift_values(r, cfg)
    return _make_imf(np.array(values), index_k, iterations)


def index_of_orthogonality(d: Decomposition, normalization: str = "energy") -> float:
    """Index of orthogonality over all IMFs plus the residue.

    The cross-term total at time t is ``sum_{j != k} C_j(t) C_k(t)``.
    ``normalization="energy"`` divides the time-summed cross terms by ``sum_t x(t)^2``;
    ``"pointwise"`` divides each time step by ``x(t)^2`` and sums, skipping steps
    where ``x(t)^2 < 1e-30``.
    """
    comps = d.components()
    x = d.source.values
    total = comps.sum(axis=0)
    cross = total * total - np.einsum("kt,kt->t", comps, comps)
    x2 = x * x
    if normalization == "energy":
        denom = float(x2.sum())
        return float(cross.sum() / denom) if denom >= IO_EPS else 0.0
    if normalization == "pointwise":
        ok = x2 >= IO_EPS
        return float(np.sum(cross[ok] / x2[ok]))
    raise ValueError(f"unknown normalization {normalization!r}")


def imf_period(imf: Imf, total_length: int) -> float:
    """Period in samples: series length over zero-crossing count."""
    if imf.zero_crossings < 1:
        raise UndefinedPeriodError(f"IMF {imf.index_k} has no zero crossings")
    return total_length / imf.zero_crossings


def _period_warnings(imfs: List[Imf]) -> List[str]:
    out = []
    periods = [(imf.index_k, imf.period_samples) for imf in imfs if imf.has_period]
    limit = len(imfs) - 2
    for (k0, p0), (k1, p1) in zip(periods, periods[1:]):
        if p1 < p0 and k1 <= limit:
            out.append(f"period decreases from IMF {k0} ({p0:.4g}) to IMF {k1} ({p1:.4g})")
    return out


def decompose(s: ArrayLike, cfg: SiftConfig = SiftConfig(), io_normalization: str = "energy") -> Decomposition:
    """Run EMD to completion and attach diagnostics."""
    signal = s if isinstance(s, Signal) else Signal(as_array(s))
    x = signal.values
    if len(x) < 3:
        raise DegenerateInputError("decomposition needs at least 3 samples")
    r = x.copy()
    floor = CONSTANT_RTOL * float(np.max(np.abs(x)))
    imfs: List[Imf] = []
    while len(imfs) < cfg.max_imfs:
        if np.ptp(r) <= floor:
            break
        try:
            values, iterations = _sift_values(r, cfg)
        except NotSiftableError:
            break
        values = np.array(values)
        imfs.append(_make_imf(values, len(imfs) + 1, iterations))
        r = r - values
    d = Decomposition(source=signal, imfs=imfs, residue=r)
    d.io = index_of_orthogonality(d, io_normalization)
    d.warnings.extend(_period_warnings(imfs))
    for w in d.warnings:
        log.warning("%s: %s", signal.label or "signal", w)
    return d


def trend(d: Decomposition, m: int) -> Signal:
    """Residue plus the ``m`` slowest IMFs."""
    if not 0 <= m <= d.n_imfs:
        raise ValueError(f"m must lie in [0, {d.n_imfs}], got {m}")
    out = d.residue.copy()
    for imf in d.imfs[d.n_imfs - m:]:
        out += imf.values
    return d.source.with_values(out)
