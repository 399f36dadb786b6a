"""Seeded exact generators for fractional Gaussian noise and (fractional) Brownian motion.

Every random draw goes through a Philox counter-based generator keyed by a
64-bit seed, so a given seed produces the same path on every platform.
Replicate seeds are derived with :func:`derive_seed`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError
from .series import Signal

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Seed for replicate ``index`` of an ensemble keyed by ``seed``."""
    return splitmix64((seed & MASK64) ^ splitmix64(index & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class FbmSpec:
    hurst: float
    length: int
    seed: int
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie strictly inside (0, 1), got {self.hurst}")
        if self.length < 2:
            raise DegenerateInputError(f"length must be >= 2, got {self.length}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def fgn_autocovariance(hurst: float, lags, scale: float = 1.0) -> np.ndarray:
    """gamma(k) = scale^2/2 * (|k+1|^2H - 2|k|^2H + |k-1|^2H)."""
    k = np.abs(np.asarray(lags, dtype=np.float64))
    h2 = 2.0 * hurst
    return 0.5 * scale**2 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def circulant_eigenvalues(hurst: float, length: int) -> np.ndarray:
    """Eigenvalues of the size-2N circulant embedding of the unit-scale fGn covariance."""
    g = fgn_autocovariance(hurst, np.arange(length + 1))
    row = np.concatenate((g, g[-2:0:-1]))
    return np.fft.fft(row).real


def _fgn_circulant(eig: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    m = eig.shape[0]
    z = rng.standard_normal((2, m))
    w = np.sqrt(eig / m) * (z[0] + 1j * z[1])
    return np.fft.fft(w).real[:n]


def _fgn_hosking(hurst: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Durbin-Levinson recursion; exact but O(n^2)."""
    g = fgn_autocovariance(hurst, np.arange(n))
    z = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = np.sqrt(g[0]) * z[0]
    phi = np.empty(0)
    v = g[0]
    for i in range(1, n):
        k = (g[i] - np.dot(phi, g[i - 1:0:-1])) / v
        phi = np.append(phi - k * phi[::-1], k)
        v *= 1.0 - k * k
        x[i] = np.dot(phi, x[i - 1::-1]) + np.sqrt(v) * z[i]
    return x


def generate_fgn(spec: FbmSpec, method: str = "auto") -> Signal:
    """Fractional Gaussian noise with unit-lag standard deviation ``spec.scale``.

    ``method`` is ``"auto"`` (circulant embedding, falling back to the
    sequential method if the embedding is not non-negative definite),
    ``"circulant"`` or ``"hosking"``.
    """
    rng = make_rng(spec.seed)
    n = spec.length
    if spec.hurst == 0.5 and method == "auto":
        return Signal(spec.scale * rng.standard_normal(n))
    if method in ("auto", "circulant"):
        eig = circulant_eigenvalues(spec.hurst, n)
        tol = 1e-10 * eig.max()
        if eig.min() >= -tol:
            return Signal(spec.scale * _fgn_circulant(np.clip(eig, 0.0, None), n, rng))
        if method == "circulant":
            raise ValueError("circulant embedding has negative eigenvalues")
        log.info("negative circulant eigenvalue for H=%g, T=%d; using sequential method", spec.hurst, n)
    elif method != "hosking":
        raise ValueError(f"unknown method {method!r}")
    return Signal(spec.scale * _fgn_hosking(spec.hurst, n, rng))


def generate_fbm(spec: FbmSpec, method: str = "auto") -> Signal:
    """Cumulative sum of :func:`generate_fgn`; the path starts at its first increment."""
    return Signal(np.cumsum(generate_fgn(spec, method).values))


def generate_bm(length: int, seed: int, scale: float = 1.0) -> Signal:
    """Brownian motion path; identical to ``generate_fbm`` with ``hurst=0.5``."""
    return generate_fbm(FbmSpec(0.5, length, seed, scale))
