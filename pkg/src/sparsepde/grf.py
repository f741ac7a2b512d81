"""Gaussian random fields with covariance scale * (-Laplacian + tau^2 I)^(-alpha).

Sampling is spectral on the periodic unit square (or unit interval for the
1D variant): white noise is transformed, each mode is scaled by the square
root of the covariance spectrum, and the result is transformed back. With
this normalization the Fourier-series coefficient of mode m has variance
scale * (lambda_m + tau^2)^(-alpha), where lambda_m is the continuous
-Laplacian eigenvalue of the mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import SpectralGrid

__all__ = ["GrfSpec", "sample_grf", "sample_grf_1d", "grf_mode_std"]


@dataclass(frozen=True)
class GrfSpec:
    tau: float
    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")


def grf_mode_std(spec: GrfSpec, eigenvalues: np.ndarray) -> np.ndarray:
    """Per-mode standard deviation sqrt(scale) * (lambda + tau^2)^(-alpha/2)."""
    return np.sqrt(spec.scale) * (eigenvalues + spec.tau**2) ** (-spec.alpha / 2)


def sample_grf(spec: GrfSpec, size: int, seed) -> np.ndarray:
    """Draw one 2D field; deterministic given the seed (int or Generator)."""
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    std = grf_mode_std(spec, SpectralGrid(size).laplace_eigenvalues)
    w = rng.standard_normal((size, size))
    return size * np.fft.ifft2(std * np.fft.fft2(w)).real


def sample_grf_1d(spec: GrfSpec, size: int, seed) -> np.ndarray:
    """Draw one 1D field on the periodic unit interval."""
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    freq = np.fft.fftfreq(size, d=1.0 / size)
    lam = (2 * np.pi * freq) ** 2
    std = grf_mode_std(spec, lam)
    w = rng.standard_normal(size)
    return np.sqrt(size) * np.fft.ifft(std * np.fft.fft(w)).real
