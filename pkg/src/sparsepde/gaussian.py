"""Exact Gaussian joint priors and their closed-form denoiser.

For Poisson and Helmholtz on the periodic map the coefficient channel is a
stationary Gaussian random field and the solution channel is a per-mode
linear transfer of it, so the joint (a, u) distribution is Gaussian with an
independent 2x2 covariance block per Fourier mode:

    Sigma_m = s_m * [[1, g_m], [g_m, g_m^2]],

where s_m is the coefficient spectrum and g_m the transfer factor. The
posterior-mean denoiser under noise std sigma is Sigma (Sigma + sigma^2 I)^-1
applied per mode, which Sherman-Morrison reduces to the rank-one form
(s_m / (sigma^2 + s_m (1 + g_m^2))) * [[1, g], [g, g^2]].

The transfer uses the eigenvalues of the periodic 5-point Laplacian, so the
finite-difference residual of any state in the prior's support is exactly
zero. This backend is the sampler-correctness oracle: it separates "is the
guided sampler right?" from "is the network trained well?".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import SpectralGrid
from .grf import GrfSpec, grf_mode_std
from .pdes import PdeSpec, pde_spec

__all__ = ["GaussianPrior", "gaussian_joint_prior"]


@dataclass(frozen=True)
class GaussianPrior:
    """Per-mode 2x2 Gaussian joint prior with closed-form denoising."""

    family: str
    size: int
    k: float
    spectrum_a: np.ndarray  # (n, n) Fourier-series variance of channel a
    transfer: np.ndarray    # (n, n) real factor: u_mode = transfer * a_mode

    def __post_init__(self):
        s = np.asarray(self.spectrum_a, dtype=np.float64)
        if np.any(s < 0):
            raise ValueError("mode variances must be nonnegative")

    @property
    def channels(self) -> int:
        return 2

    def pde(self) -> PdeSpec:
        """The residual operator this prior's support satisfies exactly."""
        return pde_spec(self.family, k=self.k, boundary="periodic", mollify=False)

    def mode_variances(self) -> np.ndarray:
        """(2, n, n) per-mode variances of the two channels."""
        return np.stack([self.spectrum_a, self.spectrum_a * self.transfer**2])

    def _gain(self, sigma: float) -> np.ndarray:
        # pixel-space noise N(0, sigma^2 I) is white in the unitary DFT basis,
        # where the prior mode variance is n^2 times the series-convention
        # spectrum stored here
        s = self.size * self.size * self.spectrum_a
        g = self.transfer
        denom = sigma * sigma + s * (1.0 + g * g)
        safe = np.where(denom > 0, denom, 1.0)
        w = np.where(denom > 0, s / safe, 0.0)
        return np.stack([w, w * g, w * g * g])  # B11, B12, B22

    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        """Posterior mean of the clean state given x = clean + N(0, sigma^2 I).

        Accepts (..., 2, n, n); linear in x.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-3:] != (2, self.size, self.size):
            raise ValueError(f"expected (..., 2, {self.size}, {self.size}), "
                             f"got {x.shape}")
        b11, b12, b22 = self._gain(float(sigma))
        xf = np.fft.fft2(x, axes=(-2, -1))
        xa, xu = xf[..., 0, :, :], xf[..., 1, :, :]
        out = np.stack([b11 * xa + b12 * xu, b12 * xa + b22 * xu], axis=-3)
        return np.fft.ifft2(out, axes=(-2, -1)).real

    def vjp(self, x: np.ndarray, sigma: float, cotangent: np.ndarray) -> np.ndarray:
        """Jacobian-transpose product; the map is linear and self-adjoint."""
        del x
        return self.denoise(cotangent, sigma)

    def score(self, x: np.ndarray, sigma: float) -> np.ndarray:
        if sigma <= 0:
            raise ValueError("score needs sigma > 0")
        return (self.denoise(x, sigma) - x) / (sigma * sigma)

    def sample(self, seed, n_samples: int | None = None) -> np.ndarray:
        """Exact draws from the joint prior: (2, n, n) or (k, 2, n, n)."""
        rng = np.random.default_rng(seed)
        shape = (self.size, self.size) if n_samples is None \
            else (n_samples, self.size, self.size)
        w = rng.standard_normal(shape)
        a_hat = np.sqrt(self.spectrum_a) * np.fft.fft2(w, axes=(-2, -1))
        a = self.size * np.fft.ifft2(a_hat, axes=(-2, -1)).real
        u = self.size * np.fft.ifft2(self.transfer * a_hat, axes=(-2, -1)).real
        return np.stack([a, u], axis=-3)


def gaussian_joint_prior(family: str, size: int, grf: GrfSpec | None = None,
                         k: float | None = None) -> GaussianPrior:
    """Build the exact joint prior for "poisson" or "helmholtz".

    Darcy (binarized coefficients) and the dynamic families have non-Gaussian
    joints, so no analytic prior exists for them.
    """
    if family not in ("poisson", "helmholtz"):
        raise ValueError(f"no analytic joint prior for family {family!r}")
    if grf is None:
        grf = GrfSpec(tau=3.0, alpha=2.0, scale=1.0)
    if k is None:
        k = 0.0 if family == "poisson" else 1.0
    grid = SpectralGrid(size)
    s = grf_mode_std(grf, grid.laplace_eigenvalues) ** 2
    lam_fd = grid.fd_laplace_eigenvalues
    denom = k * k - lam_fd
    if k == 0.0:
        # periodic Poisson is solvable only against the zero-mean part of a;
        # the coefficient keeps its mean mode (the residual operator projects
        # it out) while the solution mean is pinned to zero as a gauge
        denom = denom.copy()
        denom[0, 0] = 1.0
    if np.any(np.abs(denom) < 1e-9):
        raise ValueError(f"k^2 = {k * k} collides with a discrete eigenvalue")
    g = 1.0 / denom
    if k == 0.0:
        g[0, 0] = 0.0
    return GaussianPrior(family=family, size=size, k=float(k),
                         spectrum_a=s, transfer=g)
