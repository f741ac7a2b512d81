"""Gaussian random field sampling: spectrum and determinism."""

import numpy as np
import pytest

from sparsepde.fields import SpectralGrid
from sparsepde.grf import GrfSpec, sample_grf, sample_grf_1d


def mode_variances(samples):
    """Empirical per-mode variance of Fourier-series coefficients."""
    n = samples.shape[-1]
    coeffs = np.fft.fft2(samples, axes=(-2, -1)) / (n * n)
    return (np.abs(coeffs) ** 2).mean(axis=0)


class TestGrfSpec:
    def test_rejects_bad_params(self):
        with pytest.raises(ValueError):
            GrfSpec(tau=0.0, alpha=2.0)
        with pytest.raises(ValueError):
            GrfSpec(tau=3.0, alpha=0.5)
        with pytest.raises(ValueError):
            GrfSpec(tau=3.0, alpha=2.0, scale=-1.0)


class TestSampleGrf:
    def test_deterministic(self):
        spec = GrfSpec(tau=3.0, alpha=2.0)
        a = sample_grf(spec, 16, 42)
        b = sample_grf(spec, 16, 42)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, sample_grf(spec, 16, 43))

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            sample_grf(GrfSpec(3.0, 2.0), 4, 0)

    @pytest.mark.parametrize("spec", [
        GrfSpec(tau=3.0, alpha=2.0, scale=1.0),        # static-family prior
        GrfSpec(tau=7.0, alpha=2.5, scale=7.0**1.5),   # vorticity prior
    ], ids=["tau3-alpha2", "tau7-alpha2.5"])
    def test_spectrum_matches_analytic(self, spec):
        n = 16
        rng = np.random.default_rng(2024)
        samples = np.stack([sample_grf(spec, n, rng) for _ in range(2000)])
        emp = mode_variances(samples)
        lam = SpectralGrid(n).laplace_eigenvalues
        expect = spec.scale * (lam + spec.tau**2) ** (-spec.alpha)
        rel = np.abs(emp / expect - 1.0)
        assert rel.max() < 0.10

    def test_pointwise_variance(self):
        # field variance equals the sum of mode variances
        spec = GrfSpec(tau=3.0, alpha=2.0)
        n = 16
        rng = np.random.default_rng(7)
        samples = np.stack([sample_grf(spec, n, rng) for _ in range(3000)])
        lam = SpectralGrid(n).laplace_eigenvalues
        expect = ((lam + 9.0) ** -2.0).sum()
        assert samples.var() == pytest.approx(expect, rel=0.05)


class TestSampleGrf1d:
    def test_deterministic_and_shape(self):
        spec = GrfSpec(tau=5.0, alpha=2.0, scale=625.0)
        u = sample_grf_1d(spec, 32, 5)
        assert u.shape == (32,)
        assert np.array_equal(u, sample_grf_1d(spec, 32, 5))

    def test_spectrum(self):
        spec = GrfSpec(tau=5.0, alpha=2.0, scale=625.0)
        n = 32
        rng = np.random.default_rng(11)
        samples = np.stack([sample_grf_1d(spec, n, rng) for _ in range(4000)])
        coeffs = np.fft.fft(samples, axis=-1) / n
        emp = (np.abs(coeffs) ** 2).mean(axis=0)
        freq = np.fft.fftfreq(n, d=1.0 / n)
        expect = 625.0 * ((2 * np.pi * freq) ** 2 + 25.0) ** -2.0
        assert np.abs(emp / expect - 1.0).max() < 0.12
