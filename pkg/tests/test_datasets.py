"""Dataset generation and the DPDE1 container."""

import numpy as np
import pytest

from sparsepde.datasets import (default_grf, generate_dataset,
                                load_dataset, save_dataset)
from sparsepde.pdes import pde_spec
from sparsepde.residuals import pde_loss, residual_for


class TestGenerate:
    def test_deterministic(self):
        spec = pde_spec("darcy")
        grf = default_grf("darcy")
        d1 = generate_dataset(spec, grf, 2, 16, seed=5)
        d2 = generate_dataset(spec, grf, 2, 16, seed=5)
        assert np.array_equal(d1.samples, d2.samples)

    def test_darcy_boundary_zero(self):
        ds = generate_dataset(pde_spec("darcy"), default_grf("darcy"), 3, 16, 1)
        u = ds.samples[:, 1]
        assert np.abs(u[:, 0, :]).max() == 0.0
        assert np.abs(u[:, :, -1]).max() == 0.0

    def test_darcy_values_binary(self):
        ds = generate_dataset(pde_spec("darcy"), default_grf("darcy"), 2, 16, 2)
        a = ds.samples[:, 0]
        assert set(np.unique(a)) <= {3.0, 12.0}

    def test_poisson_residual_before_mollifier(self):
        # solver consistency: unmollified poisson pairs have ~zero residual
        spec = pde_spec("poisson", mollify=False)
        ds = generate_dataset(spec, default_grf("poisson"), 3, 16, 3)
        for s in ds.samples:
            assert pde_loss(residual_for(spec, s)) < 1e-6

    def test_mollified_dataset_residual(self):
        spec = pde_spec("poisson")  # mollify=True default
        ds = generate_dataset(spec, default_grf("poisson"), 2, 16, 4)
        for s in ds.samples:
            assert pde_loss(residual_for(spec, s)) < 1e-6

    def test_ns_channels(self):
        ds = generate_dataset(pde_spec("ns-vorticity"),
                              default_grf("ns-vorticity"), 2, 16, 5)
        assert ds.samples.shape == (2, 2, 16, 16)
        assert not np.array_equal(ds.samples[0, 0], ds.samples[0, 1])

    def test_burgers_single_channel(self):
        ds = generate_dataset(pde_spec("burgers"), default_grf("burgers"),
                              2, 32, 6)
        assert ds.channels == 1
        assert ds.samples.shape == (2, 1, 32, 32)

    def test_count_validation(self):
        with pytest.raises(ValueError):
            generate_dataset(pde_spec("poisson"), default_grf("poisson"),
                             0, 16, 0)


class TestContainer:
    def test_roundtrip(self, tmp_path):
        ds = generate_dataset(pde_spec("helmholtz"), default_grf("helmholtz"),
                              3, 16, 7)
        path = tmp_path / "h.dpde"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert back.spec.family == "helmholtz"
        assert back.spec.k == 1.0
        assert back.grf == ds.grf
        assert np.allclose(back.samples, ds.samples, atol=1e-6)
        assert back.samples.dtype == np.float64

    def test_file_size_layout(self, tmp_path):
        ds = generate_dataset(pde_spec("poisson"), default_grf("poisson"),
                              10, 32, 8)
        path = tmp_path / "p.dpde"
        save_dataset(ds, path)
        expected = 5 + (1 + 1 + 4 + 4 + 7 * 8) + 10 * 2 * 32 * 32 * 4
        assert path.stat().st_size == expected

    def test_same_seed_identical_bytes(self, tmp_path):
        spec, grf = pde_spec("poisson"), default_grf("poisson")
        p1, p2 = tmp_path / "a.dpde", tmp_path / "b.dpde"
        save_dataset(generate_dataset(spec, grf, 4, 16, 9), p1)
        save_dataset(generate_dataset(spec, grf, 4, 16, 9), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.dpde"
        path.write_bytes(b"NOPE!" + b"\0" * 100)
        with pytest.raises(ValueError):
            load_dataset(path)

    def test_rejects_truncated(self, tmp_path):
        ds = generate_dataset(pde_spec("poisson"), default_grf("poisson"),
                              2, 16, 10)
        path = tmp_path / "t.dpde"
        save_dataset(ds, path)
        data = path.read_bytes()
        path.write_bytes(data[:-64])
        with pytest.raises(ValueError):
            load_dataset(path)


class TestDefaultGrf:
    def test_static_prior(self):
        g = default_grf("poisson")
        assert (g.tau, g.alpha, g.scale) == (3.0, 2.0, 1.0)

    def test_vorticity_prior(self):
        g = default_grf("ns-vorticity")
        assert (g.tau, g.alpha) == (7.0, 2.5)
        assert g.scale == pytest.approx(7.0**1.5)

    def test_burgers_prior(self):
        g = default_grf("burgers")
        assert (g.tau, g.alpha, g.scale) == (5.0, 2.0, 625.0)
