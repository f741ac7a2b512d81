"""Residual operators, guidance losses, and their analytic gradients."""

import numpy as np
import pytest

from sparsepde.fields import periodic_coords
from sparsepde.grf import GrfSpec, sample_grf, sample_grf_1d
from sparsepde.observations import ObservationSet, observe, sample_mask
from sparsepde.pdes import pde_spec
from sparsepde.residuals import (obs_loss, obs_loss_grad, pde_loss,
                                 pde_loss_grad, residual_burgers,
                                 residual_darcy, residual_for,
                                 residual_helmholtz, residual_ns)
from sparsepde.solvers import (binarize_darcy, simulate_burgers,
                               solve_darcy, solve_helmholtz)


def fd_gradient_check(spec, x, n_probe=100, eps=1e-4, seed=0):
    """Central-difference check of pde_loss_grad at random pixels.

    The losses are quadratic (or nearly so for the harmonic-mean Darcy
    coupling), so a larger step keeps round-off noise out of the probe
    without introducing truncation error.
    """
    rng = np.random.default_rng(seed)
    _, grad = pde_loss_grad(spec, x)
    worst = 0.0
    for _ in range(n_probe):
        idx = tuple(rng.integers(0, s) for s in x.shape)
        xp = x.copy(); xp[idx] += eps
        xm = x.copy(); xm[idx] -= eps
        lp, _ = pde_loss_grad(spec, xp)
        lm, _ = pde_loss_grad(spec, xm)
        fd = (lp - lm) / (2 * eps)
        denom = max(abs(fd), abs(grad[idx]), 1e-9)
        worst = max(worst, abs(fd - grad[idx]) / denom)
    return worst


class TestDarcyResidual:
    def setup_method(self):
        rng = np.random.default_rng(1)
        self.a = binarize_darcy(sample_grf(GrfSpec(3.0, 2.0), 16, rng))
        self.u = solve_darcy(self.a, 1.0)
        self.x = np.stack([self.a, self.u])

    def test_solver_consistency(self):
        r = residual_darcy(self.x, 1.0)
        assert (r.values[r.mask] ** 2).mean() < 1e-10

    def test_zero_u_gives_q(self):
        x = np.stack([self.a, np.zeros_like(self.u)])
        r = residual_darcy(x, 1.0)
        assert np.allclose(r.values[0][r.mask[0]], 1.0)

    def test_locality(self):
        x2 = self.x.copy()
        x2[1, 8, 8] += 1e-3
        r1 = residual_darcy(self.x, 1.0).values[0]
        r2 = residual_darcy(x2, 1.0).values[0]
        changed = np.argwhere(np.abs(r2 - r1) > 1e-12)
        assert len(changed) > 0
        assert np.abs(changed - [8, 8]).max() <= 1

    def test_gradient_matches_fd(self):
        x = self.x + 0.01 * np.random.default_rng(2).standard_normal(self.x.shape)
        x[0] = np.abs(x[0]) + 0.5
        assert fd_gradient_check(pde_spec("darcy"), x) < 1e-5


class TestHelmholtzResidual:
    def test_solver_consistency_mollified(self):
        a = sample_grf(GrfSpec(3.0, 2.0), 16, 3)
        u = solve_helmholtz(a, 1.0, mollify=True)
        r = residual_helmholtz(np.stack([a, u]), 1.0, mollified=True)
        assert (r.values[r.mask] ** 2).mean() < 1e-18

    def test_zero_u_gives_minus_a(self):
        a = sample_grf(GrfSpec(3.0, 2.0), 16, 4)
        r = residual_helmholtz(np.stack([a, np.zeros_like(a)]), 1.0)
        m = r.mask[0]
        assert np.allclose(r.values[0][m], -a[m])

    def test_poisson_is_k_zero_bit_exact(self):
        a = sample_grf(GrfSpec(3.0, 2.0), 16, 5)
        u = solve_helmholtz(a, 0.0, mollify=True)
        x = np.stack([a, u])
        r_poisson = residual_for(pde_spec("poisson"), x)
        r_k0 = residual_helmholtz(x, 0.0, mollified=True)
        assert np.array_equal(r_poisson.values, r_k0.values)

    def test_mask_shrinks_two_pixels_when_mollified(self):
        x = np.zeros((2, 16, 16))
        r = residual_helmholtz(x, 1.0, mollified=True)
        assert not r.mask[0][1, :].any()
        assert r.mask[0][2:-2, 2:-2].all()

    def test_periodic_mode(self):
        # prior support satisfies the periodic residual exactly
        from sparsepde.gaussian import gaussian_joint_prior
        prior = gaussian_joint_prior("helmholtz", 16)
        x = prior.sample(6)
        r = residual_helmholtz(x, 1.0, boundary="periodic")
        assert np.abs(r.values).max() < 1e-10

    @pytest.mark.parametrize("family,mollify", [("poisson", True),
                                                ("helmholtz", True),
                                                ("helmholtz", False)])
    def test_gradient_matches_fd(self, family, mollify):
        spec = pde_spec(family, mollify=mollify)
        rng = np.random.default_rng(7)
        x = 0.1 * rng.standard_normal((2, 16, 16))
        assert fd_gradient_check(spec, x) < 1e-5


class TestNsResidual:
    def test_constant_zero(self):
        r = residual_ns(np.full((2, 16, 16), 3.0))
        assert np.abs(r.values).max() == 0.0

    def test_cancelling_gradients(self):
        n = 16
        x1 = periodic_coords(n)[None, :] * np.ones((n, 1))
        x2 = periodic_coords(n)[:, None] * np.ones((1, n))
        w = x1 - x2
        # periodic wrap breaks linearity at the seam; interior cancels
        r = residual_ns(np.stack([w, w]))
        interior = r.values[:, 2:-2, 2:-2]
        assert np.abs(interior).max() < 1e-9

    def test_matches_direct_stencil_oracle(self):
        rng = np.random.default_rng(8)
        w = rng.standard_normal((2, 32, 32))
        r = residual_ns(w)
        h = 1.0 / 32
        for c in range(2):
            direct = ((np.roll(w[c], -1, 1) - np.roll(w[c], 1, 1))
                      + (np.roll(w[c], -1, 0) - np.roll(w[c], 1, 0))) / (2 * h)
            assert np.abs(r.values[c] - direct).max() < 1e-12

    def test_translation_equivariance(self):
        rng = np.random.default_rng(9)
        w = rng.standard_normal((2, 16, 16))
        r1 = residual_ns(np.roll(w, (3, 5), axis=(1, 2))).values
        r2 = np.roll(residual_ns(w).values, (3, 5), axis=(1, 2))
        assert np.allclose(r1, r2)

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal((2, 16, 16))
        assert fd_gradient_check(pde_spec("ns-vorticity"), x) < 1e-5


class TestBurgersResidual:
    def test_solver_consistency_floor(self):
        spec = pde_spec("burgers")
        u0 = 0.5 * sample_grf_1d(GrfSpec(5.0, 2.0, 625.0), 32, 11)
        U = simulate_burgers(u0, spec)
        r = residual_burgers(U, spec.nu)
        # discretization floor, not round-off: bounded sanity level
        assert (r.values[r.mask] ** 2).mean() < 1.0

    def test_constant_zero(self):
        r = residual_burgers(np.full((32, 32), 1.3), 0.01)
        assert np.abs(r.values).max() == 0.0

    def test_traveling_profile_small_time(self):
        # inviscid Burgers: u = f(x - u t) solves the equation; with a smooth
        # low-amplitude profile and short horizon the residual is small
        s = 64
        x = periodic_coords(s)
        amp = 0.05
        t_grid = np.arange(s) / (s - 1)
        U = np.zeros((s, s))
        f = lambda y: amp * np.sin(2 * np.pi * y)
        for i, t in enumerate(t_grid):
            u = f(x)
            for _ in range(60):  # fixed-point iteration of characteristics
                u = f((x - u * t) % 1.0)
            U[i] = u
        r = residual_burgers(U, 0.0)
        scale = np.abs(np.gradient(U, axis=0)).max() * (s - 1)
        assert np.abs(r.values[r.mask]).max() < 0.02 * scale

    def test_mask_excludes_time_ends(self):
        r = residual_burgers(np.zeros((16, 16)), 0.01)
        assert not r.mask[0][0].any() and not r.mask[0][-1].any()
        assert r.mask[0][1:-1].all()

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((1, 16, 16))
        assert fd_gradient_check(pde_spec("burgers"), x) < 1e-5


class TestLosses:
    def test_pde_loss_zero(self):
        r = residual_ns(np.zeros((2, 8, 8)))
        assert pde_loss(r) == 0.0

    def test_pde_loss_arithmetic(self):
        from sparsepde.residuals import Residual
        vals = np.full((1, 4, 4), 2.0)
        mask = np.zeros_like(vals, dtype=bool)
        mask[0, 1:3, 1:3] = True
        assert pde_loss(Residual(vals, mask)) == pytest.approx(4.0)

    def test_pde_loss_matches_loop_oracle(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((2, 16, 16))
        r = residual_ns(x)
        acc, count = 0.0, 0
        for c in range(r.values.shape[0]):
            for i in range(16):
                for j in range(16):
                    if r.mask[c, i, j]:
                        acc += r.values[c, i, j] ** 2
                        count += 1
        assert pde_loss(r) == pytest.approx(acc / count, rel=1e-12)

    def test_obs_loss_exact_match(self):
        x = np.random.default_rng(14).standard_normal((2, 8, 8))
        mask = sample_mask("uniform-random", 10, 8, 0, channel=0)
        obs = observe(x, mask)
        assert obs_loss(x, obs) == 0.0

    def test_obs_loss_single_point(self):
        x = np.zeros((2, 8, 8))
        obs = ObservationSet(np.array([1]), np.array([2]), np.array([3]),
                             np.array([3.0]))
        assert obs_loss(x, obs) == pytest.approx(9.0)

    def test_obs_loss_matches_loop_oracle(self):
        rng = np.random.default_rng(15)
        x = rng.standard_normal((2, 16, 16))
        mask = sample_mask("uniform-random", 40, 16, 1, channel=0)
        gt = rng.standard_normal((2, 16, 16))
        obs = observe(gt, mask)
        acc = sum((obs.values[k] - x[obs.channels[k], obs.rows[k], obs.cols[k]]) ** 2
                  for k in range(len(obs)))
        assert obs_loss(x, obs) == pytest.approx(acc / len(obs), rel=1e-12)

    def test_obs_loss_grad_matches_fd(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((2, 16, 16))
        gt = rng.standard_normal((2, 16, 16))
        m0 = sample_mask("uniform-random", 20, 16, 2, channel=0)
        m1 = sample_mask("uniform-random", 15, 16, 3, channel=1)
        mask = tuple(np.concatenate([a, b]) for a, b in zip(m0, m1))
        obs = observe(gt, mask)
        _, grad = obs_loss_grad(x, obs)
        eps = 1e-6
        for _ in range(50):
            idx = tuple(rng.integers(0, s) for s in x.shape)
            xp = x.copy(); xp[idx] += eps
            xm = x.copy(); xm[idx] -= eps
            fd = (obs_loss(xp, obs) - obs_loss(xm, obs)) / (2 * eps)
            assert abs(fd - grad[idx]) <= 1e-5 * max(abs(fd), 1e-6)

    def test_losses_nonnegative_random(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            x = rng.standard_normal((2, 16, 16))
            r = residual_ns(x)
            assert pde_loss(r) >= 0
