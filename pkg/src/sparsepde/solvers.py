"""Classical forward solvers used to generate training and evaluation data.

Static families (Darcy, Poisson, Helmholtz) are solved with second-order
finite differences on the endpoint map with zero Dirichlet boundaries.
The dynamic families integrate pseudo-spectrally on the periodic map:
diffusion advances exactly through integrating factors, advection and
forcing with a two-stage (Heun) step, and quadratic products are dealiased
with the 2/3 rule.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import SpectralGrid, mollifier
from .pdes import PdeSpec, ns_forcing

__all__ = [
    "SolverError",
    "IntegrationError",
    "binarize_darcy",
    "solve_darcy",
    "solve_helmholtz",
    "simulate_ns_vorticity",
    "simulate_burgers",
]


class SolverError(RuntimeError):
    """A linear solve failed or the system is (near-)singular."""


class IntegrationError(RuntimeError):
    """A time integration produced non-finite values."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


def binarize_darcy(mu, hi: float = 12.0, lo: float = 3.0) -> np.ndarray:
    """Threshold a field at zero: mu >= 0 maps to hi, mu < 0 to lo."""
    m = np.asarray(getattr(mu, "values", mu), dtype=np.float64)
    return np.where(m >= 0, float(hi), float(lo))


def _interior_index(n: int):
    ii, jj = np.meshgrid(np.arange(1, n - 1), np.arange(1, n - 1), indexing="ij")
    return ii.ravel(), jj.ravel()


def solve_darcy(a, q: float = 1.0) -> np.ndarray:
    """Solve -div(a grad u) = q with u = 0 on the boundary.

    Harmonic-mean face averaging of the coefficient keeps the scheme
    conservative across the binary jumps of Darcy coefficients.
    """
    av = np.asarray(getattr(a, "values", a), dtype=np.float64)
    if np.any(av <= 0):
        raise SolverError("Darcy coefficient must be positive everywhere")
    n = av.shape[0]
    h = 1.0 / (n - 1)
    harm = lambda p, r: 2.0 * p * r / (p + r)

    ii, jj = _interior_index(n)
    idx = lambda i, j: (i - 1) * (n - 2) + (j - 1)
    rows, cols, vals = [], [], []
    fe = harm(av[ii, jj], av[ii, jj + 1])
    fw = harm(av[ii, jj], av[ii, jj - 1])
    fs = harm(av[ii, jj], av[ii + 1, jj])
    fn = harm(av[ii, jj], av[ii - 1, jj])
    diag = (fe + fw + fs + fn) / (h * h)
    center = idx(ii, jj)
    rows.append(center); cols.append(center); vals.append(diag)
    for face, di, dj in ((fe, 0, 1), (fw, 0, -1), (fs, 1, 0), (fn, -1, 0)):
        ni, nj = ii + di, jj + dj
        inside = (ni >= 1) & (ni <= n - 2) & (nj >= 1) & (nj <= n - 2)
        rows.append(center[inside])
        cols.append(idx(ni[inside], nj[inside]))
        vals.append(-face[inside] / (h * h))
    m = (n - 2) ** 2
    A = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(m, m))
    rhs = np.full(m, float(q))
    sol = spla.spsolve(A, rhs)
    rel = np.linalg.norm(A @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if not np.all(np.isfinite(sol)) or rel > 1e-8:
        raise SolverError(f"Darcy solve failed, relative residual {rel:.2e}")
    u = np.zeros((n, n))
    u[1:-1, 1:-1] = sol.reshape(n - 2, n - 2)
    return u


def _dirichlet_lap_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues of the 5-point -Laplacian with zero Dirichlet boundary."""
    h = 1.0 / (n - 1)
    p = np.arange(1, n - 1)
    mu = (2.0 - 2.0 * np.cos(np.pi * p / (n - 1))) / (h * h)
    return (mu[:, None] + mu[None, :]).ravel()


def solve_helmholtz(a, k: float = 0.0, mollify: bool = False) -> np.ndarray:
    """Solve lap(u) + k^2 u = a with u = 0 on the boundary; k = 0 is Poisson.

    With ``mollify`` the solution is multiplied by sin(pi x1) sin(pi x2)
    after solving, matching how dataset solutions are stored.
    """
    av = np.asarray(getattr(a, "values", a), dtype=np.float64)
    n = av.shape[0]
    h = 1.0 / (n - 1)
    if k != 0.0:
        gap = np.min(np.abs(_dirichlet_lap_eigenvalues(n) - k * k))
        if gap < 1e-9:
            raise SolverError(f"k^2={k * k} is within {gap:.1e} of a Dirichlet eigenvalue")

    m = n - 2
    lap1 = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)],
                    [-1, 0, 1]) / (h * h)
    eye = sp.identity(m)
    A = sp.kron(lap1, eye) + sp.kron(eye, lap1) + k * k * sp.identity(m * m)
    rhs = av[1:-1, 1:-1].ravel()
    sol = spla.spsolve(A.tocsr(), rhs)
    if not np.all(np.isfinite(sol)):
        raise SolverError("Helmholtz solve produced non-finite values")
    u = np.zeros((n, n))
    u[1:-1, 1:-1] = sol.reshape(m, m)
    if mollify:
        u *= mollifier(n)
    return u


def _dealias_mask(n: int) -> np.ndarray:
    f = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    cut = n / 3.0
    return (f[:, None] <= cut) & (f[None, :] <= cut)


def simulate_ns_vorticity(w0, spec: PdeSpec, substeps_per_snapshot: int = 16,
                          advection: bool = True, forcing="pattern") -> list[np.ndarray]:
    """March the 2D vorticity equation and return the stored snapshots.

    Returns ``spec.snapshots`` fields at times T*k/snapshots for
    k = 1..snapshots. ``forcing`` is the fixed trig pattern by default;
    pass None for zero forcing or an (n, n) array for a custom one.
    ``advection=False`` drops the nonlinear term (pure diffusion+forcing),
    which the heat-kernel oracle tests rely on.
    """
    w = np.asarray(getattr(w0, "values", w0), dtype=np.float64)
    n = w.shape[0]
    grid = SpectralGrid(n)
    lam = grid.laplace_eigenvalues
    dx = 2j * np.pi * grid.kx
    dy = 2j * np.pi * grid.ky
    inv_lam = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
    mask = _dealias_mask(n)

    if forcing == "pattern":
        q_hat = np.fft.fft2(ns_forcing(n))
    elif forcing is None:
        q_hat = np.zeros((n, n), dtype=complex)
    else:
        q_hat = np.fft.fft2(np.asarray(forcing, dtype=np.float64))

    def nonlinear(w_hat):
        out = q_hat.copy()
        if advection:
            psi_hat = w_hat * inv_lam
            vx = np.fft.ifft2(dy * psi_hat).real
            vy = np.fft.ifft2(-dx * psi_hat).real
            wx = np.fft.ifft2(dx * w_hat).real
            wy = np.fft.ifft2(dy * w_hat).real
            out = out + mask * np.fft.fft2(-(vx * wx + vy * wy))
        return out

    snaps = []
    w_hat = np.fft.fft2(w)
    dt = spec.final_time / (spec.snapshots * substeps_per_snapshot)
    decay = np.exp(-spec.nu * lam * dt)
    h = 1.0 / n
    step = 0
    for snap in range(spec.snapshots):
        if advection:
            psi_hat = w_hat * inv_lam
            vmax = max(np.abs(np.fft.ifft2(dy * psi_hat).real).max(),
                       np.abs(np.fft.ifft2(-dx * psi_hat).real).max())
            if vmax * dt > h:
                warnings.warn(
                    f"advective CFL exceeded: |v| dt = {vmax * dt:.3g} > h = {h:.3g}",
                    RuntimeWarning, stacklevel=2)
        for _ in range(substeps_per_snapshot):
            k1 = nonlinear(w_hat)
            pred = decay * (w_hat + dt * k1)
            k2 = nonlinear(pred)
            w_hat = decay * w_hat + 0.5 * dt * (decay * k1 + k2)
            step += 1
        w_snap = np.fft.ifft2(w_hat).real
        if not np.all(np.isfinite(w_snap)):
            raise IntegrationError("vorticity integration blew up", step)
        snaps.append(w_snap)
    return snaps


def _upsample_spectrum(u_hat_coarse: np.ndarray, m: int) -> np.ndarray:
    """Zero-pad a 1D spectrum from s to m bins (band-limited interpolation)."""
    s = len(u_hat_coarse)
    out = np.zeros(m, dtype=complex)
    half = s // 2
    ratio = m / s
    out[:half] = u_hat_coarse[:half] * ratio
    out[m - (half - 1):] = u_hat_coarse[half + 1:] * ratio
    out[half] = 0.5 * u_hat_coarse[half] * ratio
    out[m - half] = 0.5 * np.conj(u_hat_coarse[half]) * ratio
    return out


def _restrict_spectrum(u_hat_fine: np.ndarray, s: int) -> np.ndarray:
    """Spectral truncation from m to s bins; adjoint of band-limited upsampling."""
    m = len(u_hat_fine)
    half = s // 2
    ratio = s / m
    out = np.zeros(s, dtype=complex)
    out[:half] = u_hat_fine[:half] * ratio
    out[half + 1:] = u_hat_fine[m - (half - 1):] * ratio
    out[half] = (u_hat_fine[half] + u_hat_fine[m - half]) * ratio
    return out


def simulate_burgers(u0, spec: PdeSpec, size: int | None = None,
                     fine_factor: int = 4, cfl: float = 0.4) -> np.ndarray:
    """Integrate 1D viscous Burgers and return the (time, space) field.

    Row 0 is the initial state; rows 1..S-1 sample times i/(S-1) * T. The
    march runs on a finer periodic grid (``fine_factor`` times the spatial
    resolution, at least 128 points) and stored rows are the spectral
    truncation of the fine state, which conserves the total mass of every
    row to round-off.
    """
    u = np.asarray(getattr(u0, "values", u0), dtype=np.float64).ravel()
    s = size or len(u)
    if s < 16:
        raise ValueError(f"resolution must be >= 16, got {s}")
    if len(u) != s:
        raise ValueError(f"initial state has {len(u)} points, expected {s}")

    m = max(fine_factor * s, 128)
    u_hat = _upsample_spectrum(np.fft.fft(u), m)
    freq = np.fft.fftfreq(m, d=1.0 / m)
    dxf = 2j * np.pi * freq
    lam = (2 * np.pi * freq) ** 2
    amask = np.abs(freq) <= m / 3.0
    h_f = 1.0 / m

    def flux(v_hat):
        v = np.fft.ifft(v_hat).real
        return -dxf * (amask * np.fft.fft(0.5 * v * v))

    rows = np.empty((s, s))
    rows[0] = np.fft.ifft(_restrict_spectrum(u_hat, s)).real
    dt_store = spec.final_time / (s - 1)
    step = 0
    for i in range(1, s):
        vmax = max(np.abs(np.fft.ifft(u_hat).real).max(), 1e-9)
        nsub = max(int(np.ceil(dt_store / (cfl * h_f / vmax))), 4)
        dt = dt_store / nsub
        decay = np.exp(-spec.nu * lam * dt)
        for _ in range(nsub):
            k1 = flux(u_hat)
            pred = decay * (u_hat + dt * k1)
            k2 = flux(pred)
            u_hat = decay * u_hat + 0.5 * dt * (decay * k1 + k2)
            step += 1
        row = np.fft.ifft(_restrict_spectrum(u_hat, s)).real
        if not np.all(np.isfinite(row)):
            raise IntegrationError("Burgers integration blew up", step)
        rows[i] = row
    return rows
