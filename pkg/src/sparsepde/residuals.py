"""PDE residual operators and the two guidance losses.

Each residual operator evaluates the pointwise equation residual of a
candidate state and reports which pixels the stencil defines. The matching
``*_grad`` paths return the analytic gradient of the mean-square residual
with respect to the state; those adjoints are what the guided sampler calls
every step, so they are hand-derived rather than numerically differenced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import central_diff, laplacian5, mollifier
from .observations import ObservationSet
from .pdes import PdeSpec

__all__ = [
    "Residual",
    "residual_darcy",
    "residual_helmholtz",
    "residual_ns",
    "residual_burgers",
    "residual_for",
    "pde_loss",
    "pde_loss_grad",
    "obs_loss",
    "obs_loss_grad",
]


@dataclass(frozen=True)
class Residual:
    """Pointwise residual maps and the pixels where they are defined."""

    values: np.ndarray  # (R, H, W): one map per residual component
    mask: np.ndarray    # same shape, True where the stencil is valid

    @property
    def point_count(self) -> int:
        return int(self.mask.sum())


def _state_array(x, channels: int) -> np.ndarray:
    arr = x.to_array() if hasattr(x, "to_array") else np.asarray(x, dtype=np.float64)
    if arr.ndim == 2 and channels == 1:
        arr = arr[np.newaxis]
    if arr.ndim != 3 or arr.shape[0] != channels:
        raise ValueError(f"expected ({channels}, H, W) state, got shape {arr.shape}")
    return arr


def _harmonic_faces(a: np.ndarray):
    """Harmonic-mean face coefficients along columns (E faces) and rows (S faces)."""
    eps = 1e-30
    denom_h = a[:, :-1] + a[:, 1:]
    denom_v = a[:-1, :] + a[1:, :]
    denom_h = np.where(np.abs(denom_h) < eps, eps, denom_h)
    denom_v = np.where(np.abs(denom_v) < eps, eps, denom_v)
    fh = 2.0 * a[:, :-1] * a[:, 1:] / denom_h   # face between (i,j) and (i,j+1)
    fv = 2.0 * a[:-1, :] * a[1:, :] / denom_v   # face between (i,j) and (i+1,j)
    return fh, fv


def _darcy_flux_div(a: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """div(a grad u) on interior pixels with harmonic-mean face coefficients."""
    fh, fv = _harmonic_faces(a)
    out = np.zeros_like(u)
    core = out[1:-1, 1:-1]
    core += fh[1:-1, 1:] * (u[1:-1, 2:] - u[1:-1, 1:-1])    # east
    core += fh[1:-1, :-1] * (u[1:-1, :-2] - u[1:-1, 1:-1])  # west
    core += fv[1:, 1:-1] * (u[2:, 1:-1] - u[1:-1, 1:-1])    # south (+row)
    core += fv[:-1, 1:-1] * (u[:-2, 1:-1] - u[1:-1, 1:-1])  # north (-row)
    return out / (h * h)


def residual_darcy(x, q: float = 1.0) -> Residual:
    """div(a grad u) + q with the same discretization as the Darcy solver."""
    arr = _state_array(x, 2)
    a, u = arr[0], arr[1]
    n = a.shape[0]
    h = 1.0 / (n - 1)
    r = _darcy_flux_div(a, u, h)
    r[1:-1, 1:-1] += q
    mask = np.zeros_like(r, dtype=bool)
    mask[1:-1, 1:-1] = True
    return Residual(r[np.newaxis], mask[np.newaxis])


def _darcy_grad(arr: np.ndarray, q: float):
    """Gradient of pde_loss(residual_darcy) with respect to (a, u)."""
    a, u = arr[0], arr[1]
    n = a.shape[0]
    h = 1.0 / (n - 1)
    res = residual_darcy(arr, q)
    m = res.point_count
    r = res.values[0]
    loss = float((r[res.mask[0]] ** 2).mean())
    t = np.where(res.mask[0], r, 0.0) * (2.0 / (m * h * h))

    fh, fv = _harmonic_faces(a)
    grad_u = np.zeros_like(u)
    # adjoint of the 5-point flux divergence
    grad_u[1:-1, 2:] += fh[1:-1, 1:] * t[1:-1, 1:-1]
    grad_u[1:-1, :-2] += fh[1:-1, :-1] * t[1:-1, 1:-1]
    grad_u[2:, 1:-1] += fv[1:, 1:-1] * t[1:-1, 1:-1]
    grad_u[:-2, 1:-1] += fv[:-1, 1:-1] * t[1:-1, 1:-1]
    grad_u[1:-1, 1:-1] -= (fh[1:-1, 1:] + fh[1:-1, :-1]
                           + fv[1:, 1:-1] + fv[:-1, 1:-1]) * t[1:-1, 1:-1]

    # face weight: dL/dF = (t_left - t_right) (u_right - u_left) for each face
    wh = (t[:, :-1] - t[:, 1:]) * (u[:, 1:] - u[:, :-1])
    wv = (t[:-1, :] - t[1:, :]) * (u[1:, :] - u[:-1, :])
    eps = 1e-30
    dh = a[:, :-1] + a[:, 1:]
    dv = a[:-1, :] + a[1:, :]
    dh = np.where(np.abs(dh) < eps, eps, dh) ** 2
    dv = np.where(np.abs(dv) < eps, eps, dv) ** 2
    grad_a = np.zeros_like(a)
    grad_a[:, :-1] += wh * 2.0 * a[:, 1:] ** 2 / dh
    grad_a[:, 1:] += wh * 2.0 * a[:, :-1] ** 2 / dh
    grad_a[:-1, :] += wv * 2.0 * a[1:, :] ** 2 / dv
    grad_a[1:, :] += wv * 2.0 * a[:-1, :] ** 2 / dv
    return loss, np.stack([grad_a, grad_u])


def _unmollify(u: np.ndarray) -> np.ndarray:
    """Divide out sin(pi x1) sin(pi x2) on interior pixels; boundary stays 0."""
    n = u.shape[0]
    mol = mollifier(n)
    w = np.zeros_like(u)
    w[1:-1, 1:-1] = u[1:-1, 1:-1] / mol[1:-1, 1:-1]
    return w


def residual_helmholtz(x, k: float = 0.0, mollified: bool = False,
                       boundary: str = "dirichlet") -> Residual:
    """lap(u) + k^2 u - a; with k = 0 this is bit-exactly the Poisson residual.

    With ``mollified=True`` the stored u is divided by the mollifier before
    the stencil (datasets store mollified solutions) and the valid mask
    shrinks by 2 pixels from the boundary where that division is noisy.
    """
    arr = _state_array(x, 2)
    a, u = arr[0], arr[1]
    n = a.shape[0]
    if boundary == "periodic":
        src = a
        if k == 0.0:
            # periodic Poisson solvability: the equation constrains only the
            # zero-mean part of the source
            src = a - a.mean()
        r = laplacian5(u, boundary="periodic") + k * k * u - src
        mask = np.ones_like(r, dtype=bool)
    elif boundary == "dirichlet":
        w = _unmollify(u) if mollified else u
        r = laplacian5(w, boundary="dirichlet-zero") + k * k * w - a
        shrink = 2 if mollified else 1
        mask = np.zeros_like(r, dtype=bool)
        mask[shrink:-shrink, shrink:-shrink] = True
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    return Residual(r[np.newaxis], mask[np.newaxis])


def _helmholtz_grad(arr: np.ndarray, k: float, mollified: bool, boundary: str):
    a, u = arr[0], arr[1]
    n = a.shape[0]
    res = residual_helmholtz(arr, k, mollified, boundary)
    m = res.point_count
    r = res.values[0]
    loss = float((r[res.mask[0]] ** 2).mean())
    t = np.where(res.mask[0], r, 0.0) * (2.0 / m)

    grad_a = -t
    if boundary == "periodic":
        if k == 0.0:
            grad_a = -(t - t.mean())
        grad_u = laplacian5(t, boundary="periodic") + k * k * t
    else:
        # dirichlet-zero 5-point operator is symmetric on the full grid
        s = laplacian5(t, boundary="dirichlet-zero") + k * k * t
        if mollified:
            grad_u = np.zeros_like(u)
            mol = mollifier(n)
            grad_u[1:-1, 1:-1] = s[1:-1, 1:-1] / mol[1:-1, 1:-1]
        else:
            grad_u = s
    return loss, np.stack([grad_a, grad_u])


def residual_ns(x) -> Residual:
    """Simplified vorticity constraint dw/dx1 + dw/dx2, one map per channel."""
    arr = _state_array(x, 2)
    maps = np.stack([
        central_diff(arr[c], "x", boundary="periodic")
        + central_diff(arr[c], "y", boundary="periodic")
        for c in range(2)
    ])
    return Residual(maps, np.ones_like(maps, dtype=bool))


def _ns_grad(arr: np.ndarray):
    res = residual_ns(arr)
    m = res.point_count
    loss = float((res.values**2).mean())
    # periodic central difference is antisymmetric: adjoint = -D
    grad = np.stack([
        -(central_diff(res.values[c], "x", boundary="periodic")
          + central_diff(res.values[c], "y", boundary="periodic")) * (2.0 / m)
        for c in range(2)
    ])
    return loss, grad


def residual_burgers(U, nu: float = 0.01) -> Residual:
    """d_t u + d_x(u^2/2) - nu d_xx u on a (time, space) field.

    Time runs down rows on the endpoint map (dt = 1/(S-1)); space runs along
    columns on the periodic map (h = 1/S). The first and last time rows have
    no centered time derivative and are masked out.
    """
    u = np.asarray(getattr(U, "values", U), dtype=np.float64)
    if u.ndim == 3 and u.shape[0] == 1:
        u = u[0]
    s = u.shape[0]
    dt = 1.0 / (s - 1)
    r = np.zeros_like(u)
    r[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2 * dt)
    r += central_diff(0.5 * u * u, "x", boundary="periodic")
    r -= nu * laplacian_1d_periodic(u)
    mask = np.zeros_like(u, dtype=bool)
    mask[1:-1, :] = True
    r = np.where(mask, r, 0.0)
    return Residual(r[np.newaxis], mask[np.newaxis])


def laplacian_1d_periodic(u: np.ndarray) -> np.ndarray:
    """Second derivative along columns (space axis) with periodic wrap."""
    s = u.shape[1]
    h = 1.0 / s
    return (np.roll(u, -1, axis=1) - 2 * u + np.roll(u, 1, axis=1)) / (h * h)


def _burgers_grad(arr: np.ndarray, nu: float):
    u = arr[0]
    s = u.shape[0]
    dt = 1.0 / (s - 1)
    res = residual_burgers(u, nu)
    m = res.point_count
    r = res.values[0]
    loss = float((r[res.mask[0]] ** 2).mean())
    t = r * (2.0 / m)  # already zero outside the mask

    grad = np.zeros_like(u)
    # adjoint of the interior central time derivative
    grad[2:, :] += t[1:-1, :] / (2 * dt)
    grad[:-2, :] -= t[1:-1, :] / (2 * dt)
    # d_x(u^2/2): J = D_x diag(u); D_x adjoint = -D_x
    grad += -u * central_diff(t, "x", boundary="periodic")
    # diffusion operator is symmetric
    grad -= nu * laplacian_1d_periodic(t)
    return loss, grad[np.newaxis]


def residual_for(spec: PdeSpec, x) -> Residual:
    """Dispatch the residual operator selected by a PdeSpec."""
    if spec.family == "darcy":
        return residual_darcy(x, spec.q_const)
    if spec.family in ("poisson", "helmholtz"):
        return residual_helmholtz(x, spec.k, mollified=spec.mollify,
                                  boundary=spec.boundary)
    if spec.family == "ns-vorticity":
        return residual_ns(x)
    if spec.family == "burgers":
        return residual_burgers(x, spec.nu)
    raise ValueError(f"unknown family {spec.family!r}")


def pde_loss(res: Residual) -> float:
    """Mean of the squared residual over its valid mask."""
    m = res.point_count
    if m == 0:
        return 0.0
    return float((res.values[res.mask] ** 2).sum() / m)


def pde_loss_grad(spec: PdeSpec, x) -> tuple[float, np.ndarray]:
    """(pde_loss, d pde_loss / d state) for the family's residual operator."""
    arr = _state_array(x, spec.channels)
    if spec.family == "darcy":
        return _darcy_grad(arr, spec.q_const)
    if spec.family in ("poisson", "helmholtz"):
        return _helmholtz_grad(arr, spec.k, spec.mollify, spec.boundary)
    if spec.family == "ns-vorticity":
        return _ns_grad(arr)
    if spec.family == "burgers":
        return _burgers_grad(arr, spec.nu)
    raise ValueError(f"unknown family {spec.family!r}")


def obs_loss(x, obs: ObservationSet) -> float:
    """Mean squared mismatch over the observed points."""
    if len(obs) == 0:
        return 0.0
    arr = np.asarray(x.to_array() if hasattr(x, "to_array") else x, dtype=np.float64)
    pred = arr[obs.channels, obs.rows, obs.cols]
    return float(((obs.values - pred) ** 2).mean())


def obs_loss_grad(x, obs: ObservationSet,
                  channel_weights=None) -> tuple[float, np.ndarray]:
    """Observation loss and its gradient with respect to the state.

    With ``channel_weights`` (sequence, one weight per channel) the loss is
    split per channel -- each channel's mean squared mismatch uses its own
    point count and weight -- which is how per-channel guidance strengths
    are applied. The returned loss is always the unweighted total MSE.
    """
    arr = np.asarray(x.to_array() if hasattr(x, "to_array") else x, dtype=np.float64)
    grad = np.zeros_like(arr)
    if len(obs) == 0:
        return 0.0, grad
    pred = arr[obs.channels, obs.rows, obs.cols]
    diff = pred - obs.values
    loss = float((diff**2).mean())
    if channel_weights is None:
        np.add.at(grad, (obs.channels, obs.rows, obs.cols), 2.0 * diff / len(obs))
        return loss, grad
    for c in range(arr.shape[0]):
        m = obs.channels == c
        n_c = int(m.sum())
        if n_c == 0:
            continue
        w = float(channel_weights[c]) if np.ndim(channel_weights) else float(channel_weights)
        np.add.at(grad, (obs.channels[m], obs.rows[m], obs.cols[m]),
                  w * 2.0 * diff[m] / n_c)
    return loss, grad
