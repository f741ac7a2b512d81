"""Grid containers, spectral transforms, and finite-difference stencils.

All fields live on the unit square (0,1)^2, discretized on square H x W
grids (H == W enforced). Two index-to-coordinate maps coexist:

* periodic map: grid point (i, j) sits at ((j + 0.5)*h, (i + 0.5)*h) with
  h = 1/width; used by spectral and wrap-around stencil operations.
* endpoint map: grid point (i, j) sits at (j*hd, i*hd) with hd = 1/(width-1),
  so the first/last rows and columns lie exactly on the boundary; used by
  Dirichlet solvers and one-sided stencils.

The first spatial coordinate x1 runs along columns (numpy axis 1), the
second coordinate x2 along rows (axis 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Field",
    "JointState",
    "SpectralGrid",
    "DimensionError",
    "periodic_coords",
    "endpoint_coords",
    "mollifier",
    "dft2",
    "idft2",
    "central_diff",
    "laplacian5",
    "divergence",
]


class DimensionError(ValueError):
    """Raised when a grid operand has an unsupported shape."""


def _values(f) -> np.ndarray:
    """Accept a Field or a bare 2D array and return float64 values."""
    v = np.asarray(getattr(f, "values", f), dtype=np.float64)
    if v.ndim != 2:
        raise DimensionError(f"expected a 2D field, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Field:
    """A square scalar field in row-major storage.

    ``h`` is the nominal spacing 1/width of the periodic map; operations
    that use the endpoint map substitute 1/(width-1) internally.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionError(f"Field must be 2D, got shape {v.shape}")
        if v.shape[0] != v.shape[1]:
            raise DimensionError(f"Field must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("Field values must all be finite")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def h(self) -> float:
        return 1.0 / self.width


@dataclass(frozen=True)
class JointState:
    """Two-channel diffusion state: channel 0 = a, channel 1 = u."""

    a: Field
    u: Field

    def __post_init__(self):
        if self.a.values.shape != self.u.values.shape:
            raise DimensionError(
                f"channel shapes differ: {self.a.values.shape} vs {self.u.values.shape}"
            )

    @property
    def size(self) -> int:
        return self.a.width

    def to_array(self) -> np.ndarray:
        """Stack channels into a (2, H, W) array."""
        return np.stack([self.a.values, self.u.values])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "JointState":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[0] != 2:
            raise DimensionError(f"expected (2, H, W) array, got shape {x.shape}")
        return cls(Field(x[0]), Field(x[1]))


def periodic_coords(n: int) -> np.ndarray:
    """Cell-centered 1D coordinates (j + 0.5)/n of the periodic map."""
    return (np.arange(n) + 0.5) / n


def endpoint_coords(n: int) -> np.ndarray:
    """Vertex 1D coordinates j/(n-1) of the endpoint map (0 and 1 included)."""
    if n < 2:
        raise DimensionError("endpoint map needs n >= 2")
    return np.arange(n) / (n - 1)


def mollifier(n: int) -> np.ndarray:
    """sin(pi x1) sin(pi x2) sampled on the endpoint map; zero on the boundary.

    sin(pi * 1.0) rounds to ~1e-16, so the boundary entries are forced to
    exact zeros to keep mollified solutions exactly zero on the boundary.
    """
    c = np.sin(np.pi * endpoint_coords(n))
    c[0] = c[-1] = 0.0
    return np.outer(c, c)


@dataclass(frozen=True)
class SpectralGrid:
    """Integer wavenumbers and -Laplacian eigenvalues of the periodic unit square.

    The convention is fixed once for the whole package: mode (p, q) has
    eigenvalue (2*pi*p)^2 + (2*pi*q)^2, where p is the row (x2) frequency and
    q the column (x1) frequency in numpy fft ordering.
    """

    n: int

    @property
    def kx(self) -> np.ndarray:
        """Column (x1) integer frequencies, broadcast to (n, n)."""
        f = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.broadcast_to(f[np.newaxis, :], (self.n, self.n))

    @property
    def ky(self) -> np.ndarray:
        """Row (x2) integer frequencies, broadcast to (n, n)."""
        f = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.broadcast_to(f[:, np.newaxis], (self.n, self.n))

    @property
    def laplace_eigenvalues(self) -> np.ndarray:
        """Per-mode eigenvalue of -Laplacian: (2 pi p)^2 + (2 pi q)^2."""
        return (2 * np.pi) ** 2 * (self.kx**2 + self.ky**2)

    @property
    def fd_laplace_eigenvalues(self) -> np.ndarray:
        """Per-mode eigenvalue of the periodic 5-point -Laplacian, h = 1/n."""
        n = self.n
        sx = np.sin(np.pi * self.kx / n) ** 2
        sy = np.sin(np.pi * self.ky / n) ** 2
        return 4.0 * n * n * (sx + sy)


def dft2(field) -> np.ndarray:
    """Unnormalized 2D DFT; a constant field c maps to c*H*W at mode (0,0)."""
    v = _values(field)
    if v.shape[0] != v.shape[1]:
        raise DimensionError(f"dft2 needs a square field, got {v.shape}")
    return np.fft.fft2(v)

def idft2(modes: np.ndarray) -> np.ndarray:
    """Inverse of dft2, returning the real part."""
    m = np.asarray(modes)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"idft2 needs a square mode array, got {m.shape}")
    return np.fft.ifft2(m).real


def _spacing(n: int, boundary: str) -> float:
    return 1.0 / n if boundary == "periodic" else 1.0 / (n - 1)


def central_diff(field, axis: str, boundary: str = "one-sided",
                 h: float | None = None) -> np.ndarray:
    """First derivative along x1 (axis='x', columns) or x2 (axis='y', rows).

    Interior points use the second-order central stencil
    (f[i+1] - f[i-1]) / (2h). With ``boundary='one-sided'`` the first/last
    row or column use the second-order one-sided stencil
    (-3 f0 + 4 f1 - f2) / (2h); with ``boundary='periodic'`` the stencil
    wraps. ``h`` defaults to the spacing of the matching coordinate map.
    """
    v = _values(field)
    n = v.shape[0]
    if n < 3:
        raise DimensionError("central_diff needs at least a 3x3 grid")
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if boundary not in ("one-sided", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    ax = 1 if axis == "x" else 0
    if h is None:
        h = _spacing(n, boundary)

    if boundary == "periodic":
        return (np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2 * h)

    d = np.empty_like(v)
    fwd = np.moveaxis(d, ax, 0)
    src = np.moveaxis(v, ax, 0)
    fwd[1:-1] = (src[2:] - src[:-2]) / (2 * h)
    fwd[0] = (-3 * src[0] + 4 * src[1] - src[2]) / (2 * h)
    fwd[-1] = (3 * src[-1] - 4 * src[-2] + src[-3]) / (2 * h)
    return d


def laplacian5(field, boundary: str = "dirichlet-zero",
               h: float | None = None) -> np.ndarray:
    """Standard 5-point Laplacian stencil.

    Boundary handling:

    * ``dirichlet-zero`` -- neighbors outside the grid count as 0,
    * ``periodic`` -- neighbors wrap around,
    * ``one-sided`` -- boundary rows/cols use the second-order one-sided
      second-derivative stencil (2 f0 - 5 f1 + 4 f2 - f3) / h^2.
    """
    v = _values(field)
    n = v.shape[0]
    if n < 3 or (boundary == "one-sided" and n < 4):
        raise DimensionError("grid too small for laplacian5")
    if boundary not in ("dirichlet-zero", "periodic", "one-sided"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if h is None:
        h = _spacing(n, boundary)

    if boundary == "periodic":
        out = (np.roll(v, 1, 0) + np.roll(v, -1, 0)
               + np.roll(v, 1, 1) + np.roll(v, -1, 1) - 4 * v)
        return out / (h * h)

    if boundary == "dirichlet-zero":
        out = -4 * v
        out[1:, :] += v[:-1, :]
        out[:-1, :] += v[1:, :]
        out[:, 1:] += v[:, :-1]
        out[:, :-1] += v[:, 1:]
        return out / (h * h)

    # one-sided: per-axis second derivatives, then summed
    def d2(src):
        out = np.empty_like(src)
        out[1:-1] = src[2:] - 2 * src[1:-1] + src[:-2]
        out[0] = 2 * src[0] - 5 * src[1] + 4 * src[2] - src[3]
        out[-1] = 2 * src[-1] - 5 * src[-2] + 4 * src[-3] - src[-4]
        return out

    return (d2(v) + np.moveaxis(d2(np.moveaxis(v, 1, 0)), 1, 0)) / (h * h)


def divergence(fx, fy, boundary: str = "one-sided",
               h: float | None = None) -> np.ndarray:
    """d(fx)/dx1 + d(fy)/dx2 using the central_diff stencils."""
    vx = _values(fx)
    vy = _values(fy)
    if vx.shape != vy.shape:
        raise DimensionError(f"component shapes differ: {vx.shape} vs {vy.shape}")
    return (central_diff(vx, "x", boundary=boundary, h=h)
            + central_diff(vy, "y", boundary=boundary, h=h))
