"""Dataset generation and the DPDE1 container format.

A dataset file is the magic bytes ``DPDE1`` followed by a little-endian
header ``{family tag u8, channels u8, size u32, count u32, tau f64,
alpha f64, scale f64, k f64, nu f64, darcy_hi f64, darcy_lo f64}`` and then
``count * channels * size * size`` float32 values in row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .grf import GrfSpec, sample_grf, sample_grf_1d
from .pdes import FAMILY_TAGS, TAG_FAMILIES, PdeSpec, pde_spec
from .solvers import (IntegrationError, SolverError, binarize_darcy,
                      simulate_burgers, simulate_ns_vorticity, solve_darcy,
                      solve_helmholtz)

__all__ = [
    "Dataset",
    "default_grf",
    "generate_sample",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
]

MAGIC = b"DPDE1"
_HEADER = struct.Struct("<BBII7d")


@dataclass(frozen=True)
class Dataset:
    """A stack of generated states sharing one PDE family and resolution."""

    spec: PdeSpec
    grf: GrfSpec
    samples: np.ndarray  # (count, channels, size, size) float64

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != self.spec.channels or x.shape[2] != x.shape[3]:
            raise ValueError(f"bad sample stack shape {x.shape}")
        if x.shape[0] < 1:
            raise ValueError("dataset needs at least one sample")
        object.__setattr__(self, "samples", x)

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def resolution(self) -> int:
        return self.samples.shape[2]

    @property
    def channels(self) -> int:
        return self.samples.shape[1]


def default_grf(family: str) -> GrfSpec:
    """The coefficient / initial-state prior each family is generated from."""
    if family in ("darcy", "poisson", "helmholtz"):
        return GrfSpec(tau=3.0, alpha=2.0, scale=1.0)
    if family == "ns-vorticity":
        return GrfSpec(tau=7.0, alpha=2.5, scale=7.0**1.5)
    if family == "burgers":
        return GrfSpec(tau=5.0, alpha=2.0, scale=625.0)
    raise ValueError(f"unknown family {family!r}")


def generate_sample(spec: PdeSpec, grf: GrfSpec, size: int, rng) -> np.ndarray:
    """Draw one (channels, size, size) state from the family's generator."""
    if spec.family == "darcy":
        mu = sample_grf(grf, size, rng)
        a = binarize_darcy(mu, spec.darcy_hi, spec.darcy_lo)
        u = solve_darcy(a, spec.q_const)
        return np.stack([a, u])
    if spec.family in ("poisson", "helmholtz"):
        a = sample_grf(grf, size, rng)
        u = solve_helmholtz(a, spec.k, mollify=spec.mollify)
        return np.stack([a, u])
    if spec.family == "ns-vorticity":
        w0 = sample_grf(grf, size, rng)
        snaps = simulate_ns_vorticity(w0, spec)
        return np.stack([w0, snaps[-1]])
    if spec.family == "burgers":
        u0 = sample_grf_1d(grf, size, rng)
        return simulate_burgers(u0, spec)[np.newaxis]
    raise ValueError(f"unknown family {spec.family!r}")


def generate_dataset(spec: PdeSpec, grf: GrfSpec, count: int, size: int,
                     seed: int) -> Dataset:
    """Generate ``count`` states; sample i uses the child seed (seed, i), so
    parallel and serial generation agree bit-exactly."""
    if count < 1:
        raise ValueError("count must be >= 1")
    samples = np.empty((count, spec.channels, size, size))
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        try:
            samples[i] = generate_sample(spec, grf, size, rng)
        except (SolverError, IntegrationError) as exc:
            raise SolverError(f"sample {i}: {exc}") from exc
    return Dataset(spec=spec, grf=grf, samples=samples)


def save_dataset(ds: Dataset, path) -> None:
    header = _HEADER.pack(
        FAMILY_TAGS[ds.spec.family], ds.channels, ds.resolution, ds.count,
        ds.grf.tau, ds.grf.alpha, ds.grf.scale,
        ds.spec.k, ds.spec.nu, ds.spec.darcy_hi, ds.spec.darcy_lo)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(header)
        f.write(ds.samples.astype("<f4").tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a DPDE1 dataset")
        tag, channels, size, count, tau, alpha, scale, k, nu, hi, lo = \
            _HEADER.unpack(f.read(_HEADER.size))
        payload = np.frombuffer(f.read(), dtype="<f4")
    family = TAG_FAMILIES.get(tag)
    if family is None:
        raise ValueError(f"unknown family tag {tag}")
    expect = count * channels * size * size
    if payload.size != expect:
        raise ValueError(f"payload has {payload.size} values, expected {expect}")
    spec = pde_spec(family, k=k, nu=nu, darcy_hi=hi, darcy_lo=lo)
    samples = payload.astype(np.float64).reshape(count, channels, size, size)
    return Dataset(spec=spec, grf=GrfSpec(tau, alpha, scale), samples=samples)
