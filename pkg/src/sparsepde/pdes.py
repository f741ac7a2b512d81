"""PDE family descriptions and their standard parameter sets."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["PdeSpec", "FAMILIES", "pde_spec", "ns_forcing"]

FAMILIES = ("darcy", "poisson", "helmholtz", "ns-vorticity", "burgers")

# numeric tags used by the dataset container format
FAMILY_TAGS = {name: i for i, name in enumerate(FAMILIES)}
TAG_FAMILIES = {i: name for name, i in FAMILY_TAGS.items()}


@dataclass(frozen=True)
class PdeSpec:
    """One PDE family plus the constants its residual and solver need.

    ``boundary`` selects the discretization map: "dirichlet" for the
    endpoint map with zero boundary values, "periodic" for the wrap-around
    map. ``mollify`` records whether stored solution fields were multiplied
    by sin(pi x1) sin(pi x2) after solving.
    """

    family: str
    k: float = 0.0              # Helmholtz constant
    nu: float = 0.0             # viscosity (ns-vorticity, burgers)
    q_const: float = 1.0        # constant forcing (darcy)
    darcy_hi: float = 12.0
    darcy_lo: float = 3.0
    final_time: float = 1.0     # simulated horizon (ns-vorticity, burgers)
    snapshots: int = 10         # stored ns snapshots over final_time
    boundary: str = "dirichlet"
    mollify: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family in ("ns-vorticity", "burgers") and self.nu <= 0:
            raise ValueError(f"{self.family} requires nu > 0, got {self.nu}")
        if self.family == "darcy" and not self.darcy_hi > self.darcy_lo:
            raise ValueError("darcy requires hi > lo")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def channels(self) -> int:
        """Diffusion-state channels: 1 for the burgers space-time field, else 2."""
        return 1 if self.family == "burgers" else 2

    def with_(self, **kw) -> "PdeSpec":
        return replace(self, **kw)


_DEFAULTS = {
    "darcy": dict(q_const=1.0, darcy_hi=12.0, darcy_lo=3.0,
                  boundary="dirichlet", mollify=False),
    "poisson": dict(k=0.0, boundary="dirichlet", mollify=True),
    "helmholtz": dict(k=1.0, boundary="dirichlet", mollify=True),
    "ns-vorticity": dict(nu=1e-3, boundary="periodic",
                         final_time=1.0, snapshots=10),
    "burgers": dict(nu=0.01, boundary="periodic", final_time=1.0),
}


def pde_spec(family: str, **overrides) -> PdeSpec:
    """Build a PdeSpec with the family's standard constants."""
    if family not in _DEFAULTS:
        raise ValueError(f"unknown family {family!r}")
    kw = dict(_DEFAULTS[family])
    kw.update(overrides)
    return PdeSpec(family=family, **kw)


def ns_forcing(n: int) -> np.ndarray:
    """Fixed vorticity forcing 0.1 (sin(2 pi (x1+x2)) + cos(2 pi (x1+x2)))."""
    c = (np.arange(n) + 0.5) / n
    x1 = c[np.newaxis, :]
    x2 = c[:, np.newaxis]
    s = 2 * np.pi * (x1 + x2)
    return 0.1 * (np.sin(s) + np.cos(s))
