"""Sparse observation masks and measurement extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ObservationSet", "sample_mask", "observe"]

PATTERNS = ("uniform-random", "regular-grid", "concentrated", "sensors")


@dataclass(frozen=True)
class ObservationSet:
    """Sparse measurements of a (C, H, W) state.

    Parallel arrays: ``channels[k]``, ``rows[k]``, ``cols[k]`` locate entry k
    and ``values[k]`` is its measured value.
    """

    channels: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    pattern: str = "uniform-random"
    noise_level: float = 0.0

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.intp)
        rw = np.asarray(self.rows, dtype=np.intp)
        cl = np.asarray(self.cols, dtype=np.intp)
        vv = np.asarray(self.values, dtype=np.float64)
        if not (ch.shape == rw.shape == cl.shape == vv.shape) or ch.ndim != 1:
            raise ValueError("observation arrays must be 1D and equally long")
        if len(vv) and not np.all(np.isfinite(vv)):
            raise ValueError("observed values must be finite")
        key = set(zip(ch.tolist(), rw.tolist(), cl.tolist()))
        if len(key) != len(ch):
            raise ValueError("duplicate (channel, row, col) observation")
        for name, arr in (("channels", ch), ("rows", rw), ("cols", cl), ("values", vv)):
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def empty(cls) -> "ObservationSet":
        z = np.zeros(0, dtype=np.intp)
        return cls(z, z, z, np.zeros(0))

    def for_channel(self, c: int) -> "ObservationSet":
        m = self.channels == c
        return ObservationSet(self.channels[m], self.rows[m], self.cols[m],
                              self.values[m], self.pattern, self.noise_level)


def sample_mask(pattern: str, count: int, size: int, seed,
                channel: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pick observation pixels; returns (channels, rows, cols) index arrays.

    Patterns:

    * ``uniform-random``: ``count`` pixels without replacement,
    * ``regular-grid``: an evenly strided lattice of approximately ``count``
      points,
    * ``concentrated``: density weighted toward the left/right margins
      (column weight (1 - d)^2 with d the scaled distance to the nearer
      vertical edge), rows uniform,
    * ``sensors``: ``count`` spatial columns observed at every time row
      (space-time layout; ``count <= size``).
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}")
    rng = np.random.default_rng(seed)

    if pattern == "sensors":
        if count > size:
            raise ValueError(f"sensors pattern needs count <= {size}, got {count}")
        cols = np.sort(rng.choice(size, size=count, replace=False))
        rows = np.repeat(np.arange(size), count)
        cols = np.tile(cols, size)
    elif pattern == "uniform-random":
        if count > size * size:
            raise ValueError(f"count {count} exceeds {size * size} pixels")
        flat = rng.choice(size * size, size=count, replace=False)
        rows, cols = np.divmod(flat, size)
    elif pattern == "regular-grid":
        if count > size * size:
            raise ValueError(f"count {count} exceeds {size * size} pixels")
        side = max(1, int(round(np.sqrt(count))))
        side = min(side, size)
        idx = np.round((np.arange(side) + 0.5) * size / side - 0.5).astype(int)
        rows, cols = np.meshgrid(idx, idx, indexing="ij")
        rows, cols = rows.ravel(), cols.ravel()
    else:  # concentrated
        if count > size * size:
            raise ValueError(f"count {count} exceeds {size * size} pixels")
        j = np.arange(size)
        d = np.minimum(j, size - 1 - j) / (size / 2.0)
        w = (1.0 - d) ** 2 + 1e-3
        # flat index is row*size + col, so tiling repeats column weights per row
        probs = np.tile(w / (w.sum() * size), size)
        flat = rng.choice(size * size, size=count, replace=False, p=probs)
        rows, cols = np.divmod(flat, size)

    channels = np.full(len(rows), channel, dtype=np.intp)
    return channels, rows.astype(np.intp), cols.astype(np.intp)


def observe(state: np.ndarray, mask, noise_level: float = 0.0,
            seed=0, pattern: str = "uniform-random") -> ObservationSet:
    """Read a (C, H, W) state at masked pixels, optionally with Gaussian noise.

    Noise std is ``noise_level`` times the per-channel standard deviation of
    the ground-truth state, so a ``noise_level`` of 0.15 means 15% of the
    channel's natural scale.
    """
    x = np.asarray(state, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"state must be (C, H, W), got shape {x.shape}")
    channels, rows, cols = mask
    values = x[channels, rows, cols].copy()
    if noise_level > 0:
        rng = np.random.default_rng(seed)
        ch_std = x.std(axis=(1, 2))
        values += noise_level * ch_std[channels] * rng.standard_normal(len(values))
    return ObservationSet(channels, rows, cols, values,
                          pattern=pattern, noise_level=noise_level)
