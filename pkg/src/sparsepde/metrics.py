"""Evaluation metrics and per-scene aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MetricsReport", "relative_error", "error_rate_binary", "aggregate"]


def relative_error(pred, gt, per_pixel: bool = False) -> float:
    """Relative error between a prediction and the ground truth.

    Default is the global relative L2 norm ||pred - gt|| / ||gt||, the
    standard neural-operator metric. ``per_pixel=True`` switches to the
    literal pixel-wise mean of |pred - gt| / |gt|, which blows up near
    zeros of gt and exists only for comparison.
    """
    p = np.asarray(getattr(pred, "values", pred), dtype=np.float64)
    g = np.asarray(getattr(gt, "values", gt), dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    if per_pixel:
        return float(np.mean(np.abs(p - g) / np.abs(g)))
    denom = np.linalg.norm(g)
    if denom == 0:
        return 0.0 if np.allclose(p, 0) else np.inf
    return float(np.linalg.norm(p - g) / denom)


def error_rate_binary(pred, gt, hi: float = 12.0, lo: float = 3.0) -> float:
    """Fraction of pixels misclassified after thresholding at (hi + lo) / 2."""
    p = np.asarray(getattr(pred, "values", pred), dtype=np.float64)
    g = np.asarray(getattr(gt, "values", gt), dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    mid = 0.5 * (hi + lo)
    return float(np.mean((p >= mid) != (g >= mid)))


@dataclass(frozen=True)
class MetricsReport:
    """Summary statistics of per-scene errors."""

    errors: np.ndarray
    mean: float
    std: float
    min: float
    max: float

    @property
    def count(self) -> int:
        return len(self.errors)

    def __str__(self) -> str:
        return f"{100 * self.mean:.1f}% +/- {100 * self.std:.1f}% ({self.count} scenes)"


def aggregate(errors) -> MetricsReport:
    """Mean, sample standard deviation, and range of per-scene errors."""
    e = np.asarray(errors, dtype=np.float64)
    if e.ndim != 1 or len(e) < 2:
        raise ValueError("aggregate needs at least 2 scene errors")
    if not np.all(np.isfinite(e)):
        raise ValueError("scene errors must be finite")
    return MetricsReport(errors=e, mean=float(e.mean()),
                         std=float(e.std(ddof=1)),
                         min=float(e.min()), max=float(e.max()))
