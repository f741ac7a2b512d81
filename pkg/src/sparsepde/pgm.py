"""Binary PGM (P5) heatmap export, plus a reader for round-trip checks."""

from __future__ import annotations

import numpy as np

__all__ = ["render_heatmap", "read_pgm"]


def render_heatmap(field, path, comment: str = "") -> None:
    """Write an 8-bit grayscale PGM, min-max normalized.

    The value range is recorded in a header comment so the image stays
    interpretable; constant fields map to mid-gray (128).
    """
    v = np.asarray(getattr(field, "values", field), dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"heatmap needs a 2D field, got shape {v.shape}")
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        pixels = np.round((v - lo) / (hi - lo) * 255).astype(np.uint8)
    else:
        pixels = np.full(v.shape, 128, dtype=np.uint8)
    header = f"P5\n# range {lo!r} {hi!r}"
    if comment:
        header += f"\n# {comment}"
    header += f"\n{v.shape[1]} {v.shape[0]}\n255\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(pixels.tobytes())


def read_pgm(path):
    """Read a binary PGM written by render_heatmap: (pixels, (lo, hi))."""
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n")
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    lo = hi = None
    fields = []
    i = 1
    while len(fields) < 3:
        line = parts[i]
        if line.startswith(b"#"):
            toks = line[1:].split()
            if toks and toks[0] == b"range":
                lo, hi = float(toks[1]), float(toks[2])
        else:
            fields.extend(line.split())
        i += 1
    w, h, maxval = int(fields[0]), int(fields[1]), int(fields[2])
    if maxval != 255:
        raise ValueError("expected 8-bit PGM")
    payload = b"\n".join(parts[i:])
    pixels = np.frombuffer(payload[:w * h], dtype=np.uint8).reshape(h, w)
    return pixels, (lo, hi)
