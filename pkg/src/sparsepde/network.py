"""A small convolutional encoder-decoder with hand-written backpropagation.

The net maps (N, C, H, W) states plus a per-sample noise conditioning
scalar to (N, C, H, W) outputs. Two 2x-downsampling levels, skip
connections, SiLU activations, and an additive per-channel embedding bias
after the first convolution of every block. Everything is plain numpy;
``backward`` returns the input gradient and (optionally) parameter
gradients, so the same code path serves training and the sampler's
vector-Jacobian products.
"""

from __future__ import annotations

import numpy as np

__all__ = ["DenoiserNet"]


def _im2col(xp: np.ndarray) -> np.ndarray:
    """Gather 3x3 patches of a padded (N, C, H+2, W+2) input: (N, C*9, H*W)."""
    n, c, hp, wp = xp.shape
    h, w = hp - 2, wp - 2
    cols = np.empty((n, c, 9, h, w), dtype=xp.dtype)
    for t, (di, dj) in enumerate(_TAPS):
        cols[:, :, t] = xp[:, :, di:di + h, dj:dj + w]
    return cols.reshape(n, c * 9, h * w)


def _col2im(gcols: np.ndarray, h: int, w: int) -> np.ndarray:
    """Scatter-add patch gradients back onto the padded input."""
    n = gcols.shape[0]
    c = gcols.shape[1] // 9
    g = gcols.reshape(n, c, 9, h, w)
    gxp = np.zeros((n, c, h + 2, w + 2), dtype=gcols.dtype)
    for t, (di, dj) in enumerate(_TAPS):
        gxp[:, :, di:di + h, dj:dj + w] += g[:, :, t]
    return gxp


_TAPS = [(di, dj) for di in range(3) for dj in range(3)]


def _conv_fwd(cols: np.ndarray, W: np.ndarray, b: np.ndarray,
              h: int, w: int) -> np.ndarray:
    """3x3 convolution on gathered patches; returns (N, Cout, H, W)."""
    cout = W.shape[0]
    out = np.matmul(W.reshape(cout, -1), cols)
    return out.reshape(cols.shape[0], cout, h, w) + b[None, :, None, None]


def _conv_bwd(cols: np.ndarray, W: np.ndarray, gy: np.ndarray,
              need_param_grads: bool):
    """Gradients of _conv_fwd: (g_padded_input, gW, gb)."""
    n, cout, h, w = gy.shape
    gy_flat = gy.reshape(n, cout, h * w)
    gw = gb = None
    if need_param_grads:
        gw = np.matmul(gy_flat, cols.transpose(0, 2, 1)).sum(axis=0) \
            .reshape(W.shape)
        gb = gy.sum(axis=(0, 2, 3))
    gcols = np.matmul(W.reshape(cout, -1).T, gy_flat)
    return _col2im(gcols, h, w), gw, gb


def _pad(x: np.ndarray, mode: str) -> np.ndarray:
    widths = ((0, 0), (0, 0), (1, 1), (1, 1))
    return np.pad(x, widths, mode="wrap" if mode == "wrap" else "constant")


def _unpad_grad(gxp: np.ndarray, mode: str) -> np.ndarray:
    if mode != "wrap":
        return gxp[:, :, 1:-1, 1:-1].copy()
    g = gxp[:, :, 1:-1, 1:-1].copy()
    g[:, :, -1, :] += gxp[:, :, 0, 1:-1]
    g[:, :, 0, :] += gxp[:, :, -1, 1:-1]
    g[:, :, :, -1] += gxp[:, :, 1:-1, 0]
    g[:, :, :, 0] += gxp[:, :, 1:-1, -1]
    g[:, :, -1, -1] += gxp[:, :, 0, 0]
    g[:, :, -1, 0] += gxp[:, :, 0, -1]
    g[:, :, 0, -1] += gxp[:, :, -1, 0]
    g[:, :, 0, 0] += gxp[:, :, -1, -1]
    return g


def _silu(x: np.ndarray) -> np.ndarray:
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s


def _silu_bwd(x: np.ndarray, gy: np.ndarray) -> np.ndarray:
    s = 1.0 / (1.0 + np.exp(-x))
    return gy * s * (1.0 + x * (1.0 - s))


def _pool(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def _pool_bwd(gy: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(gy, 2, axis=2), 2, axis=3) / 4.0


def _up(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def _up_bwd(gy: np.ndarray) -> np.ndarray:
    n, c, h, w = gy.shape
    return gy.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


_N_FREQS = 8


def _fourier_features(cnoise: np.ndarray) -> np.ndarray:
    f = 2.0 ** np.arange(_N_FREQS)
    arg = cnoise[:, None] * f[None, :]
    return np.concatenate([np.cos(arg), np.sin(arg)], axis=1)


class DenoiserNet:
    """Encoder-decoder denoising network on square grids (H, W >= 4)."""

    BLOCKS = ("enc0", "enc1", "mid", "dec1", "dec0")

    def __init__(self, channels: int, base: int = 16, emb_dim: int = 32,
                 pad: str = "wrap", seed: int = 0, dtype=np.float64):
        if pad not in ("wrap", "zeros"):
            raise ValueError(f"unknown pad mode {pad!r}")
        self.channels = channels
        self.base = base
        self.emb_dim = emb_dim
        self.pad = pad
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 911]))
        b, e, c = base, emb_dim, channels
        self.params: dict[str, np.ndarray] = {}

        def conv(name, cout, cin, zero=False):
            w = np.zeros((cout, cin, 3, 3)) if zero else \
                rng.standard_normal((cout, cin, 3, 3)) * np.sqrt(2.0 / (cin * 9))
            self.params[name + "_W"] = w.astype(self.dtype)
            self.params[name + "_b"] = np.zeros(cout, dtype=self.dtype)

        def linear(name, out, inp):
            self.params[name + "_W"] = \
                (rng.standard_normal((out, inp)) / np.sqrt(inp)).astype(self.dtype)
            self.params[name + "_b"] = np.zeros(out, dtype=self.dtype)

        linear("emb1", e, 2 * _N_FREQS)
        linear("emb2", e, e)
        widths = {"enc0": (c, b), "enc1": (b, 2 * b), "mid": (2 * b, 2 * b),
                  "dec1": (4 * b, 2 * b), "dec0": (3 * b, b)}
        for name, (cin, cout) in widths.items():
            conv(name + "a", cout, cin)
            linear(name + "e", cout, e)
            conv(name + "b", cout, cout)
        conv("out", c, b, zero=True)

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    # -- forward -----------------------------------------------------------

    def _block(self, name: str, x: np.ndarray, emb: np.ndarray, cache: dict):
        p = self.params
        h, w = x.shape[2], x.shape[3]
        cols1 = _im2col(_pad(x, self.pad))
        ebias = emb @ p[name + "e_W"].T + p[name + "e_b"]
        t1 = _conv_fwd(cols1, p[name + "a_W"], p[name + "a_b"], h, w) \
            + ebias[:, :, None, None]
        a1 = _silu(t1)
        cols2 = _im2col(_pad(a1, self.pad))
        t2 = _conv_fwd(cols2, p[name + "b_W"], p[name + "b_b"], h, w)
        a2 = _silu(t2)
        cache[name] = (cols1, t1, cols2, t2)
        return a2

    def forward(self, x: np.ndarray, cnoise: np.ndarray,
                cache: dict | None = None) -> np.ndarray:
        """x: (N, C, H, W); cnoise: (N,). Pass a dict to keep the tape."""
        p = self.params
        keep = cache if cache is not None else {}
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.shape[2] % 4 or x.shape[3] % 4:
            raise ValueError("grid sides must be multiples of 4")
        ff = _fourier_features(np.asarray(cnoise)).astype(self.dtype)
        z1 = ff @ p["emb1_W"].T + p["emb1_b"]
        h1 = _silu(z1)
        z2 = h1 @ p["emb2_W"].T + p["emb2_b"]
        emb = _silu(z2)
        keep["emb"] = (ff, z1, h1, z2, emb)

        s0 = self._block("enc0", x, emb, keep)
        p0 = _pool(s0)
        s1 = self._block("enc1", p0, emb, keep)
        p1 = _pool(s1)
        mm = self._block("mid", p1, emb, keep)
        u1 = _up(mm)
        d1 = self._block("dec1", np.concatenate([u1, s1], axis=1), emb, keep)
        u0 = _up(d1)
        d0 = self._block("dec0", np.concatenate([u0, s0], axis=1), emb, keep)
        h, w = d0.shape[2], d0.shape[3]
        cols = _im2col(_pad(d0, self.pad))
        y = _conv_fwd(cols, p["out_W"], p["out_b"], h, w)
        keep["outp"] = cols
        keep["widths"] = (s0.shape[1], s1.shape[1])
        return y

    # -- backward ----------------------------------------------------------

    def _block_bwd(self, name: str, cache: dict, gy: np.ndarray,
                   grads: dict | None):
        p = self.params
        cols1, t1, cols2, t2 = cache[name]
        need = grads is not None
        g_t2 = _silu_bwd(t2, gy)
        g_a1p, gw, gb = _conv_bwd(cols2, p[name + "b_W"], g_t2, need)
        if need:
            grads[name + "b_W"] = gw
            grads[name + "b_b"] = gb
        g_a1 = _unpad_grad(g_a1p, self.pad)
        g_t1 = _silu_bwd(t1, g_a1)
        g_ebias = g_t1.sum(axis=(2, 3))  # (N, Cout)
        g_xp, gw, gb = _conv_bwd(cols1, p[name + "a_W"], g_t1, need)
        if need:
            grads[name + "a_W"] = gw
            grads[name + "a_b"] = gb
        gx = _unpad_grad(g_xp, self.pad)
        return gx, g_ebias

    def backward(self, cache: dict, gy: np.ndarray,
                 need_param_grads: bool = True):
        """Reverse pass over a taped forward call.

        Returns (grad_x, grads_dict) where grads_dict is None when
        ``need_param_grads`` is False.
        """
        p = self.params
        gy = np.ascontiguousarray(gy, dtype=self.dtype)
        grads: dict | None = {} if need_param_grads else None
        need = need_param_grads
        w0, w1 = cache["widths"]

        g_d0p, gw, gb = _conv_bwd(cache["outp"], p["out_W"], gy, need)
        if need:
            grads["out_W"] = gw
            grads["out_b"] = gb
        g_d0 = _unpad_grad(g_d0p, self.pad)

        g_emb_total = 0.0
        g_cat0, ge = self._block_bwd("dec0", cache, g_d0, grads)
        g_emb_total = g_emb_total + ge @ p["dec0e_W"]
        if need:
            grads["dec0e_W"] = ge.T @ cache["emb"][4]
            grads["dec0e_b"] = ge.sum(axis=0)
        g_u0, g_s0_skip = g_cat0[:, :-w0], g_cat0[:, -w0:]
        g_d1 = _up_bwd(g_u0)

        g_cat1, ge = self._block_bwd("dec1", cache, g_d1, grads)
        g_emb_total = g_emb_total + ge @ p["dec1e_W"]
        if need:
            grads["dec1e_W"] = ge.T @ cache["emb"][4]
            grads["dec1e_b"] = ge.sum(axis=0)
        g_u1, g_s1_skip = g_cat1[:, :-w1], g_cat1[:, -w1:]
        g_mm = _up_bwd(g_u1)

        g_p1, ge = self._block_bwd("mid", cache, g_mm, grads)
        g_emb_total = g_emb_total + ge @ p["mide_W"]
        if need:
            grads["mide_W"] = ge.T @ cache["emb"][4]
            grads["mide_b"] = ge.sum(axis=0)
        g_s1 = _pool_bwd(g_p1) + g_s1_skip

        g_p0, ge = self._block_bwd("enc1", cache, g_s1, grads)
        g_emb_total = g_emb_total + ge @ p["enc1e_W"]
        if need:
            grads["enc1e_W"] = ge.T @ cache["emb"][4]
            grads["enc1e_b"] = ge.sum(axis=0)
        g_s0 = _pool_bwd(g_p0) + g_s0_skip

        g_x, ge = self._block_bwd("enc0", cache, g_s0, grads)
        g_emb_total = g_emb_total + ge @ p["enc0e_W"]
        if need:
            grads["enc0e_W"] = ge.T @ cache["emb"][4]
            grads["enc0e_b"] = ge.sum(axis=0)

        # embedding MLP
        ff, z1, h1, z2, _ = cache["emb"]
        g_z2 = _silu_bwd(z2, g_emb_total)
        if need:
            grads["emb2_W"] = g_z2.T @ h1
            grads["emb2_b"] = g_z2.sum(axis=0)
        g_h1 = g_z2 @ p["emb2_W"]
        g_z1 = _silu_bwd(z1, g_h1)
        if need:
            grads["emb1_W"] = g_z1.T @ ff
            grads["emb1_b"] = g_z1.sum(axis=0)

        return g_x, grads
