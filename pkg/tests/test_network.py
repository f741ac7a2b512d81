"""Hand-written backpropagation against finite differences."""

import numpy as np
import pytest

from sparsepde.network import DenoiserNet


@pytest.fixture(scope="module", params=["wrap", "zeros"])
def net_and_tape(request):
    rng = np.random.default_rng(0)
    net = DenoiserNet(channels=2, base=6, emb_dim=12, pad=request.param, seed=3)
    # zero-initialized output conv would hide the body's gradients
    net.params["out_W"] = rng.standard_normal(net.params["out_W"].shape) * 0.1
    x = rng.standard_normal((2, 2, 8, 8))
    cn = rng.standard_normal(2)
    cache = {}
    y = net.forward(x, cn, cache=cache)
    gy = rng.standard_normal(y.shape)
    gx, grads = net.backward(cache, gy)
    return net, x, cn, gy, gx, grads


class TestForward:
    def test_shape_and_determinism(self):
        net = DenoiserNet(channels=1, base=4, emb_dim=8, seed=1)
        x = np.random.default_rng(2).standard_normal((3, 1, 16, 16))
        y1 = net.forward(x, np.zeros(3))
        y2 = net.forward(x, np.zeros(3))
        assert y1.shape == x.shape
        assert np.array_equal(y1, y2)

    def test_zero_init_output(self):
        net = DenoiserNet(channels=2, base=4, seed=5)
        x = np.random.default_rng(3).standard_normal((1, 2, 8, 8))
        assert np.abs(net.forward(x, np.zeros(1))).max() == 0.0

    def test_rejects_bad_grid(self):
        net = DenoiserNet(channels=1, base=4)
        with pytest.raises(ValueError):
            net.forward(np.zeros((1, 1, 10, 10)), np.zeros(1))

    def test_rejects_bad_pad(self):
        with pytest.raises(ValueError):
            DenoiserNet(channels=1, pad="reflect")


class TestBackward:
    def test_input_gradient_fd(self, net_and_tape):
        net, x, cn, gy, gx, _ = net_and_tape
        rng = np.random.default_rng(4)
        eps = 1e-6
        for _ in range(30):
            i = tuple(rng.integers(0, s) for s in x.shape)
            xp = x.copy(); xp[i] += eps
            xm = x.copy(); xm[i] -= eps
            fd = ((net.forward(xp, cn) * gy).sum()
                  - (net.forward(xm, cn) * gy).sum()) / (2 * eps)
            assert abs(fd - gx[i]) <= 1e-5 * max(abs(fd), 1e-8)

    @pytest.mark.parametrize("name", ["enc0a_W", "enc1e_W", "midb_b",
                                      "dec1a_W", "dec0e_b", "emb1_W",
                                      "emb2_b", "out_W", "out_b"])
    def test_param_gradients_fd(self, net_and_tape, name):
        net, x, cn, gy, _, grads = net_and_tape
        rng = np.random.default_rng(hash(name) % 2**31)
        p = net.params[name]
        eps = 1e-6
        for _ in range(6):
            i = tuple(rng.integers(0, s) for s in p.shape)
            orig = p[i]
            p[i] = orig + eps
            lp = (net.forward(x, cn) * gy).sum()
            p[i] = orig - eps
            lm = (net.forward(x, cn) * gy).sum()
            p[i] = orig
            fd = (lp - lm) / (2 * eps)
            assert abs(fd - grads[name][i]) <= 2e-5 * max(abs(fd), 1e-6)

    def test_vjp_only_skips_param_grads(self, net_and_tape):
        net, x, cn, gy, gx, _ = net_and_tape
        cache = {}
        net.forward(x, cn, cache=cache)
        gx2, grads = net.backward(cache, gy, need_param_grads=False)
        assert grads is None
        assert np.allclose(gx, gx2)

    def test_param_count_stable(self):
        net = DenoiserNet(channels=2, base=16, emb_dim=32)
        assert net.param_count == sum(p.size for p in net.params.values())
        net2 = DenoiserNet(channels=2, base=16, emb_dim=32, seed=9)
        assert net.param_count == net2.param_count
