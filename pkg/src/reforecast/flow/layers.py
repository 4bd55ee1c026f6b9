"""Invertible flow layers: affine coupling and masked autoregressive.

Scale outputs pass through cap * tanh(raw) with a learnable positive cap, so
one layer can never blow the log-determinant up; final linear layers start
at zero, making a freshly built stack the identity map.
"""

import numpy as np

from ..autodiff import Tensor, concat, dropout, exp, mul, neg, softplus, tanh, tsum
from ..errors import InvalidConfig

_CAP_RAW_INIT = float(np.log(np.expm1(2.0)))  # softplus(raw) = 2


def _linear_init(rng, fan_in, fan_out, zero=False):
    if zero:
        return np.zeros((fan_in, fan_out))
    return rng.normal(0.0, 1.0 / np.sqrt(max(fan_in, 1)), size=(fan_in, fan_out))


class _ConditionerNet:
    """Two hidden tanh layers; the conditioner joins the first layer unmasked.

    Masks (when given) multiply the corresponding weight matrices, which is
    how the autoregressive layer keeps its triangular structure.
    """

    def __init__(self, in_dim, out_dim, hidden, cond_dim, rng,
                 masks=(None, None, None)):
        self.in_dim, self.out_dim, self.cond_dim = in_dim, out_dim, cond_dim
        self.w1 = Tensor(_linear_init(rng, in_dim, hidden), requires_grad=True)
        self.b1 = Tensor(np.zeros(hidden), requires_grad=True)
        self.w2 = Tensor(_linear_init(rng, hidden, hidden), requires_grad=True)
        self.b2 = Tensor(np.zeros(hidden), requires_grad=True)
        self.w3 = Tensor(_linear_init(rng, hidden, out_dim, zero=True), requires_grad=True)
        self.b3 = Tensor(np.zeros(out_dim), requires_grad=True)
        self.wc = None
        if cond_dim:
            self.wc = Tensor(
                _linear_init(rng, cond_dim, hidden), requires_grad=True
            )
        self.masks = tuple(None if m is None else Tensor(m) for m in masks)

    def params(self):
        out = [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]
        if self.wc is not None:
            out.append(self.wc)
        return out

    def _masked(self, w, i):
        mask = self.masks[i]
        return w if mask is None else mul(w, mask)

    def __call__(self, x, h=None, drop_rng=None, drop_p=0.0):
        a = x @ self._masked(self.w1, 0) + self.b1
        if h is not None and self.wc is not None:
            a = a + h @ self.wc
        a = tanh(a)
        if drop_rng is not None and drop_p > 0.0:
            a = dropout(a, drop_p, drop_rng)
        a = tanh(a @ self._masked(self.w2, 1) + self.b2)
        if drop_rng is not None and drop_p > 0.0:
            a = dropout(a, drop_p, drop_rng)
        return a @ self._masked(self.w3, 2) + self.b3

    def to_arrays(self, prefix=""):
        out = {
            prefix + "w1": self.w1.data, prefix + "b1": self.b1.data,
            prefix + "w2": self.w2.data, prefix + "b2": self.b2.data,
            prefix + "w3": self.w3.data, prefix + "b3": self.b3.data,
        }
        if self.wc is not None:
            out[prefix + "wc"] = self.wc.data
        return out

    def load_arrays(self, arrays, prefix=""):
        for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
            setattr(self, name, Tensor(arrays[prefix + name].copy(), requires_grad=True))
        if self.wc is not None:
            self.wc = Tensor(arrays[prefix + "wc"].copy(), requires_grad=True)


class AffineCouplingLayer:
    """Pass the first half through, affinely transform the second half with
    scale/shift computed from the first half (plus conditioner)."""

    kind = "coupling"

    def __init__(self, dim, cond_dim=0, hidden=32, rng=None):
        if dim < 2:
            raise InvalidConfig("coupling layers need dim >= 2")
        rng = rng or np.random.default_rng(0)
        self.dim = dim
        self.cond_dim = cond_dim
        self.n_pass = (dim + 1) // 2
        self.n_trans = dim - self.n_pass
        self.net = _ConditionerNet(self.n_pass, 2 * self.n_trans, hidden, cond_dim, rng)
        self.cap_raw = Tensor(np.array([_CAP_RAW_INIT]), requires_grad=True)

    def params(self):
        return self.net.params() + [self.cap_raw]

    def _scale_shift(self, xa, h, drop_rng, drop_p):
        out = self.net(xa, h, drop_rng, drop_p)
        raw_s = out[:, : self.n_trans]
        shift = out[:, self.n_trans:]
        scale = mul(softplus(self.cap_raw), tanh(raw_s))
        return scale, shift

    def forward(self, x, h=None, drop_rng=None, drop_p=0.0):
        xa = x[:, : self.n_pass]
        xb = x[:, self.n_pass:]
        scale, shift = self._scale_shift(xa, h, drop_rng, drop_p)
        zb = mul(xb, exp(scale)) + shift
        z = concat([xa, zb], axis=1)
        return z, tsum(scale, axis=1)

    def inverse(self, z, h=None):
        za = Tensor(z[:, : self.n_pass])
        zb = z[:, self.n_pass:]
        scale, shift = self._scale_shift(za, None if h is None else Tensor(h), None, 0.0)
        xb = (zb - shift.data) * np.exp(-scale.data)
        return np.concatenate([z[:, : self.n_pass], xb], axis=1)

    def to_arrays(self, prefix=""):
        out = self.net.to_arrays(prefix + "net_")
        out[prefix + "cap_raw"] = np.atleast_1d(self.cap_raw.data)
        return out

    def load_arrays(self, arrays, prefix=""):
        self.net.load_arrays(arrays, prefix + "net_")
        self.cap_raw = Tensor(arrays[prefix + "cap_raw"].copy(), requires_grad=True)


def made_masks(dim, hidden):
    """Degree masks: output coordinate j may depend only on inputs < j."""
    in_deg = np.arange(1, dim + 1)
    hid_deg = (np.arange(hidden) % max(1, dim - 1)) + 1
    out_deg = np.concatenate([in_deg, in_deg])  # [mu_1..mu_d, a_1..a_d]
    m1 = (hid_deg[None, :] >= in_deg[:, None]).astype(np.float64)
    m2 = (hid_deg[None, :] >= hid_deg[:, None]).astype(np.float64)
    m3 = (out_deg[None, :] > hid_deg[:, None]).astype(np.float64)
    return m1, m2, m3


class MaskedAutoregressiveLayer:
    """Autoregressive affine layer: z_j = (x_j - mu_j(x_<j)) * exp(-a_j(x_<j)).

    The density direction is a single masked network pass; the inverse
    reconstructs coordinates sequentially, each step reusing the already
    recovered prefix.
    """

    kind = "maf"

    def __init__(self, dim, cond_dim=0, hidden=32, rng=None):
        rng = rng or np.random.default_rng(0)
        self.dim = dim
        self.cond_dim = cond_dim
        self.net = _ConditionerNet(
            dim, 2 * dim, hidden, cond_dim, rng, masks=made_masks(dim, hidden)
        )
        self.cap_raw = Tensor(np.array([_CAP_RAW_INIT]), requires_grad=True)

    def params(self):
        return self.net.params() + [self.cap_raw]

    def _mu_a(self, x, h, drop_rng, drop_p):
        out = self.net(x, h, drop_rng, drop_p)
        mu = out[:, : self.dim]
        raw_a = out[:, self.dim:]
        a = mul(softplus(self.cap_raw), tanh(raw_a))
        return mu, a

    def forward(self, x, h=None, drop_rng=None, drop_p=0.0):
        mu, a = self._mu_a(x, h, drop_rng, drop_p)
        z = mul(x - mu, exp(neg(a)))
        return z, neg(tsum(a, axis=1))

    def inverse(self, z, h=None):
        x = np.zeros_like(z)
        ht = None if h is None else Tensor(h)
        for j in range(self.dim):
            mu, a = self._mu_a(Tensor(x), ht, None, 0.0)
            x[:, j] = z[:, j] * np.exp(a.data[:, j]) + mu.data[:, j]
        return x

    def to_arrays(self, prefix=""):
        out = self.net.to_arrays(prefix + "net_")
        out[prefix + "cap_raw"] = np.atleast_1d(self.cap_raw.data)
        return out

    def load_arrays(self, arrays, prefix=""):
        self.net.load_arrays(arrays, prefix + "net_")
        self.cap_raw = Tensor(arrays[prefix + "cap_raw"].copy(), requires_grad=True)
