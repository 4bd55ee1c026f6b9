"""Stacked invertible layers with a standard-normal base distribution."""

import numpy as np

from ..autodiff import LOG_2PI, Tensor, as_tensor, tsum
from ..errors import ConditionerMissing, InvalidConfig, NonFiniteActivation


class FlowStack:
    """Composition of invertible layers with a fixed reversal permutation
    between consecutive layers (cheap remedy for coupling-half asymmetry)."""

    def __init__(self, layers, dim, cond_dim=0, dropout=0.1):
        if not layers:
            raise InvalidConfig("flow stack needs at least one layer")
        self.layers = list(layers)
        self.dim = dim
        self.cond_dim = cond_dim
        self.dropout = dropout

    @classmethod
    def build(cls, dim, cond_dim=0, depth=5, kind="coupling", hidden=32,
              seed=0, dropout=0.1):
        """kind: "coupling", "maf", or "mixed" (alternating); one-dimensional
        data always gets masked-autoregressive layers."""
        rng = np.random.default_rng(seed)
        from .layers import AffineCouplingLayer, MaskedAutoregressiveLayer

        layers = []
        for i in range(depth):
            if kind == "mixed":
                want = "coupling" if i % 2 == 0 else "maf"
            else:
                want = kind
            if dim < 2:
                want = "maf"
            if want == "coupling":
                layers.append(AffineCouplingLayer(dim, cond_dim, hidden, rng))
            elif want == "maf":
                layers.append(MaskedAutoregressiveLayer(dim, cond_dim, hidden, rng))
            else:
                raise InvalidConfig(f"unknown layer kind {want!r}")
        return cls(layers, dim, cond_dim, dropout)

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def _check_cond(self, h):
        if self.cond_dim and h is None:
            raise ConditionerMissing("stack is conditional but no conditioner given")
        if not self.cond_dim and h is not None:
            raise InvalidConfig("stack is unconditional but a conditioner was given")

    def forward(self, x, h=None, drop_rng=None):
        """Map data to noise: returns (z, logdet) as tensors, logdet (B,)."""
        self._check_cond(h)
        z = as_tensor(x)
        if z.data.ndim != 2 or z.data.shape[1] != self.dim:
            raise InvalidConfig(f"expected (B, {self.dim}) input, got {z.data.shape}")
        ht = None if h is None else as_tensor(h)
        drop_p = self.dropout if drop_rng is not None else 0.0
        total = None
        for i, layer in enumerate(self.layers):
            z, ld = layer.forward(z, ht, drop_rng, drop_p)
            total = ld if total is None else total + ld
            if i < len(self.layers) - 1:
                z = z[:, ::-1]
        if not np.all(np.isfinite(z.data)):
            raise NonFiniteActivation("flow forward produced non-finite values")
        return z, total

    def inverse(self, z, h=None):
        """Map noise back to data space; plain arrays, no gradient tracking."""
        self._check_cond(h)
        x = np.asarray(z, dtype=np.float64)
        hd = None if h is None else np.asarray(h, dtype=np.float64)
        for i in reversed(range(len(self.layers))):
            x = self.layers[i].inverse(x, hd)
            if i > 0:
                x = x[:, ::-1]
        if not np.all(np.isfinite(x)):
            raise NonFiniteActivation("flow inverse produced non-finite values")
        return x

    def log_prob(self, x, h=None, drop_rng=None):
        """log N(forward(x); 0, I) + logdet, shape (B,)."""
        z, logdet = self.forward(x, h, drop_rng)
        base = Tensor(-0.5 * self.dim * LOG_2PI) - 0.5 * tsum(z * z, axis=1)
        return base + logdet

    def sample(self, count, seed, h=None):
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((count, self.dim))
        return self.inverse(noise, h)

    def to_arrays(self, prefix=""):
        arrays = {}
        for i, layer in enumerate(self.layers):
            arrays.update(layer.to_arrays(f"{prefix}layer{i}_"))
        return arrays

    def describe(self):
        first = self.layers[0].net.w1.data.shape[1]
        return {
            "dim": int(self.dim),
            "cond_dim": int(self.cond_dim),
            "dropout": float(self.dropout),
            "kinds": [layer.kind for layer in self.layers],
            "hidden": int(first),
        }

    @classmethod
    def from_arrays(cls, desc, arrays, prefix=""):
        from .layers import AffineCouplingLayer, MaskedAutoregressiveLayer

        layers = []
        for i, kind in enumerate(desc["kinds"]):
            klass = AffineCouplingLayer if kind == "coupling" else MaskedAutoregressiveLayer
            layer = klass(desc["dim"], desc["cond_dim"], desc["hidden"])
            layer.load_arrays(arrays, f"{prefix}layer{i}_")
            layers.append(layer)
        return cls(layers, desc["dim"], desc["cond_dim"], desc["dropout"])
