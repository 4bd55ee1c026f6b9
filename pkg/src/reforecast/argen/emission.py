"""Low-rank Gaussian emission head: state -> N(mu, diag(D) + V V^T).

One weight vector each for the mean and the diagonal, one matrix for the
low-rank factor, applied identically to every area's state (the weights are
shared across the spatial dimension; only the states differ).
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, as_tensor, lowrank_gaussian_nll, reshape, softplus


@dataclass
class EmissionDistribution:
    """Evaluated emission parameters for one batch of steps."""

    mu: np.ndarray        # (B, d)
    d_diag: np.ndarray    # (B, d), strictly positive
    v: np.ndarray         # (B, d, r)

    def covariance(self):
        """Dense covariance, for oracles and small-d inspection only."""
        eye = np.einsum("bd,de->bde", self.d_diag, np.eye(self.d_diag.shape[1]))
        return eye + np.einsum("bdr,ber->bde", self.v, self.v)


class LowRankGaussianHead:
    def __init__(self, hidden, rank, rng=None):
        rng = rng or np.random.default_rng(0)
        scale = 1.0 / np.sqrt(hidden)
        self.hidden = hidden
        self.rank = rank
        self.w_mu = Tensor(rng.normal(0.0, scale, size=(hidden,)), requires_grad=True)
        self.w_d = Tensor(rng.normal(0.0, scale, size=(hidden,)), requires_grad=True)
        self.w_v = Tensor(rng.normal(0.0, scale, size=(hidden, rank)), requires_grad=True)

    def params(self):
        return [self.w_mu, self.w_d, self.w_v]

    def __call__(self, states):
        """states: (B, d, hidden) -> (mu (B,d), d_diag (B,d), v (B,d,r)) tensors."""
        states = as_tensor(states)
        bsz, d, hid = states.data.shape
        flat = reshape(states, (bsz * d, hid))
        mu = reshape(flat @ self.w_mu, (bsz, d))
        d_diag = reshape(softplus(flat @ self.w_d), (bsz, d))
        v = reshape(flat @ self.w_v, (bsz, d, self.rank))
        return mu, d_diag, v

    def to_arrays(self, prefix=""):
        return {prefix + "w_mu": self.w_mu.data, prefix + "w_d": self.w_d.data,
                prefix + "w_v": self.w_v.data}

    @classmethod
    def from_arrays(cls, arrays, prefix=""):
        w_v = arrays[prefix + "w_v"]
        head = cls(w_v.shape[0], w_v.shape[1])
        head.w_mu = Tensor(arrays[prefix + "w_mu"].copy(), requires_grad=True)
        head.w_d = Tensor(arrays[prefix + "w_d"].copy(), requires_grad=True)
        head.w_v = Tensor(w_v.copy(), requires_grad=True)
        return head


def emission_params(head, states):
    """Evaluate the head on (B, d, hidden) states as a plain distribution."""
    mu, d_diag, v = head(states)
    return EmissionDistribution(mu=mu.data, d_diag=d_diag.data, v=v.data)


def lowrank_gaussian_logprob(x, dist):
    """log N(x; mu, diag(D) + V V^T) per batch row, via the low-rank identities."""
    nll = lowrank_gaussian_nll(x, dist.mu, dist.d_diag, dist.v)
    return -nll.data
