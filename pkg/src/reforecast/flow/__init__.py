"""Normalizing flows: density estimation by invertible maps to Gaussian noise."""

import numpy as np

from ..autodiff import neg, tmean
from ..training import TrainConfig, fit_loop
from .layers import AffineCouplingLayer, MaskedAutoregressiveLayer, made_masks
from .stack import FlowStack


def flow_forward(stack, x, h=None):
    return stack.forward(x, h)


def flow_inverse(stack, z, h=None):
    return stack.inverse(z, h)


def flow_logprob(stack, x, h=None):
    return stack.log_prob(x, h)


def flow_fit(stack, data, config=None, cond=None):
    """Fit the stack by maximum likelihood on (n, dim) rows.

    Chronological 90/10 train/validation split, Adam, early stopping on
    validation NLL; parameters end at the best-validation epoch. Returns the
    loss history.
    """
    config = config or TrainConfig()
    data = np.asarray(data, dtype=np.float64)

    def batch_loss(rows, drop_rng):
        h = None if cond is None else cond[rows]
        return neg(tmean(stack.log_prob(data[rows], h=h, drop_rng=drop_rng)))

    return fit_loop(stack.params(), batch_loss, data.shape[0], config)


__all__ = [
    "AffineCouplingLayer", "FlowStack", "MaskedAutoregressiveLayer",
    "flow_fit", "flow_forward", "flow_inverse", "flow_logprob", "made_masks",
]
