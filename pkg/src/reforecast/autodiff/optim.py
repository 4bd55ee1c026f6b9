"""Adam optimizer: a pure functional step plus a stateful wrapper."""

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update on plain arrays.

    ``state`` is {} on the first call or the dict returned by the previous
    call. Returns (new_params, new_state) without touching the inputs, so
    the update is deterministic and replayable.
    """
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeMismatch(f"param {p.shape} vs grad {g.shape}")
    t = state.get("t", 0) + 1
    ms = state.get("m") or [np.zeros_like(p) for p in params]
    vs = state.get("v") or [np.zeros_like(p) for p in params]
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    out_p, out_m, out_v = [], [], []
    for p, g, m, v in zip(params, grads, ms, vs):
        m_new = beta1 * m + (1.0 - beta1) * g
        v_new = beta2 * v + (1.0 - beta2) * g * g
        step = lr * (m_new / bc1) / (np.sqrt(v_new / bc2) + eps)
        out_p.append(p - step)
        out_m.append(m_new)
        out_v.append(v_new)
    return out_p, {"t": t, "m": out_m, "v": out_v}


class Adam:
    """In-place Adam over a list of parameter tensors."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = {}

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        grads = [
            p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params
        ]
        new_data, self.state = adam_step(
            [p.data for p in self.params], grads, self.state,
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
        )
        for p, d in zip(self.params, new_data):
            p.data = np.asarray(d)

    def snapshot(self):
        return [p.data.copy() for p in self.params]

    def restore(self, snap):
        for p, d in zip(self.params, snap):
            p.data = d.copy()


def clone_params(params):
    return [Tensor(p.data.copy(), requires_grad=True) for p in params]
