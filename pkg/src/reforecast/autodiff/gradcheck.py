"""Finite-difference verification of tape gradients."""

import numpy as np

from .tensor import Tape, Tensor


def grad_check(f, xs, step=1e-4, sample=None, rng=None):
    """Max relative error between tape gradients of ``f`` and central
    finite differences.

    f takes the tensors in ``xs`` and returns a scalar tensor. Existing
    grads on ``xs`` are cleared. ``sample`` limits the number of coordinates
    probed per tensor (all by default); returns +inf if anything non-finite
    shows up.
    """
    if isinstance(xs, Tensor):
        xs = [xs]
    xs = list(xs)
    for x in xs:
        # 0-d numpy scalars are immutable; re-box so in-place probes stick
        x.data = np.asarray(x.data, dtype=np.float64)
        x.requires_grad = True
        x.grad = None
    with Tape() as tape:
        loss = f(*xs)
        tape.backward(loss)
    grads = [x.grad.copy() if x.grad is not None else np.zeros_like(x.data) for x in xs]

    worst = 0.0
    for x, g in zip(xs, grads):
        flat = x.data.reshape(-1)
        gflat = g.reshape(-1)
        coords = np.arange(flat.size)
        if sample is not None and sample < flat.size:
            picker = rng if rng is not None else np.random.default_rng(0)
            coords = picker.choice(flat.size, size=sample, replace=False)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + step
            fp = float(f(*xs).data)
            flat[idx] = orig - step
            fm = float(f(*xs).data)
            flat[idx] = orig
            numeric = (fp - fm) / (2.0 * step)
            analytic = gflat[idx]
            if not (np.isfinite(numeric) and np.isfinite(analytic)):
                return float("inf")
            err = abs(analytic - numeric) / max(1.0, abs(analytic))
            worst = max(worst, err)
    return worst
