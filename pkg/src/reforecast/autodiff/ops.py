"""Fused differentiable primitives used by the sequence models.

Both ops record a single tape node with a hand-derived backward pass:
``lstm_cell`` because it is the training hot loop (the elementwise half is
delegated to the kernel backend), ``lowrank_gaussian_nll`` because the
low-rank algebra needs matrix identities rather than elementwise chain rules.
"""

import numpy as np

from .. import _kernels as kernels
from ..errors import NonPositiveDiagonal, ShapeMismatch
from .tensor import Tensor, active_tape, as_tensor, mul

LOG_2PI = float(np.log(2.0 * np.pi))


def lstm_cell(x, h_prev, c_prev, wx, wh, b):
    """One LSTM step: returns (h, c) for pre-activations x@wx + h_prev@wh + b.

    Gate layout [input | forget | cell | output]; zero weights give h = c = 0.
    """
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    if x.data.shape[1] != wx.data.shape[0] or h_prev.data.shape[1] != wh.data.shape[0]:
        raise ShapeMismatch(
            f"lstm_cell: x {x.data.shape} @ wx {wx.data.shape}, "
            f"h {h_prev.data.shape} @ wh {wh.data.shape}"
        )
    pre = x.data @ wx.data + h_prev.data @ wh.data + b.data
    cpd = np.ascontiguousarray(c_prev.data)
    h_d, c_d, gi, gf, gg, go, tc = kernels.lstm_gates_forward(pre, cpd)
    h_t, c_t = Tensor(h_d), Tensor(c_d)
    parents = (x, h_prev, c_prev, wx, wh, b)
    if any(p.requires_grad for p in parents):
        h_t.requires_grad = True
        c_t.requires_grad = True
        tape = active_tape()
        if tape is not None:
            xd, hd = x.data, h_prev.data
            wxd, whd = wx.data, wh.data

            def vjp(gh, gc):
                dpre, dc_prev = kernels.lstm_gates_backward(
                    np.ascontiguousarray(gh), np.ascontiguousarray(gc),
                    gi, gf, gg, go, tc, cpd,
                )
                return (
                    dpre @ wxd.T,
                    dpre @ whd.T,
                    dc_prev,
                    xd.T @ dpre,
                    hd.T @ dpre,
                    dpre.sum(axis=0),
                )

            tape.record((h_t, c_t), parents, vjp)
    return h_t, c_t


def lowrank_gaussian_nll(x, mu, d_diag, v):
    """Batched -log N(x; mu, diag(d_diag) + v v^T), shape (B,).

    x: (B, d) constant array; mu, d_diag: (B, d); v: (B, d, r). Uses the
    Woodbury identity and the matrix determinant lemma, so the d x d
    covariance is never formed and the cost is O(d r^2) per row.
    """
    mu, d_diag, v = as_tensor(mu), as_tensor(d_diag), as_tensor(v)
    x = np.asarray(x, dtype=np.float64)
    dd = d_diag.data
    if np.any(dd <= 0.0):
        raise NonPositiveDiagonal("covariance diagonal must be strictly positive")
    bsz, dim = dd.shape
    rank = v.data.shape[2]

    y = x - mu.data
    w = v.data / dd[:, :, None]
    kmat = np.eye(rank)[None] + np.einsum("bdr,bds->brs", v.data, w)
    dinv_y = y / dd
    t = np.einsum("bdr,bd->br", w, y)
    kinv = np.linalg.inv(kmat)
    kinv_t = np.einsum("brs,bs->br", kinv, t)
    quad = np.einsum("bd,bd->b", y, dinv_y) - np.einsum("br,br->b", t, kinv_t)
    _, logdet_k = np.linalg.slogdet(kmat)
    logdet = np.log(dd).sum(axis=1) + logdet_k
    nll = 0.5 * (dim * LOG_2PI + logdet + quad)

    out = Tensor(nll)
    parents = (mu, d_diag, v)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape = active_tape()
        if tape is not None:
            vd = v.data

            def vjp(g):
                alpha = dinv_y - np.einsum("bdr,br->bd", w, kinv_t)
                cmat = np.einsum("bdr,brs->bds", w, kinv)  # = Sigma^-1 V
                sdiag = 1.0 / dd - np.einsum("bdr,bdr->bd", cmat, w)
                g1 = g[:, None]
                dmu = -g1 * alpha
                ddd = g1 * 0.5 * (sdiag - alpha * alpha)
                av = np.einsum("bd,bdr->br", alpha, vd)
                dv = g[:, None, None] * (cmat - alpha[:, :, None] * av[:, None, :])
                return dmu, ddd, dv

            tape.record((out,), parents, vjp)
    return out


def dropout(a, p, rng):
    """Inverted dropout with an explicit generator; p = 0 is a no-op."""
    if p <= 0.0:
        return a
    a = as_tensor(a)
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    return mul(a, Tensor(mask))
