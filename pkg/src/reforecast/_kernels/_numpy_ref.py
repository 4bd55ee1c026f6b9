"""Pure-numpy reference kernels.

Semantics here define the contract; the compiled core in ``_core.pyx`` must
agree with these functions to floating-point noise. Gate layout in the
pre-activation matrix is ``[input | forget | cell | output]``.
"""

import numpy as np
from scipy.special import expit

BACKEND_NAME = "numpy"


def lstm_gates_forward(pre, c_prev):
    """Fused elementwise half of an LSTM cell.

    pre     (B, 4H) gate pre-activations
    c_prev  (B, H) previous cell state

    Returns (h, c, i, f, g, o, tc); the last five are saved for backward.
    """
    hdim = c_prev.shape[1]
    gi = expit(pre[:, :hdim])
    gf = expit(pre[:, hdim:2 * hdim])
    gg = np.tanh(pre[:, 2 * hdim:3 * hdim])
    go = expit(pre[:, 3 * hdim:])
    c = gf * c_prev + gi * gg
    tc = np.tanh(c)
    h = go * tc
    return h, c, gi, gf, gg, go, tc


def lstm_gates_backward(dh, dc_out, gi, gf, gg, go, tc, c_prev):
    """Backward of ``lstm_gates_forward``.

    dh, dc_out are the gradients flowing into h and c. Returns
    (dpre, dc_prev) with dpre laid out like the forward pre-activations.
    """
    bsz, hdim = dh.shape
    dc = dc_out + dh * go * (1.0 - tc * tc)
    dpre = np.empty((bsz, 4 * hdim))
    dpre[:, :hdim] = dc * gg * gi * (1.0 - gi)
    dpre[:, hdim:2 * hdim] = dc * c_prev * gf * (1.0 - gf)
    dpre[:, 2 * hdim:3 * hdim] = dc * gi * (1.0 - gg * gg)
    dpre[:, 3 * hdim:] = dh * tc * go * (1.0 - go)
    dc_prev = dc * gf
    return dpre, dc_prev
