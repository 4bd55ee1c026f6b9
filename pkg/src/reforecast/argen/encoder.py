"""Single-layer LSTM encoder for the autoregressive generators."""

import numpy as np

from ..autodiff import Tensor, lstm_cell


class RecurrentEncoder:
    """LSTM over update sequences.

    Two wirings share this class: the low-rank Gaussian model unrolls one
    state per (sequence, area) pair on scalar inputs plus an area embedding
    (weights shared across areas), while the flow-emission model feeds whole
    d-dimensional steps into a single state.
    """

    def __init__(self, input_dim, hidden, rng=None):
        rng = rng or np.random.default_rng(0)
        self.input_dim = input_dim
        self.hidden = hidden
        scale = 1.0 / np.sqrt(max(input_dim + hidden, 1))
        self.wx = Tensor(rng.normal(0.0, scale, size=(input_dim, 4 * hidden)),
                         requires_grad=True)
        self.wh = Tensor(rng.normal(0.0, scale, size=(hidden, 4 * hidden)),
                         requires_grad=True)
        self.b = Tensor(np.zeros(4 * hidden), requires_grad=True)

    def params(self):
        return [self.wx, self.wh, self.b]

    def initial_state(self, rows):
        zeros = np.zeros((rows, self.hidden))
        return Tensor(zeros), Tensor(zeros.copy())

    def step(self, x, h, c):
        return lstm_cell(x, h, c, self.wx, self.wh, self.b)

    def to_arrays(self, prefix=""):
        return {prefix + "wx": self.wx.data, prefix + "wh": self.wh.data,
                prefix + "b": self.b.data}

    @classmethod
    def from_arrays(cls, arrays, prefix=""):
        wx = arrays[prefix + "wx"]
        enc = cls(wx.shape[0], wx.shape[1] // 4)
        enc.wx = Tensor(wx.copy(), requires_grad=True)
        enc.wh = Tensor(arrays[prefix + "wh"].copy(), requires_grad=True)
        enc.b = Tensor(arrays[prefix + "b"].copy(), requires_grad=True)
        return enc
