"""Marginal and normalization transforms between data space and score space."""

import numpy as np
from scipy.special import ndtri

from ..errors import UnfittedTransform


class MarginalTransform:
    """Per-coordinate empirical-CDF transform to standard-normal scores.

    Raw CDF values 0 and 1 are clamped to 1/(N+1) and N/(N+1) so the normal
    quantile stays finite; the inverse is the left-continuous generalized
    inverse (smallest sample point whose CDF reaches the target), which maps
    training points back onto themselves exactly.
    """

    def __init__(self, samples=None):
        # samples: (n_coords, n), each row sorted ascending
        self.samples = None
        self._score_steps = None
        if samples is not None:
            self.samples = np.sort(np.asarray(samples, dtype=np.float64), axis=1)
            self._score_steps = self._build_score_steps()

    def _build_score_steps(self):
        # score of rank c: the exact value to_normal assigns to a training
        # point whose CDF count is c; inverting by searchsorted against
        # these makes from_normal(to_normal(x)) bitwise exact on the sample
        n = self.samples.shape[1]
        lo, hi = 1.0 / (n + 1.0), n / (n + 1.0)
        ranks = np.clip(np.arange(1, n + 1) / n, lo, hi)
        return np.broadcast_to(ndtri(ranks), self.samples.shape).copy()

    @classmethod
    def fit(cls, data):
        """data: (n, n_coords) training matrix, one empirical CDF per column."""
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] == 0:
            raise UnfittedTransform("need a non-empty (n, coords) training matrix")
        return cls(data.T)

    def _require_fit(self, coordinate=None):
        if self.samples is None:
            raise UnfittedTransform("transform has not been fitted")
        if coordinate is not None and not (0 <= coordinate < self.samples.shape[0]):
            raise UnfittedTransform(f"coordinate {coordinate} not fitted")

    @property
    def n_coords(self):
        self._require_fit()
        return self.samples.shape[0]

    @property
    def clamp_bounds(self):
        self._require_fit()
        n = self.samples.shape[1]
        return 1.0 / (n + 1.0), n / (n + 1.0)

    def cdf(self, coordinate, v):
        """Clamped empirical CDF of one coordinate, elementwise on v."""
        self._require_fit(coordinate)
        row = self.samples[coordinate]
        lo, hi = self.clamp_bounds
        raw = np.searchsorted(row, v, side="right") / row.size
        return np.clip(raw, lo, hi)

    def quantile(self, coordinate, u):
        """Smallest training sample whose CDF is >= u (u already clamped)."""
        self._require_fit(coordinate)
        row = self.samples[coordinate]
        n = row.size
        idx = np.ceil(np.asarray(u) * n).astype(int) - 1
        return row[np.clip(idx, 0, n - 1)]

    def to_normal(self, data):
        """Map (n, n_coords) data to standard-normal scores, column by column."""
        self._require_fit()
        data = np.asarray(data, dtype=np.float64)
        out = np.empty_like(data)
        for j in range(self.samples.shape[0]):
            out[:, j] = ndtri(self.cdf(j, data[:, j]))
        return out

    def from_normal(self, scores):
        """Inverse of ``to_normal``; lands exactly on training sample points.

        Works on the score scale: the smallest sample whose fitted score
        reaches the input (the generalized inverse, composed with the normal
        quantile map).
        """
        self._require_fit()
        scores = np.asarray(scores, dtype=np.float64)
        n = self.samples.shape[1]
        out = np.empty_like(scores)
        for j in range(self.samples.shape[0]):
            idx = np.searchsorted(self._score_steps[j], scores[:, j], side="left")
            out[:, j] = self.samples[j][np.clip(idx, 0, n - 1)]
        return out

    def quantile_matrix(self, u):
        """Columnwise generalized inverse of a (n, n_coords) uniform matrix."""
        self._require_fit()
        u = np.asarray(u, dtype=np.float64)
        out = np.empty_like(u)
        for j in range(self.samples.shape[0]):
            out[:, j] = self.quantile(j, u[:, j])
        return out

    def to_arrays(self, prefix=""):
        self._require_fit()
        return {prefix + "samples": self.samples}

    @classmethod
    def from_arrays(cls, arrays, prefix=""):
        return cls(arrays[prefix + "samples"])


class AreaScaler:
    """Per-area affine map to zero mean, unit variance of the updates.

    Keeps each area's amplitude information out of the model inputs and puts
    it back after sampling. A constant area gets scale 1 so the inverse stays
    well defined.
    """

    def __init__(self, mean, scale):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    @classmethod
    def fit(cls, values):
        """values: (..., d); statistics pooled over all leading axes."""
        values = np.asarray(values, dtype=np.float64)
        flat = values.reshape(-1, values.shape[-1])
        mean = flat.mean(axis=0)
        scale = flat.std(axis=0)
        scale = np.where(scale > 0.0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, values):
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.scale

    def inverse(self, values):
        return np.asarray(values, dtype=np.float64) * self.scale + self.mean

    def to_arrays(self, prefix=""):
        return {prefix + "mean": self.mean, prefix + "scale": self.scale}

    @classmethod
    def from_arrays(cls, arrays, prefix=""):
        return cls(arrays[prefix + "mean"], arrays[prefix + "scale"])
