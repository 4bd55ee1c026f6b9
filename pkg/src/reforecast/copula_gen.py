"""Gaussian-copula baseline over flattened update sequences.

Couples the empirical marginals of every (horizon step, area) coordinate
through the correlation matrix of their normal scores. Sampling draws
correlated Gaussian noise and pushes it back through the per-coordinate
inverse empirical CDFs, so generated values always land on training sample
points and the marginals are preserved by construction.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .data.transforms import MarginalTransform
from .data.updates import UpdateSeries
from .errors import SingularCorrelation

DEFAULT_SHRINKAGE = 0.05


@dataclass
class CopulaModel:
    correlation: np.ndarray      # (N, N), N = m' * d, unit diagonal
    cholesky: np.ndarray         # lower triangular factor of `correlation`
    marginals: MarginalTransform  # one empirical CDF per flattened coordinate
    shrinkage: float
    m_prime: int
    area_ids: list

    kind = "copula"

    @property
    def n_coords(self):
        return self.correlation.shape[0]

    def sample(self, count, seed):
        return sample_copula(self, count, seed)

    def to_arrays(self):
        meta = {
            "shrinkage": float(self.shrinkage),
            "m_prime": int(self.m_prime),
            "area_ids": list(self.area_ids),
        }
        arrays = {"correlation": self.correlation, "cholesky": self.cholesky}
        arrays.update(self.marginals.to_arrays("marginal_"))
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta, arrays):
        return cls(
            correlation=arrays["correlation"],
            cholesky=arrays["cholesky"],
            marginals=MarginalTransform.from_arrays(arrays, "marginal_"),
            shrinkage=meta["shrinkage"],
            m_prime=meta["m_prime"],
            area_ids=list(meta["area_ids"]),
        )


def fit_gaussian_copula(updates, shrinkage=DEFAULT_SHRINKAGE):
    """Fit marginals and the shrunk normal-score correlation matrix.

    Correlation = (1 - shrinkage) * empirical + shrinkage * identity; the
    shrinkage floor keeps the matrix positive definite when the flattened
    dimension exceeds the sample count (a warning flags that regime).
    Coordinates with zero variance correlate with nothing. The marginals are
    fitted on raw values: the empirical CDF only sees ranks, so per-area
    scaling would be a no-op here, and skipping it keeps generated values
    exactly on training sample points.
    """
    flat = updates.values.reshape(updates.n_sequences, -1)
    n_rows, n_coords = flat.shape
    if n_rows <= n_coords:
        warnings.warn(
            f"{n_rows} sequences for {n_coords} flattened coordinates; "
            "correlation estimate relies on shrinkage",
            stacklevel=2,
        )
    marginals = MarginalTransform.fit(flat)
    scores = marginals.to_normal(flat)
    sd = scores.std(axis=0)
    ok = sd > 0.0
    centered = scores - scores.mean(axis=0)
    cov = centered.T @ centered / n_rows
    corr = np.eye(n_coords)
    denom = np.outer(sd, sd)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(denom > 0.0, cov / denom, 0.0)
    corr[np.ix_(ok, ok)] = raw[np.ix_(ok, ok)]
    np.fill_diagonal(corr, 1.0)
    corr = (1.0 - shrinkage) * corr + shrinkage * np.eye(n_coords)
    np.fill_diagonal(corr, 1.0)
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        raise SingularCorrelation(
            f"correlation not positive definite at shrinkage {shrinkage}"
        )
    return CopulaModel(
        correlation=corr,
        cholesky=chol,
        marginals=marginals,
        shrinkage=shrinkage,
        m_prime=updates.m_prime,
        area_ids=list(updates.area_ids),
    )


def sample_copula(model, count, seed):
    """Draw `count` update sequences; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((count, model.n_coords))
    scores = noise @ model.cholesky.T
    flat = model.marginals.from_normal(scores)
    values = flat.reshape(count, model.m_prime, len(model.area_ids))
    return UpdateSeries(values=values, area_ids=list(model.area_ids), horizon_offset=0)
