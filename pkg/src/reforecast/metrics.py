"""Quality metrics: pairwise distances, MiVo, energy score, variogram score.

MiVo runs on raw update sequences: the mean of each real sequence's distance
to its nearest generated partner (fidelity/coverage) plus the variance of
each generated sequence's distance to its nearest real partner (a diversity
penalty under mode collapse). Energy and variogram scores run on rebuilt
scenario trajectories against the observation series.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .data.trajectory import HOUR
from .errors import (
    EmptyMatrix,
    InvalidConfig,
    ShapeMismatch,
    SingleArea,
    TooFewScenarios,
)


def distance_matrix(real, gen):
    """Euclidean distances between flattened sequences, shape (n_real, n_gen)."""
    if (real.m_prime, real.n_areas) != (gen.m_prime, gen.n_areas):
        raise ShapeMismatch(
            f"sequence shapes differ: {(real.m_prime, real.n_areas)} vs "
            f"{(gen.m_prime, gen.n_areas)}"
        )
    return cdist(real.flatten(), gen.flatten(), metric="euclidean")


def mivo(dmat):
    """Mean of row-wise minima plus population variance of column-wise minima.

    Rows index real sequences, columns generated ones. Zero when the two
    multisets coincide.
    """
    dmat = np.asarray(dmat, dtype=np.float64)
    if dmat.size == 0:
        raise EmptyMatrix("distance matrix has no entries")
    d1 = dmat.min(axis=1)
    d2 = dmat.min(axis=0)
    return float(d1.mean() + d2.var())


@dataclass
class ScenarioSet:
    """S rebuilt trajectories sharing one pseudo-observation series."""

    values: np.ndarray          # (S, n, m, d)
    start_time: np.datetime64
    area_ids: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 4:
            raise InvalidConfig(f"scenarios must be (S, n, m, d), got {self.values.shape}")
        self.start_time = np.datetime64(self.start_time, "h")

    @classmethod
    def from_trajectories(cls, trajectories):
        first = trajectories[0]
        return cls(
            values=np.stack([t.values for t in trajectories]),
            start_time=first.start_time,
            area_ids=list(first.area_ids),
        )

    @property
    def n_scenarios(self):
        return self.values.shape[0]


@dataclass
class ScoreResult:
    aggregate: float
    by_month: dict = field(default_factory=dict)
    by_area: dict = field(default_factory=dict)
    monthly_mean: float = float("nan")   # mean of the monthly aggregates


def _months(start_time, offsets):
    stamps = np.datetime64(start_time, "h") + offsets * HOUR
    return stamps.astype("datetime64[M]").astype(str)


def energy_score(scenarios, observations, spread="consecutive"):
    """Multi-horizon energy score of a scenario set against observations.

    For each issue t and area r the score is the mean Euclidean distance
    between the scenario forecast path (horizon steps 1..m-1) and the
    realized path, minus a spread term over scenario pairs. ``spread``
    selects the pairing: "consecutive" couples s with s+1 and divides by
    2(S-1); "allpairs" uses every ordered pair with the unbiased 1/(2S(S-1))
    weight. Aggregate is the mean over issues and areas.
    """
    vals = scenarios.values
    s_count, n, m, d = vals.shape
    if s_count < 2:
        raise TooFewScenarios(f"energy score needs S >= 2 scenarios, got {s_count}")
    obs = observations.values
    n_t = min(n, obs.shape[0] - (m - 1))
    if n_t < 1:
        raise InvalidConfig("observations too short for any full-horizon issue")

    idx = np.arange(n_t)[:, None] + np.arange(1, m)[None, :]
    obs_win = obs[idx]                       # (n_t, m-1, d)
    fc = vals[:, :n_t, 1:, :]                # (S, n_t, m-1, d)
    first = np.sqrt(((fc - obs_win[None]) ** 2).sum(axis=2)).mean(axis=0)  # (n_t, d)

    if spread == "consecutive":
        gaps = np.sqrt(((fc[:-1] - fc[1:]) ** 2).sum(axis=2))  # (S-1, n_t, d)
        second = gaps.sum(axis=0) / (2.0 * (s_count - 1))
    elif spread == "allpairs":
        total = np.zeros((n_t, d))
        for i in range(s_count):
            diff = fc[i][None] - fc
            total += np.sqrt((diff ** 2).sum(axis=2)).sum(axis=0)
        second = total / (2.0 * s_count * (s_count - 1))
    else:
        raise InvalidConfig(f"unknown spread estimator {spread!r}")

    per_issue_area = first - second         # (n_t, d)
    months = _months(scenarios.start_time, np.arange(n_t))
    by_month = {
        mo: float(per_issue_area[months == mo].mean()) for mo in sorted(set(months))
    }
    by_area = {
        area: float(per_issue_area[:, ai].mean())
        for ai, area in enumerate(scenarios.area_ids)
    }
    return ScoreResult(
        aggregate=float(per_issue_area.mean()),
        by_month=by_month,
        by_area=by_area,
        monthly_mean=float(np.mean(list(by_month.values()))),
    )


def variogram_score(scenarios, observations, gamma=1.0, weights=None, k_lags=None):
    """Pairwise-gap scoring rule across areas.

    For each delivery hour T, compares the observed inter-area gap
    |obs_r1 - obs_r2|^gamma with the average scenario gap over the K issues
    that forecast T (lags k = 1..K) and all scenarios, squares the
    difference, and sums over unordered area pairs with the given weights.
    Aggregate is the mean over delivery hours.
    """
    vals = scenarios.values
    s_count, n, m, d = vals.shape
    if d < 2:
        raise SingleArea("variogram score needs at least two areas")
    k_max = k_lags if k_lags is not None else m - 1
    if not 1 <= k_max <= m - 1:
        raise InvalidConfig(f"k_lags must be in [1, {m - 1}]")
    obs = observations.values
    t_lo, t_hi = k_max, min(n - 1 + 1, obs.shape[0] - 1)
    if t_hi < t_lo:
        raise InvalidConfig("no delivery hour has full issue-lag coverage")

    pairs = [(r1, r2) for r1 in range(d) for r2 in range(r1 + 1, d)]
    if weights is None:
        wmat = np.ones((d, d))
    else:
        wmat = np.broadcast_to(np.asarray(weights, dtype=np.float64), (d, d))

    deliveries = np.arange(t_lo, t_hi + 1)
    per_t = np.zeros(deliveries.size)
    for pi, (r1, r2) in enumerate(pairs):
        ogap = np.abs(obs[deliveries, r1] - obs[deliveries, r2]) ** gamma
        sgap = np.zeros(deliveries.size)
        for k in range(1, k_max + 1):
            f1 = vals[:, deliveries - k, k, r1]
            f2 = vals[:, deliveries - k, k, r2]
            sgap += (np.abs(f1 - f2) ** gamma).sum(axis=0)
        sgap /= k_max * s_count
        per_t += wmat[r1, r2] * (ogap - sgap) ** 2

    months = _months(scenarios.start_time, deliveries)
    by_month = {mo: float(per_t[months == mo].mean()) for mo in sorted(set(months))}
    # attribute each pair's contribution to both of its areas
    by_area = {}
    for ai, area in enumerate(scenarios.area_ids):
        acc = np.zeros(deliveries.size)
        cnt = 0
        for r1, r2 in pairs:
            if ai in (r1, r2):
                ogap = np.abs(obs[deliveries, r1] - obs[deliveries, r2]) ** gamma
                sgap = np.zeros(deliveries.size)
                for k in range(1, k_max + 1):
                    sgap += (
                        np.abs(
                            vals[:, deliveries - k, k, r1] - vals[:, deliveries - k, k, r2]
                        )
                        ** gamma
                    ).sum(axis=0)
                sgap /= k_max * s_count
                acc += wmat[r1, r2] * (ogap - sgap) ** 2
                cnt += 1
        by_area[area] = float(acc.mean() / max(cnt, 1))
    return ScoreResult(
        aggregate=float(per_t.mean()),
        by_month=by_month,
        by_area=by_area,
        monthly_mean=float(np.mean(list(by_month.values()))),
    )
