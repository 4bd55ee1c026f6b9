"""Statistical checks of the update-process working assumptions.

Two hypotheses drive the whole modeling approach: updates published at
different hours are uncorrelated (new information is unpredictable), while
updates published simultaneously for different horizons are positively
correlated (one piece of news moves the whole forecast path). This module
measures both, classifies issue hours into weather-driven versus purely
informational revisions, and fits the exponential horizon decay of the
informational ones.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateFit, InvalidConfig, TooFewSamples

MIN_SEQUENCES = 30


@dataclass
class DiagnosticsReport:
    lag_autocorrelation: np.ndarray          # entry l-1: corr at publication lag l
    contemporaneous_correlation: np.ndarray  # (m', m'), averaged over areas
    weather_driven: np.ndarray               # bool per update row
    decay_rate: float                        # lambda of |update| ~ A exp(-lambda k)
    weather_count: int = 0
    informational_count: int = 0
    mean_abs_weather: float = float("nan")
    mean_abs_informational: float = float("nan")
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lag_autocorrelation": [float(v) for v in self.lag_autocorrelation],
            "contemporaneous_correlation": [
                [float(v) for v in row] for row in self.contemporaneous_correlation
            ],
            "weather_count": int(self.weather_count),
            "informational_count": int(self.informational_count),
            "decay_rate": float(self.decay_rate),
            "mean_abs_weather": float(self.mean_abs_weather),
            "mean_abs_informational": float(self.mean_abs_informational),
        }


def _safe_corr(a, b):
    """Pearson correlation; NaN instead of a crash on zero variance."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size < 2:
        return float("nan")
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return float("nan")
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def fit_exponential_update_profile(updates, weather_period=6):
    """Split issue hours into weather-driven vs informational updates and fit
    the informational horizon decay.

    The largest ceil(n'/weather_period) rows by mean absolute update are
    tagged weather-driven; |update| ~ A exp(-lambda k) is fitted on the rest
    by least squares on log mean magnitudes per horizon step. Returns
    (lambda, weather_mask).
    """
    if weather_period < 2:
        raise InvalidConfig(f"weather_period must be >= 2, got {weather_period}")
    mags = np.abs(updates.values)
    per_row = mags.mean(axis=(1, 2))
    if np.all(per_row == 0.0):
        raise DegenerateFit("all update magnitudes are zero")
    n = per_row.size
    n_weather = int(np.ceil(n / weather_period))
    order = np.argsort(-per_row, kind="stable")
    weather_mask = np.zeros(n, dtype=bool)
    weather_mask[order[:n_weather]] = True

    info = mags[~weather_mask]
    if info.shape[0] == 0:
        raise DegenerateFit("no informational rows left to fit")
    profile = info.mean(axis=(0, 2))
    ks = np.arange(profile.size)
    ok = profile > 0.0
    if ok.sum() < 2:
        raise DegenerateFit("fewer than two positive horizon magnitudes")
    slope, _ = np.polyfit(ks[ok], np.log(profile[ok]), 1)
    lam = max(0.0, -float(slope))
    return lam, weather_mask


def diagnose_updates(updates, weather_period=6, max_lag=5):
    """Correlation diagnostics plus the weather/informational split.

    Lag-l autocorrelation pairs each update with the one published l hours
    later at the same delivery time. The contemporaneous matrix correlates
    horizon steps within one publication, averaged over areas. Degenerate
    variance shows up as NaN entries, never as an exception.
    """
    vals = updates.values
    n, m, d = vals.shape
    if n < MIN_SEQUENCES:
        raise TooFewSamples(f"need at least {MIN_SEQUENCES} update rows, got {n}")

    if updates.issue_times is not None:
        pub = (updates.issue_times - updates.issue_times[0]) / np.timedelta64(1, "h")
        pub = pub.astype(int)
    else:
        pub = np.arange(n)
    index_of = {p: i for i, p in enumerate(pub)}

    max_lag = min(max_lag, m - 1)
    lag_corr = np.full(max_lag, np.nan)
    for lag in range(1, max_lag + 1):
        earlier, later = [], []
        for i, p in enumerate(pub):
            j = index_of.get(p + lag)
            if j is None:
                continue
            # shared delivery hours: column q of row i meets column q-lag of row j
            earlier.append(vals[i, lag:, :])
            later.append(vals[j, : m - lag, :])
        if earlier:
            lag_corr[lag - 1] = _safe_corr(np.concatenate(earlier), np.concatenate(later))

    contemp = np.full((m, m), np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        per_area = []
        for r in range(d):
            col = vals[:, :, r]
            sd = col.std(axis=0)
            centered = col - col.mean(axis=0)
            cov = centered.T @ centered / n
            with np.errstate(divide="ignore", invalid="ignore"):
                per_area.append(cov / np.outer(sd, sd))
        contemp = np.nanmean(np.stack(per_area), axis=0) if per_area else contemp

    try:
        lam, weather_mask = fit_exponential_update_profile(updates, weather_period)
    except DegenerateFit:
        lam = float("nan")
        weather_mask = np.zeros(n, dtype=bool)

    mags = np.abs(vals)
    w_rows = mags[weather_mask]
    i_rows = mags[~weather_mask]
    return DiagnosticsReport(
        lag_autocorrelation=lag_corr,
        contemporaneous_correlation=contemp,
        weather_driven=weather_mask,
        decay_rate=lam,
        weather_count=int(weather_mask.sum()),
        informational_count=int((~weather_mask).sum()),
        mean_abs_weather=float(w_rows.mean()) if w_rows.size else float("nan"),
        mean_abs_informational=float(i_rows.mean()) if i_rows.size else float("nan"),
    )
