"""Data layer: ingestion, extraction, transforms, diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtri
from scipy.stats import kstest

from reforecast.data import (
    ForecastTrajectory,
    MarginalTransform,
    UpdateSeries,
    diagnose_updates,
    extract_updates,
    fit_exponential_update_profile,
    load_observations,
    load_trajectories,
    load_updates_csv,
    write_observations_csv,
    write_trajectory_csv,
    write_updates_csv,
)
from reforecast.data.transforms import AreaScaler
from reforecast.errors import (
    DegenerateFit,
    EmptyFile,
    InconsistentHorizonCount,
    MissingColumn,
    NonNumericCell,
    TooFewSamples,
    TooFewSequences,
    UnfittedTransform,
)


def _traj(values, areas=None, start="2021-01-01T00"):
    values = np.asarray(values, dtype=np.float64)
    areas = areas or [f"a{r}" for r in range(values.shape[2])]
    return ForecastTrajectory(values=values, start_time=start, area_ids=areas)


# --- CSV ingestion -----------------------------------------------------------

def test_load_trajectories_shape(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "issue_time,area,h0,h1,h2\n"
        "2021-01-01T00,x,1,2,3\n"
        "2021-01-01T01,x,4,5,6\n"
    )
    traj = load_trajectories(path)
    assert traj.values.shape == (2, 3, 1)
    assert traj.area_ids == ["x"]
    assert traj.gap_count == 0


def test_load_trajectories_ragged_row(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "issue_time,area,h0,h1,h2\n"
        "2021-01-01T00,x,1,2,3\n"
        "2021-01-01T01,x,4,5\n"
    )
    with pytest.raises(InconsistentHorizonCount):
        load_trajectories(path)


def test_load_trajectories_empty_file(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("")
    with pytest.raises(EmptyFile):
        load_trajectories(path)
    path.write_text("issue_time,area,h0,h1,h2\n")
    with pytest.raises(EmptyFile):
        load_trajectories(path)


def test_load_trajectories_missing_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("time,area,h0,h1,h2\n2021-01-01T00,x,1,2,3\n")
    with pytest.raises(MissingColumn):
        load_trajectories(path)


def test_load_trajectories_non_numeric(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "issue_time,area,h0,h1,h2\n"
        "2021-01-01T00,x,1,oops,3\n"
        "2021-01-01T01,x,1,2,3\n"
    )
    with pytest.raises(NonNumericCell):
        load_trajectories(path)


def test_trajectory_csv_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    traj = _traj(rng.normal(size=(4, 3, 2)) * 7.3)
    path = tmp_path / "t.csv"
    write_trajectory_csv(traj, path)
    back = load_trajectories(path)
    assert np.array_equal(back.values, traj.values)
    assert np.array_equal(back.issue_times, traj.issue_times)


def test_observations_csv_roundtrip(tmp_path):
    from reforecast.data import PseudoObservations

    rng = np.random.default_rng(1)
    obs = PseudoObservations(
        values=rng.normal(size=(5, 2)), start_time="2021-03-01T00",
        area_ids=["a", "b"],
    )
    path = tmp_path / "o.csv"
    write_observations_csv(obs, path)
    back = load_observations(path)
    assert np.array_equal(back.values, obs.values)


def test_updates_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    upd = UpdateSeries(values=rng.normal(size=(3, 4, 2)), area_ids=["a", "b"])
    path = tmp_path / "u.csv"
    write_updates_csv(upd, path)
    back = load_updates_csv(path)
    assert np.array_equal(back.values, upd.values)


# --- update extraction -------------------------------------------------------

def test_extract_constant_trajectory_zero_updates():
    traj = _traj(np.full((5, 4, 2), 3.25))
    upd = extract_updates(traj)
    assert upd.values.shape == (4, 2, 2)
    np.testing.assert_array_equal(upd.values, 0.0)


def test_extract_hand_oracle():
    # two issues, horizon 4: shared deliveries excluding boundary points give
    # updates [P(1,T=1)-P(0,T=1), P(1,T=2)-P(0,T=2)] = [2-2, 3-3]
    traj = _traj(np.array([[1, 2, 3, 4], [2, 3, 5, 7]], dtype=float).reshape(2, 4, 1))
    upd = extract_updates(traj)
    np.testing.assert_array_equal(upd.values[:, :, 0], [[0.0, 0.0]])


def test_extract_shape_arithmetic():
    rng = np.random.default_rng(0)
    upd = extract_updates(_traj(rng.normal(size=(3, 3, 2))))
    assert upd.values.shape == (2, 1, 2)
    assert upd.m_prime == 1


def test_extract_too_few_sequences():
    traj = _traj(np.zeros((2, 3, 1)))
    traj.values = traj.values[:1]
    traj.issue_times = traj.issue_times[:1]
    with pytest.raises(TooFewSequences):
        extract_updates(traj)


def test_extract_drops_gap_spanning_pairs():
    rng = np.random.default_rng(4)
    values = rng.normal(size=(5, 4, 1))
    times = np.array(
        ["2021-01-01T00", "2021-01-01T01", "2021-01-01T03",
         "2021-01-01T04", "2021-01-01T05"], dtype="datetime64[h]",
    )
    traj = ForecastTrajectory(values=values, start_time=times[0],
                              area_ids=["a"], issue_times=times)
    upd = extract_updates(traj)
    # pair (1 -> 3) straddles the missing hour 2 and is dropped
    assert upd.n_sequences == 3
    assert list(upd.issue_times.astype(str)) == [
        "2021-01-01T01", "2021-01-01T04", "2021-01-01T05"]


def test_telescoping_identity():
    rng = np.random.default_rng(7)
    values = rng.normal(size=(8, 5, 2)) + 40
    traj = _traj(values)
    upd = extract_updates(traj).values
    # summing updates for one delivery hour from issue t+1 through T
    # telescopes to P(T, horizon 0) - P(t, T - t)
    for t, delivery in [(0, 3), (2, 4), (4, 6)]:
        total = sum(upd[s - 1, delivery - s, :] for s in range(t + 1, delivery + 1))
        expected = values[delivery, 0, :] - values[t, delivery - t, :]
        np.testing.assert_allclose(total, expected, atol=1e-12)


# --- marginal transform ------------------------------------------------------

def test_empirical_cdf_hand_values():
    tr = MarginalTransform.fit(np.array([[1.0], [2.0], [3.0]]))
    assert tr.cdf(0, 2.0) == pytest.approx(2.0 / 3.0)
    lo, hi = tr.clamp_bounds
    assert tr.cdf(0, 0.0) == pytest.approx(lo)  # raw 0 clamped to 1/(N+1)
    single = MarginalTransform.fit(np.array([[5.0]]))
    assert single.cdf(0, 10.0) == pytest.approx(0.5)  # raw 1 clamped to N/(N+1)


def test_unfitted_transform_raises():
    tr = MarginalTransform()
    with pytest.raises(UnfittedTransform):
        tr.cdf(0, 1.0)
    fit = MarginalTransform.fit(np.zeros((3, 1)))
    with pytest.raises(UnfittedTransform):
        fit.cdf(5, 1.0)


def test_normal_scores_symmetric_sample():
    # middle point of {-a, 0, a} maps to quantile(2/3) = 0.4307...
    tr = MarginalTransform.fit(np.array([[-2.0], [0.0], [2.0]]))
    score = tr.to_normal(np.array([[0.0]]))[0, 0]
    assert score == pytest.approx(0.4307, abs=1e-3)
    assert score == pytest.approx(ndtri(2.0 / 3.0), abs=1e-12)


def test_normal_scores_roundtrip_on_training_points():
    rng = np.random.default_rng(3)
    data = rng.normal(size=(40, 3)) * [1.0, 5.0, 0.2]
    tr = MarginalTransform.fit(data)
    back = tr.from_normal(tr.to_normal(data))
    assert np.array_equal(back, data)


@pytest.mark.slow
def test_normal_scores_make_marginals_gaussian():
    rng = np.random.default_rng(5)
    data = rng.gamma(2.0, 3.0, size=(10_000, 1))  # skewed source
    tr = MarginalTransform.fit(data)
    scores = tr.to_normal(data)[:, 0]
    stat = kstest(scores, "norm").statistic
    assert stat < 0.02


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=40),
       st.floats(-150, 150), st.floats(-150, 150))
@settings(max_examples=200, deadline=None)
def test_empirical_cdf_monotone_and_clamped(sample, v1, v2):
    tr = MarginalTransform.fit(np.asarray(sample)[:, None])
    lo, hi = tr.clamp_bounds
    c1, c2 = float(tr.cdf(0, v1)), float(tr.cdf(0, v2))
    assert lo <= c1 <= hi and lo <= c2 <= hi
    if v1 <= v2:
        assert c1 <= c2


def test_area_scaler_roundtrip():
    rng = np.random.default_rng(6)
    vals = rng.normal(size=(50, 4, 2)) * [3.0, 0.5] + [10.0, -4.0]
    sc = AreaScaler.fit(vals)
    out = sc.transform(vals)
    assert abs(out.reshape(-1, 2).mean(axis=0)).max() < 1e-12
    np.testing.assert_allclose(out.reshape(-1, 2).std(axis=0), 1.0)
    np.testing.assert_allclose(sc.inverse(out), vals, atol=1e-12)


# --- diagnostics -------------------------------------------------------------

def _iid_updates(n, m, d, seed, factor=0.0):
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal((n, 1, 1))
    noise = rng.standard_normal((n, m, d))
    vals = factor * shared + np.sqrt(1.0 - factor**2) * noise
    return UpdateSeries(values=vals, area_ids=[f"a{r}" for r in range(d)])


def test_diagnose_too_few_samples():
    with pytest.raises(TooFewSamples):
        diagnose_updates(_iid_updates(10, 4, 1, 0))


@pytest.mark.slow
def test_diagnose_independent_updates_low_autocorrelation():
    report = diagnose_updates(_iid_updates(5000, 5, 2, 1))
    assert abs(report.lag_autocorrelation[0]) < 0.05


def test_diagnose_common_factor_contemporaneous_correlation():
    report = diagnose_updates(_iid_updates(2000, 5, 2, 2, factor=0.75))
    off = report.contemporaneous_correlation.copy()
    np.fill_diagonal(off, np.nan)
    assert np.nanmin(off) > 0.3


def test_diagnose_detects_lag_correlation_positive_control():
    # each row copies the previous row's shifted tail, so lag-1 pairs at
    # shared delivery hours are identical and the correlation is 1
    rng = np.random.default_rng(3)
    n, m = 200, 5
    vals = np.empty((n, m, 1))
    vals[0] = rng.standard_normal((m, 1))
    for i in range(1, n):
        vals[i, : m - 1] = vals[i - 1, 1:]
        vals[i, m - 1] = rng.standard_normal(1)
    report = diagnose_updates(UpdateSeries(values=vals, area_ids=["a"]))
    assert report.lag_autocorrelation[0] == pytest.approx(1.0, abs=1e-9)


def test_diagnose_constant_updates_nan_no_crash():
    vals = np.ones((40, 4, 1))
    report = diagnose_updates(UpdateSeries(values=vals, area_ids=["a"]))
    assert np.isnan(report.lag_autocorrelation).all()
    off = report.contemporaneous_correlation
    assert np.isnan(off[0, 1])


def test_exponential_profile_recovers_decay():
    rng = np.random.default_rng(8)
    n, m, d = 600, 8, 2
    k = np.arange(m)
    base = np.exp(-0.5 * k)[None, :, None]
    vals = base * (1.0 + 0.01 * rng.standard_normal((n, m, d)))
    vals[::6] *= 8.0  # weather rows, excluded from the fit
    lam, mask = fit_exponential_update_profile(
        UpdateSeries(values=vals, area_ids=["a", "b"]), weather_period=6
    )
    assert lam == pytest.approx(0.5, abs=0.05)
    assert mask.sum() == int(np.ceil(n / 6))


def test_exponential_profile_all_zero_degenerate():
    with pytest.raises(DegenerateFit):
        fit_exponential_update_profile(
            UpdateSeries(values=np.zeros((30, 4, 1)), area_ids=["a"])
        )


def test_exponential_profile_weather_count_exact():
    rng = np.random.default_rng(9)
    n = 101
    vals = rng.standard_normal((n, 5, 1))
    vals[::6] *= 10.0
    _, mask = fit_exponential_update_profile(
        UpdateSeries(values=vals, area_ids=["a"]), weather_period=6
    )
    assert mask.sum() == int(np.ceil(n / 6))
