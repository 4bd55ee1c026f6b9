"""End-to-end evaluation: self-comparison, determinism, report surface."""

import numpy as np

from reforecast.data import extract_updates
from reforecast.evaluate import evaluate_model, write_report_csv
from reforecast.metrics import distance_matrix, mivo
from reforecast.synthbench import SyntheticProcessConfig, generate_synthetic_trajectory


class _EchoModel:
    """Replays a fixed update series regardless of seed (perfect generator)."""

    kind = "echo"

    def __init__(self, updates):
        self._updates = updates

    def sample(self, count, seed):
        assert count == self._updates.n_sequences
        return self._updates


def _dataset():
    return generate_synthetic_trajectory(
        SyntheticProcessConfig(n=80, m=7, d=2, seed=21)
    )


def test_echo_model_scores_zero_mivo():
    ds = _dataset()
    holdout = ds.trajectory
    echo = _EchoModel(extract_updates(holdout))
    report = evaluate_model(echo, holdout, scenario_count=2, seed=0)
    assert report.mivo == 0.0
    assert mivo(distance_matrix(echo._updates, echo._updates)) == 0.0


def test_report_deterministic_and_complete():
    ds = _dataset()
    holdout = ds.trajectory

    class Oracle:
        kind = "oracle"

        def sample(self, count, seed):
            return ds.sample_updates(count, seed)

    r1 = evaluate_model(Oracle(), holdout, scenario_count=4, seed=9)
    r2 = evaluate_model(Oracle(), holdout, scenario_count=4, seed=9)
    assert r1.mivo == r2.mivo
    assert r1.es_aggregate == r2.es_aggregate
    assert r1.vs_aggregate == r2.vs_aggregate
    assert r1.es_by_month == r2.es_by_month
    assert np.isfinite(r1.vs_aggregate)
    rows = r1.to_rows()
    metrics = {row["metric"] for row in rows}
    assert metrics == {"mivo", "es", "vs"}
    areas = {row["area"] for row in rows}
    assert {"all", "area0", "area1"} <= areas


def test_threads_do_not_change_report(tmp_path):
    ds = _dataset()
    holdout = ds.trajectory

    class Oracle:
        kind = "oracle"

        def sample(self, count, seed):
            return ds.sample_updates(count, seed)

    r1 = evaluate_model(Oracle(), holdout, scenario_count=5, seed=3, threads=1)
    r4 = evaluate_model(Oracle(), holdout, scenario_count=5, seed=3, threads=4)
    p1, p4 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_report_csv([r1], p1)
    write_report_csv([r4], p4)
    assert p1.read_bytes() == p4.read_bytes()
