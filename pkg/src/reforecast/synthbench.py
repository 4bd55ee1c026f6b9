"""Known-truth synthetic data generators and the model benchmark harness.

Every generator draws an update process with documented parameters, builds a
smooth bounded observation series, and composes the forecast trajectory by
the same cumulative reconstruction the rest of the package uses, so
extraction is its exact inverse. All emitted values are quantized to a
2^-20 binary grid: on that grid every sum and difference in the
extract/rebuild cycle is exact in float64, which turns the round-trip
identity into a bit-for-bit property instead of a tolerance.

Update processes satisfy the two working hypotheses by construction:
independent across publication hours, positively correlated across horizon
steps through a common per-publication factor. A configurable share of
publications ("weather" hours) carries boosted magnitudes; the rest decay
exponentially along the horizon.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .argen import DgpvarModel, ModelConfig
from .data.trajectory import HOUR, PseudoObservations
from .data.updates import UpdateSeries
from .errors import InvalidConfig
from .reconstruct import RebuildConfig, rebuild_trajectory
from .training import TrainConfig

GRID = 2.0 ** 20          # quantization grid for exact float arithmetic
PROCESS_KINDS = ("iid-gaussian-factor", "dgpvar-ground-truth", "comonotone",
                 "heteroscedastic")


def quantize(values):
    return np.round(np.asarray(values, dtype=np.float64) * GRID) / GRID


@dataclass
class SyntheticProcessConfig:
    kind: str = "iid-gaussian-factor"
    n: int = 500              # trajectory issues
    m: int = 12               # horizon steps per issue
    d: int = 3                # areas
    seed: int = 0
    noise_scale: float = 1.0  # base update magnitude (MW)
    factor_weight: float = 0.7  # common-factor loading, corr = weight^2
    decay: float = 0.25       # exp horizon decay of informational updates
    weather_period: int = 6   # one boosted publication every this many hours
    weather_boost: float = 4.0
    obs_level: float = 50.0
    obs_amplitude: float = 8.0
    p_max: float = 100.0
    start_time: str = "2021-01-01T00"

    def __post_init__(self):
        if self.kind not in PROCESS_KINDS:
            raise InvalidConfig(f"unknown process kind {self.kind!r}")
        if self.n < 2 or self.m < 3 or self.d < 1:
            raise InvalidConfig("need n >= 2, m >= 3, d >= 1")
        if self.weather_period < 2:
            raise InvalidConfig("weather_period must be >= 2")

    def echo(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SyntheticDataset:
    trajectory: object                # ForecastTrajectory, n issues
    pseudo_obs: PseudoObservations    # covers the full composition window
    updates: UpdateSeries             # truth rows matching extract_updates
    meta: dict
    config: SyntheticProcessConfig
    _sampler: object = field(default=None, repr=False)
    _nll_fn: object = field(default=None, repr=False)

    def sample_updates(self, count, seed):
        """Fresh draws from the true update process (the oracle generator)."""
        return self._sampler(count, seed)

    def true_sequence_nll(self, scores):
        """Generator's own score-space NLL, when the process has one."""
        if self._nll_fn is None:
            return None
        return self._nll_fn(scores)


class _OracleModel:
    """Adapter so the true generator can sit in the benchmark like a model."""

    kind = "oracle"

    def __init__(self, dataset):
        self._dataset = dataset
        self.config_echo = {"process": dataset.config.echo()}

    def sample(self, count, seed):
        return self._dataset.sample_updates(count, seed)


def _weather_mask(count, period):
    mask = np.zeros(count, dtype=bool)
    mask[::period] = True
    return mask


def _make_update_sampler(config):
    """Returns (sampler(count, seed, row_offset) -> (count, m', d) raw values,
    metadata dict, per-sequence score NLL or None)."""
    m_prime = config.m - 2
    d = config.d
    envelope = np.exp(-config.decay * np.arange(m_prime))
    phi = config.factor_weight

    if config.kind == "iid-gaussian-factor":
        def sampler(count, seed, row_offset=0):
            rng = np.random.default_rng(seed)
            factor = rng.standard_normal((count, 1, 1))
            noise = rng.standard_normal((count, m_prime, d))
            mix = phi * factor + math.sqrt(1.0 - phi * phi) * noise
            boost = np.where(
                _weather_mask(count + row_offset, config.weather_period)[row_offset:],
                config.weather_boost, 1.0,
            )
            return config.noise_scale * boost[:, None, None] * envelope[None, :, None] * mix

        meta = {
            "contemporaneous_correlation": phi * phi,
            "horizon_envelope": envelope.tolist(),
            "weather_boost": config.weather_boost,
        }
        return sampler, meta, None

    if config.kind == "comonotone":
        scales = config.noise_scale * envelope[:, None] * (1.0 + 0.5 * np.arange(d))[None, :]

        def sampler(count, seed, row_offset=0):
            rng = np.random.default_rng(seed)
            g = rng.standard_normal((count, 1, 1))
            return g * scales[None, :, :]

        return sampler, {"scales": scales.tolist()}, None

    if config.kind == "heteroscedastic":
        def sampler(count, seed, row_offset=0):
            rng = np.random.default_rng(seed)
            out = np.empty((count, m_prime, d))
            prev = np.zeros((count, d))
            for k in range(m_prime):
                vol = config.noise_scale * envelope[k] * (
                    0.6 + 0.8 * np.abs(prev).mean(axis=1, keepdims=True)
                )
                rho = np.where(np.abs(prev).mean(axis=1, keepdims=True) > 0.5, 0.9, 0.1)
                factor = rng.standard_normal((count, 1))
                noise = rng.standard_normal((count, d))
                step = vol * (np.sqrt(rho) * factor + np.sqrt(1.0 - rho) * noise)
                out[:, k, :] = step
                prev = step / max(config.noise_scale, 1e-12)
            return out

        return sampler, {"state_dependent": True}, None

    # dgpvar-ground-truth: a fixed-weight low-rank Gaussian autoregression
    gen_cfg = ModelConfig(
        hidden=8, rank=1, embed=2, marginal="none",
        train=TrainConfig(epochs=1, seed=config.seed),
    )
    truth = DgpvarModel(
        n_areas=d, m_prime=m_prime, area_ids=[f"area{r}" for r in range(d)],
        config=gen_cfg, seed=config.seed + 7919,
    )
    weight_rng = np.random.default_rng(config.seed + 104729)
    for p in truth.params():
        p.data = np.asarray(weight_rng.normal(0.0, 0.45, size=p.data.shape))

    def sampler(count, seed, row_offset=0):
        return config.noise_scale * truth.sample_scores(count, seed)

    def nll_fn(scores):
        return truth.sequence_nll(np.asarray(scores) / config.noise_scale).data

    meta = {"truth_hidden": 8, "truth_rank": 1, "truth_embed": 2}
    return sampler, meta, nll_fn


def generate_synthetic_trajectory(config):
    """Build (trajectory, pseudo-observations, truth updates, metadata).

    The trajectory spans ``config.n`` issues. Internally the update process
    is drawn for n + m - 3 publications and observations for n + m - 2
    hours, so every horizon cell up to step m-2 of the emitted issues is an
    exact cumulative sum; only the final horizon step is a persistence fill.
    """
    n, m, d = config.n, config.m, config.d
    m_prime = m - 2
    n_pub = n + m - 3           # publications 1 .. n_pub
    n_hours = n + m - 2         # observation hours 0 .. n_hours-1

    sampler, proc_meta, nll_fn = _make_update_sampler(config)
    raw = sampler(n_pub, np.random.SeedSequence((config.seed, 1)), row_offset=0)
    updates_all = quantize(raw)

    obs_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 2)))
    hours = np.arange(n_hours)
    phase = obs_rng.uniform(0.0, 2.0 * np.pi, size=d)
    daily = np.sin(2.0 * np.pi * hours[:, None] / 24.0 + phase[None, :])
    slow = np.sin(2.0 * np.pi * hours[:, None] / 173.0 + phase[None, :] * 1.7)
    wander = obs_rng.normal(0.0, 0.35, size=(n_hours, d)).cumsum(axis=0)
    wander -= hours[:, None] / max(n_hours - 1, 1) * wander[-1]  # pin endpoints
    obs_vals = config.obs_level + config.obs_amplitude * (0.6 * daily + 0.4 * slow)
    obs_vals = obs_vals + np.clip(wander, -0.2 * config.obs_level, 0.2 * config.obs_level)
    obs_vals = quantize(np.clip(obs_vals, 0.05 * config.p_max, 0.95 * config.p_max))

    pseudo_obs = PseudoObservations(
        values=obs_vals,
        start_time=np.datetime64(config.start_time, "h"),
        area_ids=[f"area{r}" for r in range(d)],
    )
    updates_full = UpdateSeries(
        values=updates_all,
        area_ids=list(pseudo_obs.area_ids),
        horizon_offset=0,
        issue_times=pseudo_obs.start_time + (1 + np.arange(n_pub)) * HOUR,
    )
    built = rebuild_trajectory(
        pseudo_obs, updates_full, RebuildConfig(horizon=m, clip_min=None)
    )
    trajectory = built.trajectory.slice_issues(0, n)
    trajectory.p_max = np.full(d, config.p_max)

    truth_updates = updates_full.slice_rows(0, n - 1)
    meta = {
        "process": proc_meta,
        "config": config.echo(),
        "grid": GRID,
        "clipped_cells": built.clipped_cells,
    }
    dataset = SyntheticDataset(
        trajectory=trajectory,
        pseudo_obs=pseudo_obs,
        updates=truth_updates,
        meta=meta,
        config=config,
        _sampler=lambda count, seed: UpdateSeries(
            values=quantize(sampler(count, seed)),
            area_ids=list(pseudo_obs.area_ids),
            horizon_offset=0,
        ),
        _nll_fn=nll_fn,
    )
    return dataset


@dataclass
class BenchmarkRow:
    model: str
    mivo: float
    es: float
    vs: float
    es_by_month: dict
    vs_by_month: dict
    es_by_area: dict
    vs_by_area: dict


@dataclass
class BenchmarkReport:
    rows: list
    config: dict
    seed: int
    scenario_count: int

    def ranking(self, metric):
        return sorted((getattr(r, metric), r.model) for r in self.rows)

    def summary_text(self):
        lines = []
        header = f"{'score':<6}" + "".join(f"{r.model:>12}" for r in self.rows)
        lines.append(header)
        lines.append("-" * len(header))
        for metric in ("es", "vs", "mivo"):
            line = f"{metric.upper():<6}"
            for r in self.rows:
                line += f"{getattr(r, metric):>12.4f}"
            lines.append(line)
        return "\n".join(lines)


def run_benchmark(models, config, scenario_count=10, seed=0,
                  model_config=None, include_oracle=True):
    """Fit each model on the head of a synthetic dataset, evaluate on the
    chronological tail, and score the true generator as an oracle row."""
    from .evaluate import evaluate_model  # local import to avoid a cycle

    dataset = generate_synthetic_trajectory(config)
    traj = dataset.trajectory
    split = max(traj.horizon + 2, int(traj.n_issues * 11 / 12))
    if split >= traj.n_issues - 2:
        split = traj.n_issues * 3 // 4
    train_traj = traj.slice_issues(0, split)
    test_traj = traj.slice_issues(split, traj.n_issues)

    from .data.updates import extract_updates
    from .argen import fit_model

    train_updates = extract_updates(train_traj)
    rows = []
    candidates = list(models)
    for kind in candidates:
        fitted = fit_model(kind, train_updates, model_config)
        report = evaluate_model(
            fitted, test_traj, scenario_count=scenario_count, seed=seed
        )
        rows.append(BenchmarkRow(
            model=kind,
            mivo=report.mivo,
            es=report.es_aggregate,
            vs=report.vs_aggregate,
            es_by_month=report.es_by_month,
            vs_by_month=report.vs_by_month,
            es_by_area=report.es_by_area,
            vs_by_area=report.vs_by_area,
        ))
    if include_oracle:
        oracle = _OracleModel(dataset)
        report = evaluate_model(
            oracle, test_traj, scenario_count=scenario_count, seed=seed
        )
        rows.append(BenchmarkRow(
            model="oracle", mivo=report.mivo, es=report.es_aggregate,
            vs=report.vs_aggregate, es_by_month=report.es_by_month,
            vs_by_month=report.vs_by_month, es_by_area=report.es_by_area,
            vs_by_area=report.vs_by_area,
        ))
    return BenchmarkReport(
        rows=rows, config=config.echo(), seed=seed, scenario_count=scenario_count
    )
