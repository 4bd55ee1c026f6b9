"""The four generative model families behind one fit/sample interface.

copula  - Gaussian copula over flattened update vectors
nf      - unconditional normalizing flow over flattened, per-area-normalized
          update vectors
dgpvar  - recurrent encoder with a low-rank Gaussian emission, unrolled per
          area with shared weights
rnnnf   - recurrent encoder with a conditional-flow emission over whole steps

The two recurrent models train in score space: per-area normalization, then
(by default) the empirical-CDF map to standard-normal marginals. The constant
marginal Jacobian is left out of the training loss (it cannot move the
argmin), so reported NLLs are score-space numbers. Sampling applies the
inverse transforms, so generated updates live in data space.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ..autodiff import Tensor, broadcast_to, concat, neg, reshape, take, tmean
from ..autodiff import lowrank_gaussian_nll
from ..copula_gen import fit_gaussian_copula
from ..data.transforms import AreaScaler, MarginalTransform
from ..data.updates import UpdateSeries
from ..errors import InvalidConfig
from ..flow import FlowStack, flow_fit
from ..training import TrainConfig, fit_loop
from .emission import LowRankGaussianHead, emission_params
from .encoder import RecurrentEncoder

MODEL_KINDS = ("copula", "nf", "dgpvar", "rnnnf")


@dataclass
class ModelConfig:
    hidden: int = 32          # encoder state width
    rank: int = 0             # low-rank factor columns; 0 = min(d, 5)
    embed: int = 4            # area embedding width for the per-area unroll
    depth: int = 5            # flow depth of the nf baseline
    emission_depth: int = 3   # conditional flow depth of rnnnf
    flow_kind: str = "coupling"
    emission_kind: str = "maf"
    flow_hidden: int = 32
    marginal: str = "ecdf"    # "ecdf" or "none" (data already score-like)
    shrinkage: float = 0.05
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.marginal not in ("ecdf", "none"):
            raise InvalidConfig(f"marginal must be 'ecdf' or 'none', got {self.marginal!r}")

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        train_keys = {f.name for f in TrainConfig.__dataclass_fields__.values()}
        own_keys = {f for f in cls.__dataclass_fields__ if f != "train"}
        train_raw = dict(raw.pop("train", {}))
        for key in list(raw):
            if key in train_keys and key not in own_keys:
                train_raw[key] = raw.pop(key)
        unknown = set(raw) - own_keys
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(train=TrainConfig(**train_raw), **raw)

    def echo(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "train"}
        out["train"] = {k: getattr(self.train, k) for k in self.train.__dataclass_fields__}
        return out


def _score_pipeline(updates, marginal):
    """Normalize per area, then map marginals to standard normal scores."""
    scaler = AreaScaler.fit(updates.values)
    norm = scaler.transform(updates.values)
    if marginal == "ecdf":
        flat = norm.reshape(-1, updates.n_areas)
        marginals = MarginalTransform.fit(flat)
        scores = marginals.to_normal(flat).reshape(norm.shape)
    else:
        marginals = None
        scores = norm
    return scaler, marginals, scores


def _scores_to_updates(scores, scaler, marginals, area_ids):
    count, m_prime, d = scores.shape
    if marginals is not None:
        values = marginals.from_normal(scores.reshape(-1, d)).reshape(scores.shape)
    else:
        values = scores
    values = scaler.inverse(values)
    return UpdateSeries(values=values, area_ids=list(area_ids), horizon_offset=0)


class DgpvarModel:
    """Recurrent encoder + low-rank Gaussian emission, one state per area."""

    kind = "dgpvar"

    def __init__(self, n_areas, m_prime, area_ids, config, seed=0):
        rng = np.random.default_rng(seed)
        self.n_areas = n_areas
        self.m_prime = m_prime
        self.area_ids = list(area_ids)
        self.config = config
        rank = config.rank or min(n_areas, 5)
        if not 1 <= rank <= n_areas:
            raise InvalidConfig(f"rank must be in [1, {n_areas}], got {rank}")
        self.rank = rank
        self.encoder = RecurrentEncoder(1 + config.embed, config.hidden, rng)
        self.embedding = Tensor(
            rng.normal(0.0, 0.3, size=(n_areas, config.embed)), requires_grad=True
        ) if config.embed else None
        self.z0 = Tensor(np.zeros(1), requires_grad=True)
        self.head = LowRankGaussianHead(config.hidden, rank, rng)
        self.scaler = AreaScaler(np.zeros(n_areas), np.ones(n_areas))
        self.marginals = None
        self.history = None

    def params(self):
        out = self.encoder.params() + self.head.params() + [self.z0]
        if self.embedding is not None:
            out.append(self.embedding)
        return out

    def _first_input(self, rows, tile):
        start = broadcast_to(reshape(self.z0, (1, 1)), (rows, 1))
        if self.embedding is None:
            return start, None
        emb = take(self.embedding, tile)
        return concat([start, emb], axis=1), emb

    def sequence_nll(self, z, drop_rng=None):
        """Score-space NLL per sequence, shape (B,). z: (B, m', d) array."""
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 2:
            z = z[None]
        bsz, m_prime, d = z.shape
        rows = bsz * d
        tile = np.tile(np.arange(d), bsz)
        x, emb = self._first_input(rows, tile)
        h, c = self.encoder.initial_state(rows)
        total = None
        for i in range(m_prime):
            h, c = self.encoder.step(x, h, c)
            mu, dd, v = self.head(reshape(h, (bsz, d, self.config.hidden)))
            nll_i = lowrank_gaussian_nll(z[:, i, :], mu, dd, v)
            total = nll_i if total is None else total + nll_i
            if i + 1 < m_prime:
                nxt = Tensor(z[:, i, :].reshape(rows, 1))
                x = concat([nxt, emb], axis=1) if emb is not None else nxt
        return total

    def sample_scores(self, count, seed):
        """Ancestral sampling in score space: draw each step from its
        emission (mu + sqrt(D) * eps + V @ eps_r), then advance the state
        with the sampled value."""
        rng = np.random.default_rng(seed)
        rows = count * self.n_areas
        tile = np.tile(np.arange(self.n_areas), count)
        x, emb = self._first_input(rows, tile)
        h, c = self.encoder.initial_state(rows)
        out = np.empty((count, self.m_prime, self.n_areas))
        for i in range(self.m_prime):
            h, c = self.encoder.step(x, h, c)
            dist = emission_params(
                self.head, reshape(h, (count, self.n_areas, self.config.hidden))
            )
            eps_d = rng.standard_normal((count, self.n_areas))
            eps_r = rng.standard_normal((count, self.rank))
            z = dist.mu + np.sqrt(dist.d_diag) * eps_d + np.einsum(
                "bdr,br->bd", dist.v, eps_r
            )
            out[:, i, :] = z
            if i + 1 < self.m_prime:
                nxt = Tensor(z.reshape(rows, 1))
                x = concat([nxt, emb], axis=1) if emb is not None else nxt
        return out

    def sample(self, count, seed):
        scores = self.sample_scores(count, seed)
        return _scores_to_updates(scores, self.scaler, self.marginals, self.area_ids)

    def to_arrays(self):
        meta = {
            "m_prime": int(self.m_prime),
            "area_ids": list(self.area_ids),
            "config": self.config.echo(),
            "has_marginals": self.marginals is not None,
        }
        arrays = {"z0": self.z0.data}
        arrays.update(self.encoder.to_arrays("enc_"))
        arrays.update(self.head.to_arrays("head_"))
        arrays.update(self.scaler.to_arrays("scaler_"))
        if self.embedding is not None:
            arrays["embedding"] = self.embedding.data
        if self.marginals is not None:
            arrays.update(self.marginals.to_arrays("marginal_"))
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta, arrays):
        config = ModelConfig.from_dict(meta["config"])
        model = cls(
            n_areas=len(meta["area_ids"]),
            m_prime=meta["m_prime"],
            area_ids=meta["area_ids"],
            config=config,
        )
        model.z0 = Tensor(arrays["z0"].copy(), requires_grad=True)
        model.encoder = RecurrentEncoder.from_arrays(arrays, "enc_")
        model.head = LowRankGaussianHead.from_arrays(arrays, "head_")
        model.scaler = AreaScaler.from_arrays(arrays, "scaler_")
        if "embedding" in arrays:
            model.embedding = Tensor(arrays["embedding"].copy(), requires_grad=True)
        if meta["has_marginals"]:
            model.marginals = MarginalTransform.from_arrays(arrays, "marginal_")
        return model


class RnnNfModel:
    """Recurrent encoder + conditional normalizing-flow emission."""

    kind = "rnnnf"

    def __init__(self, n_areas, m_prime, area_ids, config, seed=0):
        rng = np.random.default_rng(seed)
        self.n_areas = n_areas
        self.m_prime = m_prime
        self.area_ids = list(area_ids)
        self.config = config
        self.encoder = RecurrentEncoder(n_areas, config.hidden, rng)
        self.z0 = Tensor(np.zeros(n_areas), requires_grad=True)
        self.flow = FlowStack.build(
            n_areas,
            cond_dim=config.hidden,
            depth=config.emission_depth,
            kind=config.emission_kind,
            hidden=config.flow_hidden,
            seed=int(rng.integers(2 ** 31)),
            dropout=config.train.dropout,
        )
        self.scaler = AreaScaler(np.zeros(n_areas), np.ones(n_areas))
        self.marginals = None
        self.history = None

    def params(self):
        return self.encoder.params() + self.flow.params() + [self.z0]

    def sequence_nll(self, z, drop_rng=None):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 2:
            z = z[None]
        bsz, m_prime, _ = z.shape
        x = broadcast_to(reshape(self.z0, (1, self.n_areas)), (bsz, self.n_areas))
        h, c = self.encoder.initial_state(bsz)
        total = None
        for i in range(m_prime):
            h, c = self.encoder.step(x, h, c)
            lp = self.flow.log_prob(z[:, i, :], h=h, drop_rng=drop_rng)
            nll_i = neg(lp)
            total = nll_i if total is None else total + nll_i
            if i + 1 < m_prime:
                x = Tensor(z[:, i, :])
        return total

    def sample_scores(self, count, seed):
        rng = np.random.default_rng(seed)
        x = broadcast_to(reshape(self.z0, (1, self.n_areas)), (count, self.n_areas))
        h, c = self.encoder.initial_state(count)
        out = np.empty((count, self.m_prime, self.n_areas))
        for i in range(self.m_prime):
            h, c = self.encoder.step(x, h, c)
            eps = rng.standard_normal((count, self.n_areas))
            z = self.flow.inverse(eps, h=h.data)
            out[:, i, :] = z
            if i + 1 < self.m_prime:
                x = Tensor(z)
        return out

    def sample(self, count, seed):
        scores = self.sample_scores(count, seed)
        return _scores_to_updates(scores, self.scaler, self.marginals, self.area_ids)

    def to_arrays(self):
        meta = {
            "m_prime": int(self.m_prime),
            "area_ids": list(self.area_ids),
            "config": self.config.echo(),
            "has_marginals": self.marginals is not None,
            "flow": self.flow.describe(),
        }
        arrays = {"z0": self.z0.data}
        arrays.update(self.encoder.to_arrays("enc_"))
        arrays.update(self.flow.to_arrays("flow_"))
        arrays.update(self.scaler.to_arrays("scaler_"))
        if self.marginals is not None:
            arrays.update(self.marginals.to_arrays("marginal_"))
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta, arrays):
        config = ModelConfig.from_dict(meta["config"])
        model = cls(
            n_areas=len(meta["area_ids"]),
            m_prime=meta["m_prime"],
            area_ids=meta["area_ids"],
            config=config,
        )
        model.z0 = Tensor(arrays["z0"].copy(), requires_grad=True)
        model.encoder = RecurrentEncoder.from_arrays(arrays, "enc_")
        model.flow = FlowStack.from_arrays(meta["flow"], arrays, "flow_")
        model.scaler = AreaScaler.from_arrays(arrays, "scaler_")
        if meta["has_marginals"]:
            model.marginals = MarginalTransform.from_arrays(arrays, "marginal_")
        return model


class FlowModel:
    """Unconditional flow over flattened update vectors (areas concatenated
    along the feature axis, each normalized individually)."""

    kind = "nf"

    def __init__(self, n_areas, m_prime, area_ids, config, seed=0):
        self.n_areas = n_areas
        self.m_prime = m_prime
        self.area_ids = list(area_ids)
        self.config = config
        self.stack = FlowStack.build(
            m_prime * n_areas,
            depth=config.depth,
            kind=config.flow_kind,
            hidden=config.flow_hidden,
            seed=config.train.seed,
            dropout=config.train.dropout,
        )
        self.scaler = AreaScaler(np.zeros(n_areas), np.ones(n_areas))
        self.history = None

    def params(self):
        return self.stack.params()

    def sample(self, count, seed):
        flat = self.stack.sample(count, seed)
        values = self.scaler.inverse(flat.reshape(count, self.m_prime, self.n_areas))
        return UpdateSeries(values=values, area_ids=list(self.area_ids), horizon_offset=0)

    def to_arrays(self):
        meta = {
            "m_prime": int(self.m_prime),
            "area_ids": list(self.area_ids),
            "config": self.config.echo(),
            "flow": self.stack.describe(),
        }
        arrays = dict(self.stack.to_arrays("flow_"))
        arrays.update(self.scaler.to_arrays("scaler_"))
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta, arrays):
        config = ModelConfig.from_dict(meta["config"])
        model = cls(
            n_areas=len(meta["area_ids"]),
            m_prime=meta["m_prime"],
            area_ids=meta["area_ids"],
            config=config,
        )
        model.stack = FlowStack.from_arrays(meta["flow"], arrays, "flow_")
        model.scaler = AreaScaler.from_arrays(arrays, "scaler_")
        return model


def _fit_recurrent(model_class, updates, config):
    scaler, marginals, scores = _score_pipeline(updates, config.marginal)

    def build(cfg):
        model = model_class(
            n_areas=updates.n_areas,
            m_prime=updates.m_prime,
            area_ids=updates.area_ids,
            config=cfg,
            seed=cfg.train.seed,
        )
        model.scaler = scaler
        model.marginals = marginals
        return model

    def run(cfg):
        model = build(cfg)

        def batch_loss(rows, drop_rng):
            return tmean(model.sequence_nll(scores[rows], drop_rng=drop_rng))

        history = fit_loop(model.params(), batch_loss, scores.shape[0], cfg.train)
        model.history = history
        return model

    model = run(config)
    if model.history.best_epoch < 1 and config.train.epochs >= 10:
        # validation never improved: retry once with a smaller model and
        # a gentler learning rate
        smaller = replace(
            config,
            hidden=max(4, config.hidden // 2),
            flow_hidden=max(4, config.flow_hidden // 2),
            train=config.train.scaled_down(),
        )
        retry = run(smaller)
        if retry.history.best_val < model.history.best_val:
            model = retry
    return model


def fit_dgpvar(updates, config=None):
    return _fit_recurrent(DgpvarModel, updates, config or ModelConfig())


def fit_rnnnf(updates, config=None):
    return _fit_recurrent(RnnNfModel, updates, config or ModelConfig())


def fit_flow_baseline(updates, config=None):
    config = config or ModelConfig()
    model = FlowModel(
        n_areas=updates.n_areas,
        m_prime=updates.m_prime,
        area_ids=updates.area_ids,
        config=config,
        seed=config.train.seed,
    )
    model.scaler = AreaScaler.fit(updates.values)
    flat = model.scaler.transform(updates.values).reshape(updates.n_sequences, -1)
    model.history = flow_fit(model.stack, flat, config.train)
    return model


def fit_model(kind, updates, config=None):
    """Train one model family on an update series; returns the fitted model."""
    if isinstance(config, dict) or config is None:
        config = ModelConfig.from_dict(config)
    if kind == "copula":
        model = fit_gaussian_copula(updates, shrinkage=config.shrinkage)
        model.config_echo = config.echo()
        return model
    if kind == "nf":
        model = fit_flow_baseline(updates, config)
    elif kind == "dgpvar":
        model = fit_dgpvar(updates, config)
    elif kind == "rnnnf":
        model = fit_rnnnf(updates, config)
    else:
        raise InvalidConfig(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")
    model.config_echo = config.echo()
    return model
