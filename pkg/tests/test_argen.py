"""Autoregressive models: emissions, NLL contracts, training, sampling."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from reforecast.argen import (
    DgpvarModel,
    ModelConfig,
    RecurrentEncoder,
    RnnNfModel,
    emission_params,
    fit_model,
    lowrank_gaussian_logprob,
)
from reforecast.argen.emission import LowRankGaussianHead
from reforecast.autodiff import Tensor, grad_check, tmean
from reforecast.data import UpdateSeries
from reforecast.training import TrainConfig

LN2 = float(np.log(2.0))


def _small_config(**kw):
    train = TrainConfig(epochs=kw.pop("epochs", 2), batch_size=16, seed=kw.pop("seed", 0))
    return ModelConfig(hidden=kw.pop("hidden", 6), rank=kw.pop("rank", 1),
                       embed=kw.pop("embed", 2),
                       emission_depth=kw.pop("emission_depth", 2),
                       flow_hidden=kw.pop("flow_hidden", 8), train=train, **kw)


# --- encoder ------------------------------------------------------------------

def test_encoder_zero_weights_zero_state():
    enc = RecurrentEncoder(3, 5)
    for p in enc.params():
        p.data = np.zeros_like(p.data)
    h, c = enc.initial_state(4)
    h, c = enc.step(Tensor(np.ones((4, 3))), h, c)
    np.testing.assert_array_equal(h.data, 0.0)
    np.testing.assert_array_equal(c.data, 0.0)


def test_encoder_unrolled_gradient():
    rng = np.random.default_rng(0)
    enc = RecurrentEncoder(2, 4, rng)
    x = rng.normal(size=(3, 2))

    def f(*ps):
        h, c = enc.initial_state(3)
        for _ in range(5):
            h, c = enc.step(Tensor(x), h, c)
        return tmean(h * h)

    assert grad_check(f, enc.params()) < 1e-4


def test_encoder_deterministic():
    rng = np.random.default_rng(1)
    enc = RecurrentEncoder(2, 4, np.random.default_rng(7))
    x = Tensor(rng.normal(size=(3, 2)))
    h1, c1 = enc.step(x, *enc.initial_state(3))
    h2, c2 = enc.step(x, *enc.initial_state(3))
    assert np.array_equal(h1.data, h2.data)


# --- emission head -------------------------------------------------------------

def test_emission_zero_states():
    head = LowRankGaussianHead(hidden=6, rank=2, rng=np.random.default_rng(2))
    dist = emission_params(head, np.zeros((3, 4, 6)))
    np.testing.assert_array_equal(dist.mu, 0.0)
    np.testing.assert_allclose(dist.d_diag, LN2, atol=1e-15)
    np.testing.assert_array_equal(dist.v, 0.0)


def test_emission_hand_linear_algebra():
    head = LowRankGaussianHead(hidden=2, rank=1)
    head.w_mu = Tensor(np.array([1.0, -1.0]), requires_grad=True)
    head.w_d = Tensor(np.array([0.5, 0.0]), requires_grad=True)
    head.w_v = Tensor(np.array([[2.0], [1.0]]), requires_grad=True)
    states = np.array([[[1.0, 2.0], [3.0, -1.0]]])  # (1, d=2, D=2)
    dist = emission_params(head, states)
    np.testing.assert_allclose(dist.mu[0], [1.0 - 2.0, 3.0 + 1.0])
    np.testing.assert_allclose(
        dist.d_diag[0], np.logaddexp(0, [0.5, 1.5]), atol=1e-15
    )
    np.testing.assert_allclose(dist.v[0, :, 0], [2.0 + 2.0, 6.0 - 1.0])


def test_emission_diag_always_positive():
    rng = np.random.default_rng(3)
    head = LowRankGaussianHead(hidden=5, rank=2, rng=rng)
    dist = emission_params(head, rng.normal(size=(200, 3, 5)) * 10.0)
    assert np.all(dist.d_diag > 0.0)


def test_emission_permutation_equivariance():
    rng = np.random.default_rng(4)
    head = LowRankGaussianHead(hidden=6, rank=2, rng=rng)
    states = rng.normal(size=(2, 4, 6))
    perm = np.array([2, 0, 3, 1])
    baseline = emission_params(head, states)
    permuted = emission_params(head, states[:, perm, :])
    np.testing.assert_allclose(permuted.mu, baseline.mu[:, perm], atol=1e-14)
    np.testing.assert_allclose(permuted.d_diag, baseline.d_diag[:, perm], atol=1e-14)
    np.testing.assert_allclose(permuted.v, baseline.v[:, perm, :], atol=1e-14)


def test_lowrank_logprob_dense_oracle_grid():
    rng = np.random.default_rng(5)
    from reforecast.argen import EmissionDistribution

    for d in range(1, 9):
        for r in range(1, 4):
            dist = EmissionDistribution(
                mu=rng.normal(size=(2, d)),
                d_diag=rng.uniform(0.4, 2.0, size=(2, d)),
                v=rng.normal(size=(2, d, r)),
            )
            x = rng.normal(size=(2, d))
            got = lowrank_gaussian_logprob(x, dist)
            for b in range(2):
                cov = np.diag(dist.d_diag[b]) + dist.v[b] @ dist.v[b].T
                ref = multivariate_normal(mean=dist.mu[b], cov=cov).logpdf(x[b])
                assert got[b] == pytest.approx(ref, abs=1e-8)


# --- sequence NLL ---------------------------------------------------------------

def test_dgpvar_zero_weight_closed_form():
    cfg = _small_config()
    model = DgpvarModel(2, 3, ["a", "b"], cfg, seed=0)
    for p in model.params():
        p.data = np.zeros_like(p.data)
    z = np.random.default_rng(6).normal(size=(4, 3, 2))
    nll = model.sequence_nll(z)
    expected = 0.5 * (
        2 * np.log(2 * np.pi) + 2 * np.log(LN2) + (z ** 2).sum(axis=2) / LN2
    ).sum(axis=1)
    np.testing.assert_allclose(nll.data, expected, atol=1e-12)


def test_dgpvar_single_step_is_base_case():
    cfg = _small_config()
    model = DgpvarModel(2, 1, ["a", "b"], cfg, seed=1)
    z = np.random.default_rng(7).normal(size=(3, 1, 2))
    seq = model.sequence_nll(z).data
    # single step equals the emission logprob at the start state, negated
    from reforecast.autodiff import lowrank_gaussian_nll, reshape

    rows = 3 * 2
    tile = np.tile(np.arange(2), 3)
    x, _ = model._first_input(rows, tile)
    h, c = model.encoder.initial_state(rows)
    h, c = model.encoder.step(x, h, c)
    mu, dd, v = model.head(reshape(h, (3, 2, cfg.hidden)))
    step = lowrank_gaussian_nll(z[:, 0, :], mu, dd, v).data
    np.testing.assert_allclose(seq, step, atol=1e-12)


def test_dgpvar_time_order_sensitivity():
    cfg = _small_config()
    model = DgpvarModel(1, 6, ["a"], cfg, seed=2)
    rng = np.random.default_rng(8)
    for p in model.params():
        p.data = np.asarray(p.data + rng.normal(0, 0.3, size=p.data.shape))
    drift = np.linspace(-1.5, 1.5, 6).reshape(1, 6, 1) + 0.1 * rng.normal(size=(1, 6, 1))
    forward_nll = float(model.sequence_nll(drift).data[0])
    backward_nll = float(model.sequence_nll(drift[:, ::-1, :]).data[0])
    assert forward_nll != pytest.approx(backward_nll, abs=1e-6)


def test_dgpvar_causality():
    cfg = _small_config()
    model = DgpvarModel(2, 5, ["a", "b"], cfg, seed=3)
    rng = np.random.default_rng(9)
    for p in model.params():
        p.data = np.asarray(p.data + rng.normal(0, 0.2, size=p.data.shape))
    z = rng.normal(size=(1, 5, 2))

    def per_step(zz):
        # per-step NLL via differences of partial sums
        totals = [float(model.sequence_nll(zz[:, : i + 1, :]).data[0]) for i in range(5)]
        return np.diff([0.0] + totals)

    base = per_step(z)
    bumped = z.copy()
    bumped[0, 3, :] += 2.0  # change step 3: steps 0..2 must be unchanged
    after = per_step(bumped)
    np.testing.assert_allclose(after[:3], base[:3], atol=1e-10)
    assert abs(after[3] - base[3]) > 1e-3


def test_rnnnf_identity_flow_reduces_to_standard_normal():
    cfg = _small_config()
    model = RnnNfModel(2, 4, ["a", "b"], cfg, seed=4)
    z = np.random.default_rng(10).normal(size=(3, 4, 2))
    nll = model.sequence_nll(z)
    expected = 0.5 * (2 * np.log(2 * np.pi) + (z ** 2).sum(axis=2)).sum(axis=1)
    np.testing.assert_allclose(nll.data, expected, atol=1e-12)


@pytest.mark.parametrize("model_cls", [DgpvarModel, RnnNfModel])
def test_sequence_nll_gradcheck(model_cls):
    cfg = _small_config(hidden=5)
    model = model_cls(2, 4, ["a", "b"], cfg, seed=5)
    rng = np.random.default_rng(11)
    for p in model.params():
        p.data = np.asarray(p.data + rng.normal(0, 0.2, size=p.data.shape))
    z = rng.normal(size=(3, 4, 2))
    err = grad_check(lambda *ps: tmean(model.sequence_nll(z)), model.params())
    assert err < 1e-4


@pytest.mark.parametrize("kind", ["dgpvar", "rnnnf"])
def test_sampling_shape_and_determinism(kind):
    rng = np.random.default_rng(12)
    updates = UpdateSeries(values=rng.normal(size=(60, 4, 2)), area_ids=["a", "b"])
    model = fit_model(kind, updates, {"hidden": 6, "flow_hidden": 8,
                                      "emission_depth": 2,
                                      "train": {"epochs": 2, "batch_size": 16,
                                                "seed": 0}})
    s1 = model.sample(10, 3)
    s2 = model.sample(10, 3)
    assert s1.values.shape == (10, 4, 2)
    assert np.array_equal(s1.values, s2.values)


def test_identity_emission_samples_standard_normal_scores():
    cfg = _small_config()
    model = RnnNfModel(2, 3, ["a", "b"], cfg, seed=6)
    for p in model.encoder.params() + [model.z0]:
        p.data = np.zeros_like(p.data)  # zero encoder, identity flow
    scores = model.sample_scores(20_000, seed=7)
    flat = scores.reshape(-1)
    assert abs(flat.mean()) < 0.02
    assert abs(flat.var() - 1.0) < 0.03


def test_dgpvar_rank_zero_factor_independent_samples():
    cfg = _small_config()
    model = DgpvarModel(2, 3, ["a", "b"], cfg, seed=8)
    model.head.w_v.data = np.zeros_like(model.head.w_v.data)  # force V = 0
    scores = model.sample_scores(20_000, seed=9)
    per_step = scores.reshape(-1, 2)
    rho = np.corrcoef(per_step[:, 0], per_step[:, 1])[0, 1]
    assert abs(rho) < 0.03


@pytest.mark.slow
def test_sampling_likelihood_entropy_consistency():
    # zero weights freeze the emission at N(0, ln2 I) every step, so the
    # Monte Carlo mean NLL over the model's own samples must match the
    # closed-form Gaussian entropy
    cfg = _small_config()
    model = DgpvarModel(2, 3, ["a", "b"], cfg, seed=0)
    for p in model.params():
        p.data = np.zeros_like(p.data)
    scores = model.sample_scores(100_000, seed=5)
    mc_nll = float(model.sequence_nll(scores).data.mean())
    entropy = 3 * (np.log(2 * np.pi * np.e) + np.log(LN2))
    assert mc_nll == pytest.approx(entropy, rel=0.02)


@pytest.mark.slow
def test_rnnnf_beats_static_diagonal_on_state_dependent_data():
    from reforecast.synthbench import SyntheticProcessConfig, generate_synthetic_trajectory

    ds = generate_synthetic_trajectory(SyntheticProcessConfig(
        kind="heteroscedastic", n=600, m=8, d=2, seed=3))
    upd = ds.updates
    model = fit_model("rnnnf", upd, {
        "hidden": 12, "emission_depth": 2, "flow_hidden": 12, "marginal": "none",
        "train": {"epochs": 100, "batch_size": 64, "patience": 20, "lr": 3e-3,
                  "dropout": 0.0, "seed": 0}})
    n_tr = int(upd.n_sequences * 0.9)
    train_scores = model.scaler.transform(upd.values[:n_tr])
    val_scores = model.scaler.transform(upd.values[n_tr:])
    rnnnf_nll = float(model.sequence_nll(val_scores).data.mean())
    mu = train_scores.mean(axis=0)
    var = train_scores.var(axis=0)
    diag_nll = float(
        (0.5 * (np.log(2 * np.pi * var) + (val_scores - mu) ** 2 / var))
        .sum(axis=(1, 2)).mean()
    )
    assert rnnnf_nll < diag_nll


def test_training_deterministic_history():
    rng = np.random.default_rng(13)
    updates = UpdateSeries(values=rng.normal(size=(80, 4, 2)), area_ids=["a", "b"])
    cfg = {"hidden": 6, "train": {"epochs": 3, "batch_size": 16, "seed": 5}}
    h1 = fit_model("dgpvar", updates, cfg).history
    h2 = fit_model("dgpvar", updates, cfg).history
    assert h1.train_loss == h2.train_loss
    assert h1.val_loss == h2.val_loss


def test_zero_learning_rate_keeps_parameters():
    rng = np.random.default_rng(14)
    updates = UpdateSeries(values=rng.normal(size=(50, 3, 1)), area_ids=["a"])
    cfg = ModelConfig(hidden=5, rank=1,
                      train=TrainConfig(epochs=3, batch_size=16, lr=0.0, seed=0))
    model = DgpvarModel(1, 3, ["a"], cfg, seed=0)
    before = [p.data.copy() for p in model.params()]

    from reforecast.training import fit_loop

    def loss(rows, rng_):
        scaled = (updates.values - updates.values.mean()) / updates.values.std()
        return tmean(model.sequence_nll(scaled[rows]))

    history = fit_loop(model.params(), loss, 50, cfg.train)
    for p, orig in zip(model.params(), before):
        np.testing.assert_array_equal(p.data, orig)
    assert len(set(np.round(history.val_loss, 12))) == 1


def test_weight_sharing_across_areas():
    # permuting areas permutes per-area emissions identically when the
    # embedding rows travel with the permutation
    cfg = _small_config()
    model = DgpvarModel(3, 4, ["a", "b", "c"], cfg, seed=15)
    rng = np.random.default_rng(16)
    for p in model.params():
        p.data = np.asarray(p.data + rng.normal(0, 0.3, size=p.data.shape))
    z = rng.normal(size=(2, 4, 3))
    base = model.sequence_nll(z).data

    perm = np.array([2, 0, 1])
    model.embedding.data = model.embedding.data[perm]
    permuted = model.sequence_nll(z[:, :, perm]).data
    np.testing.assert_allclose(permuted, base, atol=1e-10)
