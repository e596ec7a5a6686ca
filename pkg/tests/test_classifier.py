import math

import numpy as np
import pytest
from scipy import stats

from netgp.classifier import (
    ClassifierConfig,
    ClassifierPosterior,
    GibbsState,
    LabeledDataset,
    Prediction,
    SamplerError,
    check_stalls,
    ell_log_prior,
    fit,
    gibbs_sweep,
    predict,
)
from netgp.distances import distance_matrix
from netgp.graph import Graph
from netgp.kernels import stabilized_cholesky
from netgp.mcmc import logistic, logistic_loglik

from conftest import sym

FAST = ClassifierConfig(ns=400, burn_in=100, seed=3)


def _clusters():
    rng = np.random.default_rng(0)
    a = Graph(sym(rng.random((8, 8)) < 0.2))
    b = Graph(sym(rng.random((8, 8)) < 0.8))
    graphs = [a] * 5 + [b] * 5
    y = np.array([-1] * 5 + [1] * 5)
    return distance_matrix(graphs, "frobenius").values, y


def test_config_validation():
    with pytest.raises(ValueError):
        ClassifierConfig(ns=10, burn_in=10)
    with pytest.raises(ValueError):
        ClassifierConfig(alpha_ell=0.0)
    with pytest.raises(ValueError):
        ClassifierConfig(fixed_sigma2=-1.0)
    assert ClassifierConfig(ns=20, burn_in=5, thin=3).n_retained == 5


def test_dataset_validation():
    with pytest.raises(ValueError, match="-1 or \\+1"):
        LabeledDataset(np.zeros((2, 2)), [0, 1])
    with pytest.raises(ValueError, match="shape"):
        LabeledDataset(np.zeros((3, 3)), [1, -1])
    with pytest.raises(ValueError):
        LabeledDataset(None, [1, -1])


def test_posterior_validation():
    with pytest.raises(ValueError):
        ClassifierPosterior(np.zeros((2, 3)), np.ones(1), np.ones((2, 1)), np.zeros(2))
    with pytest.raises(ValueError):
        ClassifierPosterior(np.zeros((1, 3)), np.array([-1.0]), np.ones((1, 1)), np.zeros(1))


def test_separable_clusters_sign_agreement():
    D, y = _clusters()
    post = fit(LabeledDataset(D, y), FAST)
    assert np.all(np.sign(post.mean_f()) == y)
    assert np.all(post.sigma2 > 0) and np.all(post.ell > 0)
    assert post.f.shape == (FAST.n_retained, 10)


def test_all_positive_labels_give_positive_f():
    D, _ = _clusters()
    post = fit(LabeledDataset(D, np.ones(10)), FAST)
    assert np.all(post.mean_f() > 0)


def test_same_seed_same_draws():
    D, y = _clusters()
    a = fit(LabeledDataset(D, y), FAST)
    b = fit(LabeledDataset(D, y), FAST)
    assert np.array_equal(a.f, b.f) and np.array_equal(a.ell, b.ell)


def test_plugin_interpolates_training_point():
    # distinct 1-D points so the Gram is PD without jitter
    x = np.array([0.0, 1.0, 2.5, 4.0])
    D = (x[:, None] - x[None, :]) ** 2
    y = np.array([1, 1, -1, -1])
    data = LabeledDataset(D, y)
    post = fit(data, FAST)
    ell = post.ell.mean(axis=0)
    assert stabilized_cholesky(data.base_gram(ell))[1] == 0.0
    pred = predict(post, data, D[[1]])
    assert pred.mean[0] == pytest.approx(post.mean_f()[1], rel=1e-8)
    assert pred.variance[0] == pytest.approx(0.0, abs=1e-8)


def test_far_point_reverts_to_prior():
    D, y = _clusters()
    data = LabeledDataset(D, y)
    post = fit(data, FAST)
    pred = predict(post, data, np.full((1, 10), 1e6))
    assert pred.mean[0] == pytest.approx(0.0, abs=1e-12)
    assert pred.prob[0] == pytest.approx(0.5)
    assert pred.variance[0] == pytest.approx(post.sigma2.mean())


def test_plugin_matches_closed_form():
    D, y = _clusters()
    data = LabeledDataset(D, y)
    post = fit(data, FAST)
    s2, ell = post.sigma2.mean(), post.ell.mean()
    d_new = D[[0, 7]] + 0.05
    K, _ = stabilized_cholesky(np.exp(-ell * D))
    Kfull = K @ K.T
    k = np.exp(-ell * d_new)
    mu = k @ np.linalg.solve(Kfull, post.mean_f())
    var = s2 * (1 - np.einsum("ij,ji->i", k, np.linalg.solve(Kfull, k.T)))
    pred = predict(post, data, d_new)
    assert np.allclose(pred.mean, mu, rtol=1e-6, atol=1e-8)
    assert np.allclose(pred.variance, np.clip(var, 0, s2), rtol=1e-6, atol=1e-8)
    assert np.allclose(pred.prob, logistic(mu))


def test_mc_mode_variance_decomposition():
    D, y = _clusters()
    data = LabeledDataset(D, y)
    post = fit(data, FAST)
    d_new = D[[2]] + 0.1
    mc = predict(post, data, d_new, mode="mc", max_draws=20)
    assert mc.variance[0] >= 0 and 0 < mc.prob[0] < 1
    with pytest.raises(ValueError):
        predict(post, data, d_new, mode="bogus")
    with pytest.raises(ValueError, match="columns"):
        predict(post, data, d_new[:, :5])


def test_prediction_tie_goes_positive():
    p = Prediction(np.zeros(2), np.zeros(2), np.array([0.5, 0.49]))
    assert p.labels.tolist() == [1, -1]


def test_fixed_gram_dataset():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(8, 3))
    K = X @ X.T + 0.1 * np.eye(8)
    y = np.where(X[:, 0] > 0, 1, -1)
    data = LabeledDataset(None, y, fixed_gram=K)
    post = fit(data, FAST)
    assert post.ell.shape == (FAST.n_retained, 0)
    with pytest.raises(ValueError, match="self_sim"):
        predict(post, data, K[:2])
    pred = predict(post, data, K[:2], self_sim=np.diag(K)[:2])
    assert pred.mean.shape == (2,)


def test_stall_abort():
    check_stalls(50, 100)
    with pytest.raises(SamplerError):
        check_stalls(51, 100)


def test_csv_export(tmp_path):
    D, y = _clusters()
    post = fit(LabeledDataset(D, y), ClassifierConfig(ns=30, burn_in=10))
    post.to_csv(tmp_path / "draws.csv")
    lines = (tmp_path / "draws.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["sigma2", "ell", "f0"]
    assert len(lines) == 21
    assert float(lines[1].split(",")[0]) == post.sigma2[0]


def _batch_se(x, batches=50):
    b = np.array_split(np.asarray(x), batches)
    means = np.array([v.mean() for v in b])
    return means.std(ddof=1) / math.sqrt(batches)


@pytest.mark.slow
@pytest.mark.parametrize("whitened", [False, True])
def test_getting_it_right(whitened):
    """Forward prior/likelihood simulation vs Gibbs with label resampling at m=3."""
    cfg = ClassifierConfig(alpha_sigma=3.0, beta_sigma=2.0, alpha_ell=3.0, beta_ell=2.0,
                           whitened_sigma2=whitened)
    x = np.array([0.0, 0.6, 1.5])
    D = (x[:, None] - x[None, :]) ** 2
    rng = np.random.default_rng(11 + whitened)

    def factor(ell):
        return stabilized_cholesky(np.exp(-ell[0] * D))[0]

    n = 20000
    s2_f = cfg.beta_sigma / rng.gamma(cfg.alpha_sigma, size=n)
    ell_f = cfg.beta_ell / rng.gamma(cfg.alpha_ell, size=n)
    f_f = np.array([math.sqrt(s) * factor([e]) @ rng.standard_normal(3) for s, e in zip(s2_f, ell_f)])

    ell = np.array([cfg.beta_ell / (cfg.alpha_ell - 1)])
    s2 = cfg.beta_sigma / (cfg.alpha_sigma - 1)
    C = factor(ell)
    f = math.sqrt(s2) * C @ rng.standard_normal(3)
    y = np.where(rng.random(3) < logistic(f), 1.0, -1.0)
    log_prior = ell_log_prior(cfg)
    draws = []
    for t in range(n + 500):
        yy = y.copy()

        def loglik(v, yy=yy):
            return logistic_loglik(v, yy)

        state = GibbsState(f, ell, s2, C, loglik(f))
        gibbs_sweep(state, factor, loglik, log_prior, cfg, rng)
        f, ell, s2, C = state.f, state.ell, state.sigma2, state.chol0
        y = np.where(rng.random(3) < logistic(f), 1.0, -1.0)
        if t >= 500:
            draws.append((math.log(s2), math.log(ell[0]), *f))
    draws = np.array(draws)
    fwd = np.column_stack([np.log(s2_f), np.log(ell_f), f_f])
    for k in range(draws.shape[1]):
        se = math.hypot(_batch_se(draws[:, k]), fwd[:, k].std() / math.sqrt(n))
        assert abs(draws[:, k].mean() - fwd[:, k].mean()) < 3.5 * se, k
    # second moments of f as well
    for k in range(2, 5):
        se = math.hypot(_batch_se(draws[:, k] ** 2), (fwd[:, k] ** 2).std() / math.sqrt(n))
        assert abs((draws[:, k] ** 2).mean() - (fwd[:, k] ** 2).mean()) < 3.5 * se
