"""Gibbs-sampled Gaussian-process classification with graph kernels."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import stabilized_cholesky
from .mcmc import (
    ess_update,
    inv_gamma_logpdf,
    joint_f_ell_update,
    logistic,
    logistic_loglik,
    sample_sigma2,
)

log = logging.getLogger(__name__)


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    alpha_sigma: float = 1.0
    beta_sigma: float = 1.0
    alpha_ell: float = 1.0
    beta_ell: float = 1.0
    ns: int = 2000
    burn_in: int = 500
    thin: int = 1
    n_ess: int = 5
    seed: int = 0
    # hold the signal variance at this value instead of sampling it
    fixed_sigma2: float | None = None
    # also slice-sample log sigma2 inside the whitened (f, ell) move
    whitened_sigma2: bool = False

    def __post_init__(self):
        if not self.ns > self.burn_in >= 0:
            raise ValueError(f"need ns > burn_in >= 0, got ns={self.ns}, burn_in={self.burn_in}")
        if self.thin < 1 or self.n_ess < 0:
            raise ValueError("thin must be >= 1 and n_ess >= 0")
        for name in ("alpha_sigma", "beta_sigma", "alpha_ell", "beta_ell"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.fixed_sigma2 is not None and not self.fixed_sigma2 > 0:
            raise ValueError("fixed_sigma2 must be > 0")

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in + self.thin, self.ns + 1, self.thin))


@dataclass
class LabeledDataset:
    """Training labels in {-1, +1} with either a distance matrix or a fixed Gram.

    ``fixed_gram`` (unit signal variance) is used by kernels without a
    length-scale, such as the random-walk kernel; ``distances`` is ignored
    then.
    """

    distances: np.ndarray | None
    labels: np.ndarray
    fixed_gram: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=float)
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be exactly -1 or +1")
        source = self.fixed_gram if self.fixed_gram is not None else self.distances
        if source is None:
            raise ValueError("need either distances or fixed_gram")
        source = np.asarray(getattr(source, "values", source), dtype=float)
        if source.shape != (self.m, self.m):
            raise ValueError(
                f"kernel input has shape {source.shape}, expected ({self.m}, {self.m})"
            )
        if self.fixed_gram is not None:
            self.fixed_gram = source
        else:
            self.distances = source

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def has_length_scale(self) -> bool:
        return self.fixed_gram is None

    def base_gram(self, ell) -> np.ndarray:
        """Unit-signal-variance Gram at length-scale ``ell``."""
        if self.fixed_gram is not None:
            return self.fixed_gram
        return np.exp(-float(np.atleast_1d(ell)[0]) * self.distances)

    def base_cross(self, D_new, ell) -> np.ndarray:
        D_new = np.atleast_2d(np.asarray(D_new, dtype=float))
        if self.fixed_gram is not None:
            return D_new
        return np.exp(-float(np.atleast_1d(ell)[0]) * D_new)


@dataclass
class ClassifierPosterior:
    f: np.ndarray  # (draws, m)
    sigma2: np.ndarray
    ell: np.ndarray  # (draws, n_length_scales); empty second axis for fixed kernels
    loglik: np.ndarray
    n_sweeps: int = 0
    stalled_sweeps: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.f) == len(self.sigma2) == len(self.ell) == len(self.loglik)):
            raise ValueError("draw counts are inconsistent")
        if np.any(self.sigma2 <= 0) or np.any(self.ell <= 0):
            raise ValueError("hyperparameter draws must be positive")

    @property
    def n_draws(self) -> int:
        return len(self.sigma2)

    def mean_f(self) -> np.ndarray:
        return self.f.mean(axis=0)

    def to_csv(self, path):
        with open(path, "w") as fh:
            m = self.f.shape[1]
            n_ell = self.ell.shape[1]
            ell_cols = ["ell"] if n_ell == 1 else [f"ell{k}" for k in range(n_ell)]
            fh.write(",".join(["sigma2", *ell_cols] + [f"f{k}" for k in range(m)]) + "\n")
            for s2, el, fv in zip(self.sigma2, self.ell, self.f):
                fh.write(",".join(repr(float(x)) for x in (s2, *el, *fv)) + "\n")


@dataclass
class GibbsState:
    f: np.ndarray
    ell: np.ndarray
    sigma2: float
    chol0: np.ndarray
    loglik: float


def gibbs_sweep(state: GibbsState, factor, loglik, log_prior_ell, cfg: ClassifierConfig,
                rng, sample_ell: bool = True) -> bool:
    """One sweep: joint (f, ell) slice move, ESS refreshes, conjugate signal variance.

    Mutates ``state`` and returns True when the sweep stalled.
    """
    stalled = False
    s2_prior = None
    if cfg.whitened_sigma2 and cfg.fixed_sigma2 is None:
        def s2_prior(s2):
            return float(inv_gamma_logpdf(s2, cfg.alpha_sigma, cfg.beta_sigma))
    if sample_ell or s2_prior is not None:
        f, ell, chol0, ll, stalled, s2 = joint_f_ell_update(
            state.f, state.ell, state.chol0, state.sigma2, factor, loglik, log_prior_ell, rng,
            log_prior_sigma2=s2_prior,
        )
        state.f, state.ell, state.chol0, state.loglik, state.sigma2 = f, ell, chol0, ll, s2
    chol = state.chol0 * math.sqrt(state.sigma2)
    ess_stalls = 0
    for _ in range(cfg.n_ess):
        state.f, state.loglik, s = ess_update(state.f, chol, loglik, rng, state.loglik)
        ess_stalls += s
    if cfg.n_ess and ess_stalls == cfg.n_ess:
        stalled = True
    if cfg.fixed_sigma2 is None:
        state.sigma2 = sample_sigma2(state.f, state.chol0, cfg.alpha_sigma, cfg.beta_sigma, rng)
    return stalled


def check_stalls(stalled: int, sweeps: int):
    if sweeps >= 100 and stalled > 0.5 * sweeps:
        raise SamplerError(
            f"{stalled} of {sweeps} sweeps stalled; the kernel is likely "
            "ill-conditioned or the likelihood degenerate"
        )


def ell_log_prior(cfg: ClassifierConfig) -> Callable:
    def log_prior(ell):
        ell = np.asarray(ell, dtype=float)
        if np.any(ell <= 0):
            return -np.inf
        return float(np.sum(inv_gamma_logpdf(ell, cfg.alpha_ell, cfg.beta_ell)))
    return log_prior


def fit(data: LabeledDataset, cfg: ClassifierConfig = ClassifierConfig(),
        loglik: Callable | None = None, rng=None) -> ClassifierPosterior:
    """Run the Gibbs sampler for GP classification.

    ``loglik`` overrides the logistic likelihood (used for prior-recovery
    diagnostics); ``rng`` overrides the generator seeded from ``cfg.seed``.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    y = data.labels
    if loglik is None:
        def loglik(f):
            return logistic_loglik(f, y)

    def factor(ell):
        return stabilized_cholesky(data.base_gram(ell))[0]

    sample_ell = data.has_length_scale
    ell0 = np.ones(1) if sample_ell else np.ones(0)
    sigma2 = cfg.fixed_sigma2 if cfg.fixed_sigma2 is not None else 1.0
    chol0 = factor(ell0)
    f0 = math.sqrt(sigma2) * (chol0 @ rng.standard_normal(data.m))
    state = GibbsState(f0, ell0, sigma2, chol0, loglik(f0))
    log_prior = ell_log_prior(cfg)

    n_keep = cfg.n_retained
    f_draws = np.empty((n_keep, data.m))
    s2_draws = np.empty(n_keep)
    ell_draws = np.empty((n_keep, ell0.size))
    ll_draws = np.empty(n_keep)
    stalled = 0
    k = 0
    for t in range(1, cfg.ns + 1):
        stalled += gibbs_sweep(state, factor, loglik, log_prior, cfg, rng, sample_ell)
        if t % 100 == 0:
            check_stalls(stalled, t)
        if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            f_draws[k] = state.f
            s2_draws[k] = state.sigma2
            ell_draws[k] = state.ell
            ll_draws[k] = state.loglik
            k += 1
    check_stalls(stalled, cfg.ns)
    if stalled:
        log.info("%d of %d sweeps stalled", stalled, cfg.ns)
    return ClassifierPosterior(f_draws, s2_draws, ell_draws, ll_draws,
                               n_sweeps=cfg.ns, stalled_sweeps=stalled)


@dataclass
class Prediction:
    mean: np.ndarray
    variance: np.ndarray
    prob: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return np.where(self.prob >= 0.5, 1, -1)


def predict(post: ClassifierPosterior, data: LabeledDataset, D_new, mode: str = "plugin",
            self_sim=None, max_draws: int | None = None) -> Prediction:
    """Posterior predictive latent mean, variance and class probability.

    ``D_new`` holds test-to-train distances (rows are test points).  For a
    fixed-Gram dataset it holds the unit-variance test-to-train kernel block
    instead, and ``self_sim`` the unit-variance test self-similarities.

    ``plugin`` plugs the posterior means of (f, s2, ell) into the GP
    conditional; ``mc`` averages the conditional over retained
    hyperparameter draws, keeping f at its posterior mean.
    """
    if post.n_draws == 0:
        raise ValueError("posterior has no draws")
    D_new = np.atleast_2d(np.asarray(D_new, dtype=float))
    if D_new.shape[1] != data.m:
        raise ValueError(f"D_new has {D_new.shape[1]} columns, expected {data.m}")
    if self_sim is None:
        if not data.has_length_scale:
            raise ValueError("fixed-Gram prediction needs self_sim")
        self_sim = np.ones(D_new.shape[0])
    self_sim = np.asarray(self_sim, dtype=float)
    f_hat = post.mean_f()

    def conditional(sigma2, ell):
        C, _ = stabilized_cholesky(data.base_gram(ell))
        k0 = data.base_cross(D_new, ell)
        V = solve_triangular(C, k0.T, lower=True, check_finite=False)
        mu = V.T @ solve_triangular(C, f_hat, lower=True, check_finite=False)
        var = sigma2 * (self_sim - np.einsum("ij,ij->j", V, V))
        return mu, np.clip(var, 0.0, sigma2 * self_sim)

    if mode == "plugin":
        s2 = float(post.sigma2.mean())
        mu, var = conditional(s2, post.ell.mean(axis=0))
        return Prediction(mu, var, logistic(mu))
    if mode != "mc":
        raise ValueError(f"unknown prediction mode {mode!r}")
    idx = np.arange(post.n_draws)
    if max_draws is not None and post.n_draws > max_draws:
        idx = np.linspace(0, post.n_draws - 1, max_draws).round().astype(int)
    mus, vars_ = [], []
    for b in idx:
        mu, var = conditional(float(post.sigma2[b]), post.ell[b])
        mus.append(mu)
        vars_.append(var)
    mus = np.array(mus)
    vars_ = np.array(vars_)
    mean = mus.mean(axis=0)
    variance = vars_.mean(axis=0) + mus.var(axis=0)
    prob = logistic(mus).mean(axis=0)
    return Prediction(mean, variance, prob)
