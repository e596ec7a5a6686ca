"""Semi-parametric survival analysis with network covariates.

A survival time is the first accepted jump of a Poisson process with
intensity ``Omega * logistic(f(t, X))``.  The Gibbs sampler imputes the
rejected (thinned) jumps, updates the constant dominating rate ``Omega``
and then treats ``f`` on observed and rejected points as a GP
classification problem (+1 for event times, -1 for rejected points).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .classifier import (
    ClassifierConfig,
    GibbsState,
    check_stalls,
    ell_log_prior,
    gibbs_sweep,
)
from .kernels import SURVIVAL_MIN_JITTER, CholeskyError, squared_differences, stabilized_cholesky
from .mcmc import log_logistic, logistic

log = logging.getLogger(__name__)

GRID_POINTS = 100


@dataclass(frozen=True)
class SurvivalConfig(ClassifierConfig):
    alpha_omega: float = 1.0
    beta_omega: float = 1.0
    min_jitter: float = SURVIVAL_MIN_JITTER
    whitened_sigma2: bool = True
    # diagnostics switches: skip thinning augmentation / keep f frozen
    augment: bool = True
    sample_latent: bool = True

    def __post_init__(self):
        super().__post_init__()
        if not (self.alpha_omega > 0 and self.beta_omega > 0):
            raise ValueError("Gamma prior parameters for Omega must be > 0")


@dataclass
class SurvivalDataset:
    times: np.ndarray
    graph_distances: np.ndarray
    covariates: np.ndarray | None = None
    groups: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or np.any(~(self.times > 0)):
            raise ValueError("survival times must be a vector of positive reals")
        D = np.asarray(getattr(self.graph_distances, "values", self.graph_distances), float)
        if D.shape != (self.m, self.m):
            raise ValueError(f"graph distances have shape {D.shape}, expected ({self.m}, {self.m})")
        self.graph_distances = D
        if self.covariates is None:
            self.covariates = np.zeros((self.m, 0))
        self.covariates = np.asarray(self.covariates, dtype=float).reshape(self.m, -1)
        if self.groups is not None:
            self.groups = np.asarray(self.groups)
            if self.groups.shape != (self.m,):
                raise ValueError("groups must have one entry per subject")

    @property
    def m(self) -> int:
        return self.times.size

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]


class SurvivalKernel:
    """Unit-signal-variance additive kernel over (graph, time, covariates).

    Length scales are ordered ``(graph, time, covariate_1, ...)``.
    """

    def __init__(self, data: SurvivalDataset, min_jitter: float = SURVIVAL_MIN_JITTER):
        self.D_G = data.graph_distances
        self.X = data.covariates
        self.D_X = [squared_differences(self.X[:, k]) for k in range(data.n_covariates)]
        self.min_jitter = min_jitter

    def subject_block(self, ell, rows=None, D_G_rows=None, X_rows=None) -> np.ndarray:
        """Graph + covariate part between subjects (rows) and training subjects."""
        ell = np.asarray(ell, dtype=float)
        if rows is not None:
            D_G_rows = self.D_G[rows]
            X_rows = self.X[rows]
        out = np.exp(-ell[0] * D_G_rows)
        for k in range(self.X.shape[1]):
            out = out + np.exp(-ell[2 + k] * squared_differences(X_rows[:, k], self.X[:, k]))
        return out

    def gram(self, ell, subject, time) -> np.ndarray:
        ell = np.asarray(ell, dtype=float)
        S = np.exp(-ell[0] * self.D_G)
        for k, D in enumerate(self.D_X):
            S = S + np.exp(-ell[2 + k] * D)
        return S[np.ix_(subject, subject)] + np.exp(-ell[1] * squared_differences(time))

    def cross(self, ell, subj_a, time_a, subject, time) -> np.ndarray:
        ell = np.asarray(ell, dtype=float)
        S = self.subject_block(ell, rows=subj_a)
        return S[:, subject] + np.exp(-ell[1] * squared_differences(time_a, time))

    def factor(self, ell, subject, time) -> np.ndarray:
        return stabilized_cholesky(self.gram(ell, subject, time), self.min_jitter)[0]


@dataclass
class SurvivalState:
    omega: float
    subject: np.ndarray  # owner of each latent coordinate; first m are the event times
    time: np.ndarray
    f: np.ndarray
    ell: np.ndarray
    sigma2: float
    chol0: np.ndarray
    loglik: float = 0.0

    def check(self, times):
        m = times.size
        if self.f.size != self.subject.size or self.time.size != self.subject.size:
            raise AssertionError("latent registry lengths disagree")
        if not np.array_equal(self.subject[:m], np.arange(m)) or not np.array_equal(self.time[:m], times):
            raise AssertionError("observed points are not at the head of the registry")
        r_subj, r_time = self.subject[m:], self.time[m:]
        if np.any(r_time <= 0) or np.any(r_time >= times[r_subj]):
            raise AssertionError("rejected point outside (0, T_i)")


def survival_loglik(m: int):
    def loglik(f):
        return float(np.sum(log_logistic(f[:m])) + np.sum(log_logistic(-f[m:])))
    return loglik


def update_omega(n_events: int, n_rejected: int, total_time: float,
                 alpha: float, beta: float, rng, size=None):
    """``Omega ~ Gamma(alpha + m + |R|, rate = beta + sum T)``; a float unless ``size``."""
    draw = rng.gamma(alpha + n_events + n_rejected, 1.0 / (beta + total_time), size=size)
    return float(draw) if size is None else draw


def _conditional_draw(kern: SurvivalKernel, state: SurvivalState, subj_a, time_a, rng,
                      min_jitter: float):
    """Sample f at candidate points, independently per subject, given f on the registry."""
    s = math.sqrt(state.sigma2)
    C = state.chol0 * s
    Kx = state.sigma2 * kern.cross(state.ell, subj_a, time_a, state.subject, state.time)
    V = solve_triangular(C, Kx.T, lower=True, check_finite=False)
    w = solve_triangular(C, state.f, lower=True, check_finite=False)
    mean = V.T @ w
    out = np.empty(subj_a.size)
    for i in np.unique(subj_a):
        idx = np.flatnonzero(subj_a == i)
        Kaa = state.sigma2 * kern.gram(state.ell, subj_a[idx], time_a[idx])
        cov = Kaa - V[:, idx].T @ V[:, idx]
        cov = 0.5 * (cov + cov.T)
        L, _ = stabilized_cholesky(cov, min_jitter)
        out[idx] = mean[idx] + L @ rng.standard_normal(idx.size)
    return out


def augment_subject(i: int, state: SurvivalState, times, kern: SurvivalKernel, rng,
                    min_jitter: float = SURVIVAL_MIN_JITTER):
    """Thinning augmentation for one subject; returns ``(rejected_times, f_values)``."""
    return augment_subjects(state, times, kern, rng, [i], min_jitter)


def augment_subjects(state: SurvivalState, times, kern: SurvivalKernel, rng,
                     subjects=None, min_jitter: float = SURVIVAL_MIN_JITTER):
    """Draw candidate jumps on (0, T_i) and keep those thinned away.

    Candidates come from the dominating process: ``n_i ~ Poisson(Omega T_i)``
    points, uniform on ``(0, Omega T_i)`` and mapped back through
    ``Lambda_0^{-1}(u) = u / Omega``.  A candidate ``a`` is retained as a
    rejected point when ``U < 1 - logistic(f(a))``.
    """
    subjects = np.arange(times.size) if subjects is None else np.asarray(subjects)
    counts = rng.poisson(state.omega * times[subjects])
    subj_a = np.repeat(subjects, counts)
    if subj_a.size == 0:
        return subj_a, np.empty(0), np.empty(0)
    cum = rng.uniform(0.0, state.omega * times[subj_a])
    time_a = cum / state.omega
    # a uniform draw can land on the closed endpoint; keep points strictly inside
    time_a = np.clip(time_a, np.nextafter(0.0, 1.0), np.nextafter(times[subj_a], 0.0))
    f_a = _conditional_draw(kern, state, subj_a, time_a, rng, min_jitter)
    u = rng.random(subj_a.size)
    keep = u < 1.0 - logistic(f_a)
    return subj_a[keep], time_a[keep], f_a[keep]


@dataclass
class SurvivalPosterior:
    omega: np.ndarray
    sigma2: np.ndarray
    ell: np.ndarray
    f: list  # per draw, latent values over the registry
    subject: list
    time: list
    weights: list  # per draw, (K0 + jitter)^{-1} f for conditional means
    n_rejected: np.ndarray
    n_sweeps: int = 0
    stalled_sweeps: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return len(self.omega)


def fit_survival(data: SurvivalDataset, cfg: SurvivalConfig = SurvivalConfig(),
                 rng=None) -> SurvivalPosterior:
    """Gibbs sampler with constant baseline hazard and thinning augmentation."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    T = data.times
    m = data.m
    kern = SurvivalKernel(data, cfg.min_jitter)
    n_ell = 2 + data.n_covariates
    ell = np.ones(n_ell)
    sigma2 = cfg.fixed_sigma2 if cfg.fixed_sigma2 is not None else 1.0
    subject = np.arange(m)
    time = T.copy()
    chol0 = kern.factor(ell, subject, time)
    f = math.sqrt(sigma2) * (chol0 @ rng.standard_normal(m)) if cfg.sample_latent else np.zeros(m)
    omega = (cfg.alpha_omega + m) / (cfg.beta_omega + T.sum())
    state = SurvivalState(omega, subject, time, f, ell, sigma2, chol0)
    log_prior = ell_log_prior(cfg)
    total_time = float(T.sum())

    keep = dict(omega=[], sigma2=[], ell=[], f=[], subject=[], time=[], weights=[], n_rejected=[])
    stalled = 0
    for t in range(1, cfg.ns + 1):
        if cfg.augment:
            r_subj, r_time, r_f = augment_subjects(state, T, kern, rng, min_jitter=cfg.min_jitter)
            order = np.lexsort((r_time, r_subj))
            state.subject = np.concatenate([np.arange(m), r_subj[order]])
            state.time = np.concatenate([T, r_time[order]])
            state.f = np.concatenate([state.f[:m], r_f[order]])
        state.omega = update_omega(m, state.subject.size - m, total_time,
                                   cfg.alpha_omega, cfg.beta_omega, rng)
        subj, tm = state.subject, state.time

        def factor(ell_v, subj=subj, tm=tm):
            return kern.factor(ell_v, subj, tm)

        try:
            state.chol0 = factor(state.ell)
        except CholeskyError as exc:
            raise CholeskyError(f"sweep {t}: {exc}") from exc
        if cfg.sample_latent:
            loglik = survival_loglik(m)
            gstate = GibbsState(state.f, state.ell, state.sigma2, state.chol0, loglik(state.f))
            stalled += gibbs_sweep(gstate, factor, loglik, log_prior, cfg, rng)
            state.f, state.ell, state.sigma2, state.chol0 = (
                gstate.f, gstate.ell, gstate.sigma2, gstate.chol0)
        if t % 100 == 0:
            check_stalls(stalled, t)
        if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            keep["omega"].append(state.omega)
            keep["sigma2"].append(state.sigma2)
            keep["ell"].append(state.ell.copy())
            keep["f"].append(state.f.copy())
            keep["subject"].append(state.subject.copy())
            keep["time"].append(state.time.copy())
            keep["weights"].append(cho_solve((state.chol0, True), state.f, check_finite=False))
            keep["n_rejected"].append(state.subject.size - m)
    check_stalls(stalled, cfg.ns)
    return SurvivalPosterior(
        omega=np.array(keep["omega"]),
        sigma2=np.array(keep["sigma2"]),
        ell=np.array(keep["ell"]).reshape(-1, n_ell),
        f=keep["f"], subject=keep["subject"], time=keep["time"], weights=keep["weights"],
        n_rejected=np.array(keep["n_rejected"], dtype=int),
        n_sweeps=cfg.ns, stalled_sweeps=stalled,
    )


@dataclass
class SurvivalSurface:
    grid: np.ndarray
    curves: np.ndarray  # (subjects, grid) posterior-mean S(t, X)
    groups: dict = field(default_factory=dict)  # group label -> mean curve

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])


def default_grid(times) -> np.ndarray:
    return np.linspace(0.0, float(np.max(times)), GRID_POINTS)


def cumulative_trapezoid(values, spacing: float) -> np.ndarray:
    """Running trapezoid integral along the last axis, starting at 0."""
    values = np.asarray(values, dtype=float)
    steps = 0.5 * spacing * (values[..., 1:] + values[..., :-1])
    return np.concatenate([np.zeros(values.shape[:-1] + (1,)), np.cumsum(steps, axis=-1)], axis=-1)


def survival_from_hazard(hazard, spacing: float) -> np.ndarray:
    """``S(t) = exp(-int_0^t hazard)`` on a uniform grid via the trapezoid rule."""
    return np.exp(-cumulative_trapezoid(hazard, spacing))


def survival_surface(post: SurvivalPosterior, data: SurvivalDataset, grid=None,
                     D_new=None, X_new=None, groups=None, max_draws: int | None = None,
                     min_jitter: float = SURVIVAL_MIN_JITTER) -> SurvivalSurface:
    """Posterior-mean survival curves on a uniform time grid.

    Curves are for the training subjects unless ``D_new`` (new-to-train
    graph distances) and optionally ``X_new`` are given.  For each retained
    draw the intensity ``Omega * logistic(E[f(s, X)])`` is evaluated with
    the GP conditional mean and integrated with the trapezoid rule.
    """
    if post.n_draws == 0:
        raise ValueError("posterior has no draws")
    grid = default_grid(data.times) if grid is None else np.asarray(grid, dtype=float)
    spacing = float(grid[1] - grid[0])
    if not np.allclose(np.diff(grid), spacing, rtol=1e-9, atol=1e-12):
        raise ValueError("grid must be uniform")
    kern = SurvivalKernel(data, min_jitter)
    m = data.m
    if D_new is None:
        rows = np.arange(m)
        D_rows, X_rows = data.graph_distances, data.covariates
        if groups is None:
            groups = data.groups
    else:
        rows = None
        D_rows = np.atleast_2d(np.asarray(D_new, dtype=float))
        X_rows = np.zeros((D_rows.shape[0], 0)) if X_new is None else np.asarray(X_new, float).reshape(D_rows.shape[0], -1)
    idx = np.arange(post.n_draws)
    if max_draws is not None and post.n_draws > max_draws:
        idx = np.linspace(0, post.n_draws - 1, max_draws).round().astype(int)
    total = np.zeros((D_rows.shape[0], grid.size))
    for b in idx:
        ell = post.ell[b]
        a = post.weights[b]
        per_subject = np.bincount(post.subject[b], weights=a, minlength=m)
        S = kern.subject_block(ell, D_G_rows=D_rows, X_rows=X_rows) if rows is None \
            else kern.subject_block(ell, rows=rows)
        subj_part = S @ per_subject
        time_part = np.exp(-ell[1] * squared_differences(grid, post.time[b])) @ a
        mean = subj_part[:, None] + time_part[None, :]
        hazard = post.omega[b] * logistic(mean)
        total += survival_from_hazard(hazard, spacing)
    curves = total / idx.size
    group_curves = {}
    if groups is not None:
        groups = np.asarray(groups)
        for g in sorted(set(groups.tolist())):
            group_curves[g] = curves[groups == g].mean(axis=0)
    return SurvivalSurface(grid, curves, group_curves)


def kaplan_meier(times, grid, events=None) -> np.ndarray:
    """Kaplan-Meier product-limit estimate evaluated at ``grid``.

    Without censoring (``events`` all true) this is the empirical survival
    fraction ``#{T > t} / m``.
    """
    times = np.asarray(times, dtype=float)
    events = np.ones(times.size, bool) if events is None else np.asarray(events, bool)
    uniq = np.unique(times[events])
    at_risk = np.array([(times >= u).sum() for u in uniq])
    deaths = np.array([((times == u) & events).sum() for u in uniq])
    steps = np.cumprod(1.0 - deaths / at_risk)
    pos = np.searchsorted(uniq, np.asarray(grid, float), side="right")
    return np.concatenate([[1.0], steps])[pos]
