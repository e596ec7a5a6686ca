"""MCMC building blocks shared by the classifier and the survival sampler."""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as la

from .kernels import CholeskyError

TWO_PI = 2.0 * math.pi
SHRINK_TOL = 1e-12
MAX_STEP_OUT = 25


def logistic(z):
    """Numerically stable logistic function (no overflow for large |z|)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def log_logistic(z):
    """``log(logistic(z))`` evaluated without underflow."""
    return -np.logaddexp(0.0, -np.asarray(z, dtype=float))


def logistic_loglik(f, y) -> float:
    return float(np.sum(log_logistic(f * y)))


def inv_gamma_logpdf(x, alpha, beta):
    return -(alpha + 1.0) * np.log(x) - beta / x


def sample_inv_gamma(alpha, beta, rng, size=None):
    return beta / rng.gamma(alpha, 1.0, size=size)


def whiten(chol, f):
    return la.solve_triangular(chol, f, lower=True, check_finite=False)


def sample_sigma2(f, K0_chol, alpha, beta, rng) -> float:
    """Conjugate draw ``s2 | f ~ Inv-Gamma(alpha + m/2, beta + f'K0^{-1}f/2)``.

    ``K0_chol`` is the lower Cholesky factor of the unit-signal-variance Gram.
    """
    f = np.asarray(f, dtype=float)
    z = whiten(K0_chol, f)
    q = float(z @ z)
    if not math.isfinite(q):
        raise FloatingPointError("non-finite quadratic form in signal-variance update")
    return float(sample_inv_gamma(alpha + 0.5 * f.size, beta + 0.5 * q, rng))


def ess_update(f, chol, loglik, rng, cur_loglik=None):
    """One elliptical slice sampling transition for ``N(f; 0, CC') exp(loglik(f))``.

    Returns ``(f_new, loglik_new, stalled)``.  A stall (bracket collapsed
    without acceptance) leaves ``f`` unchanged.
    """
    f = np.asarray(f, dtype=float)
    if cur_loglik is None:
        cur_loglik = loglik(f)
    nu = chol @ rng.standard_normal(f.size)
    log_y = cur_loglik + math.log(rng.random() or np.finfo(float).tiny)
    theta = rng.uniform(0.0, TWO_PI)
    lo, hi = theta - TWO_PI, theta
    while True:
        prop = f * math.cos(theta) + nu * math.sin(theta)
        ll = loglik(prop)
        if ll > log_y:
            return prop, ll, False
        if theta < 0:
            lo = theta
        else:
            hi = theta
        if hi - lo < SHRINK_TOL:
            return f, cur_loglik, True
        theta = rng.uniform(lo, hi)


def joint_f_ell_update(f, ell, chol0, sigma2, factor, loglik, log_prior, rng, width=1.0,
                       log_prior_sigma2=None):
    """Whitened slice move on (f, length-scales) given the signal variance.

    The latent vector is written ``f = sqrt(sigma2) * C0(ell) @ nu`` and ``nu``
    is held fixed while each log length-scale is slice sampled in turn
    (step-out of ``width`` then shrinkage).  Under this parameterization the
    Gaussian prior on ``f`` cancels, leaving the target
    ``log_prior(ell) + sum(log ell) + loglik(f(ell))``.

    When ``log_prior_sigma2`` is given, log ``sigma2`` is slice sampled as one
    more coordinate of the same move (no refactorization needed).

    ``factor(ell)`` returns the lower Cholesky factor of the jittered
    unit-variance Gram or raises :class:`CholeskyError`.

    Returns ``(f, ell, chol0, loglik, stalled, sigma2)``.
    """
    ell = np.array(np.atleast_1d(ell), dtype=float)
    nu = whiten(chol0, np.asarray(f, dtype=float)) / math.sqrt(sigma2)
    n_ell = ell.size
    x = np.log(ell)
    if log_prior_sigma2 is not None:
        x = np.append(x, math.log(sigma2))
    cache = {}

    def evaluate(xv):
        ev = np.exp(xv[:n_ell])
        s2 = math.exp(xv[n_ell]) if log_prior_sigma2 is not None else sigma2
        lp = log_prior(ev)
        if log_prior_sigma2 is not None:
            lp += log_prior_sigma2(s2)
        if not np.isfinite(lp):
            return -np.inf, None, None, None, None
        key = xv[:n_ell].tobytes()
        C = cache.get(key)
        if C is None:
            try:
                C = factor(ev)
            except CholeskyError:
                return -np.inf, None, None, None, None
            cache.clear()
            cache[key] = C
        fv = math.sqrt(s2) * (C @ nu)
        ll = loglik(fv)
        return lp + float(np.sum(xv)) + ll, C, fv, ll, s2

    cur, C_cur, f_cur, ll_cur, s2_cur = evaluate(x)
    if C_cur is None:
        C_cur, f_cur, s2_cur = chol0, np.asarray(f, dtype=float), sigma2
        ll_cur = loglik(f_cur)
    stalled = False
    for d in range(x.size):
        log_y = cur + math.log(rng.random() or np.finfo(float).tiny)

        def at(v, d=d):
            xv = x.copy()
            xv[d] = v
            return xv

        u = rng.random()
        left = x[d] - width * u
        right = left + width
        for _ in range(MAX_STEP_OUT):
            if evaluate(at(left))[0] <= log_y:
                break
            left -= width
        for _ in range(MAX_STEP_OUT):
            if evaluate(at(right))[0] <= log_y:
                break
            right += width
        while True:
            cand = rng.uniform(left, right)
            val, C, fv, ll, s2 = evaluate(at(cand))
            if val > log_y:
                x[d] = cand
                cur, C_cur, f_cur, ll_cur, s2_cur = val, C, fv, ll, s2
                break
            if cand < x[d]:
                left = cand
            else:
                right = cand
            if right - left < SHRINK_TOL:
                stalled = True
                break
    return f_cur, np.exp(x[:n_ell]), C_cur, ll_cur, stalled, s2_cur
