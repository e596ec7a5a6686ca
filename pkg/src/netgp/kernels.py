"""Covariance matrices built from graph distances, plus jittered Cholesky."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .graph import Graph

JITTER_LADDER = (0.0, 1e-8, 1e-6, 1e-4, 1e-2)
SURVIVAL_MIN_JITTER = 1e-6


class CholeskyError(la.LinAlgError):
    pass


@dataclass(frozen=True)
class SqExpHyper:
    """Signal variance and length-scale(s).

    For the additive survival kernel ``length_scale`` is a tuple ordered
    ``(graph, time, covariate_1, ..., covariate_p)``.
    """

    signal_variance: float
    length_scale: float | tuple = 1.0

    def __post_init__(self):
        if not self.signal_variance > 0:
            raise ValueError(f"signal variance must be > 0, got {self.signal_variance}")
        if not np.all(np.asarray(self.length_scale, dtype=float) > 0):
            raise ValueError(f"length scales must be > 0, got {self.length_scale}")

    @property
    def length_scales(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.length_scale, dtype=float))


def stabilized_cholesky(K, min_jitter: float = 0.0):
    """Lower Cholesky factor of ``K + jitter*I`` with the smallest workable jitter.

    Jitter is tried from ``JITTER_LADDER`` (relative to the mean diagonal),
    skipping rungs below ``min_jitter``.  Returns ``(C, jitter)``.
    """
    K = np.asarray(K, dtype=float)
    scale = float(np.mean(np.diag(K)))
    if not scale > 0:
        scale = 1.0
    rungs = [r for r in JITTER_LADDER if r >= min_jitter] or [min_jitter]
    eye = np.eye(K.shape[0])
    for rung in rungs:
        jitter = rung * scale
        try:
            C = la.cholesky(K + jitter * eye if jitter else K, lower=True, check_finite=False)
        except la.LinAlgError:
            continue
        if np.all(np.isfinite(C)):
            return C, jitter
    if np.all(np.isfinite(K)):
        eig = la.eigvalsh(K)
        diag = f"eigenvalues in [{eig[0]:.3g}, {eig[-1]:.3g}]"
    else:
        diag = "matrix has non-finite entries"
    raise CholeskyError(
        f"Cholesky failed for {K.shape[0]}x{K.shape[0]} matrix at max jitter "
        f"{rungs[-1] * scale:.3g}; {diag}"
    )


@dataclass(frozen=True)
class GramMatrix:
    K: np.ndarray
    chol: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @classmethod
    def build(cls, K, min_jitter: float = 0.0) -> "GramMatrix":
        C, jitter = stabilized_cholesky(K, min_jitter)
        return cls(K, C, jitter)

    def solve(self, b):
        return la.cho_solve((self.chol, True), b, check_finite=False)


def sqexp(D, signal_variance: float, length_scale: float) -> np.ndarray:
    return signal_variance * np.exp(-length_scale * np.asarray(D, dtype=float))


def sqexp_gram(D, h: SqExpHyper, min_jitter: float = 0.0) -> GramMatrix:
    """``K[i, j] = s2 * exp(-ell * D[i, j])``; D holds already-squared distances."""
    D = getattr(D, "values", D)
    return GramMatrix.build(sqexp(D, h.signal_variance, float(h.length_scale)), min_jitter)


def additive_sqexp(blocks: Sequence[np.ndarray], length_scales) -> np.ndarray:
    """Unit-variance sum ``sum_b exp(-ell_b * D_b)`` over distance blocks."""
    length_scales = np.atleast_1d(length_scales)
    if len(blocks) != len(length_scales):
        raise ValueError(f"{len(blocks)} blocks but {len(length_scales)} length scales")
    out = np.exp(-length_scales[0] * blocks[0])
    for ell, D in zip(length_scales[1:], blocks[1:]):
        if D.shape != out.shape:
            raise ValueError(f"block shape {D.shape} does not match {out.shape}")
        out = out + np.exp(-ell * D)
    return out


def squared_differences(a, b=None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = a if b is None else np.asarray(b, dtype=float)
    return (a[:, None] - b[None, :]) ** 2


def survival_gram(D_G, D_T, D_p, h: SqExpHyper, min_jitter: float = SURVIVAL_MIN_JITTER) -> GramMatrix:
    """Additive graph + time + covariate kernel with a shared signal variance."""
    D_G = getattr(D_G, "values", D_G)
    blocks = [np.asarray(D_G, float), np.asarray(D_T, float)] + [np.asarray(d, float) for d in D_p]
    K = h.signal_variance * additive_sqexp(blocks, h.length_scales)
    return GramMatrix.build(K, min_jitter)


def cross_covariance(d_new, h: SqExpHyper) -> np.ndarray:
    """Covariance between a test point and the training points.

    ``d_new`` is a length-m vector of distances for a single-block kernel, or
    a sequence of such vectors (one per block) for the additive kernel.
    """
    ells = h.length_scales
    if len(ells) == 1:
        return sqexp(d_new, h.signal_variance, ells[0])
    blocks = [np.asarray(d, float) for d in d_new]
    if len({b.shape for b in blocks}) != 1:
        raise ValueError("distance vectors have mismatched lengths")
    return h.signal_variance * additive_sqexp(blocks, ells)


def walk_counts(g: Graph, steps: int) -> np.ndarray:
    """``1' A^s 1`` for s = 0..steps: number of walks of each length."""
    A = g.weights
    v = np.ones(g.n)
    counts = [float(g.n)]
    for _ in range(steps):
        v = A @ v
        counts.append(float(v.sum()))
    return np.array(counts)


def _check_binary(graphs):
    for k, g in enumerate(graphs):
        if not g.is_binary:
            raise ValueError(
                f"graph {k} is not binary; threshold it first (threshold_binarize)"
            )


def random_walk_features(graphs: Sequence[Graph], steps: int = 3, decay: float = 0.01,
                         normalize: bool = False) -> np.ndarray:
    """Feature map whose inner products give the k-step random-walk kernel.

    With uniform start/stop vectors the product-graph walk count factorizes,
    ``1'(A (x) B)^s 1 = (1'A^s 1)(1'B^s 1)``, so each graph maps to
    ``decay^(s/2) * walks_s``.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not decay > 0:
        raise ValueError("decay must be > 0")
    graphs = list(graphs)
    _check_binary(graphs)
    weights = decay ** (np.arange(steps + 1) / 2.0)
    feats = np.stack([walk_counts(g, steps) for g in graphs]) * weights
    if normalize:
        feats = feats / np.array([g.n for g in graphs], dtype=float)[:, None]
    return feats


def random_walk_matrix(graphs, steps: int = 3, decay: float = 0.01,
                       normalize: bool = False, others=None) -> np.ndarray:
    """Raw random-walk kernel values (rows ``graphs``, columns ``others``)."""
    fa = random_walk_features(graphs, steps, decay, normalize)
    fb = fa if others is None else random_walk_features(others, steps, decay, normalize)
    K = fa @ fb.T
    if others is None:
        K = 0.5 * (K + K.T)
    return K


def random_walk_gram(graphs, steps: int = 3, decay: float = 0.01,
                     normalize: bool = False) -> GramMatrix:
    """k-step random-walk kernel on the direct product graph.

    ``K[i, j] = sum_{s<=k} decay^s 1'(A_i (x) A_j)^s 1``.  With
    ``normalize`` every entry is divided by n^2.
    """
    return GramMatrix.build(random_walk_matrix(graphs, steps, decay, normalize))
