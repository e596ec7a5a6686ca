"""Splits, cross-validation and scoring for the GP graph classifiers."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .classifier import ClassifierConfig, LabeledDataset, fit, predict
from .distances import distance_matrix, spectral_kind_for
from .io import substream, threshold_binarize
from .kernels import random_walk_matrix
from .sim import SimDesign, simulate_classification

log = logging.getLogger(__name__)

METHODS = ("gp-f", "gp-lambda", "gp-rw")
SCHEMES = ("split", "loocv", "kfold")


def auc(scores, labels) -> float:
    """Mann-Whitney estimate of P(score_+ > score_-), ties counting one half.

    Returns NaN when only one class is present.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        return math.nan
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def n_train_per_class(n_class: int, train_fraction: float) -> int:
    """floor(fraction * n), kept within [1, n - 1] so both sides are non-empty."""
    return min(max(int(math.floor(train_fraction * n_class)), 1), n_class - 1)


def stratified_split(labels, train_fraction: float, rng):
    """Per-class random split; returns sorted (train, test) index arrays."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    labels = np.asarray(labels)
    train, test = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        if idx.size < 2:
            raise ValueError(f"class {c} has fewer than 2 members; cannot split")
        k = n_train_per_class(idx.size, train_fraction)
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def kfold_indices(labels, k: int, rng):
    """Stratified folds: each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels)
    if not 2 <= k <= labels.size:
        raise ValueError(f"k must be in [2, {labels.size}]")
    fold = np.empty(labels.size, dtype=int)
    offset = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        fold[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    all_idx = np.arange(labels.size)
    return [(all_idx[fold != j], all_idx[fold == j]) for j in range(k)]


def loocv_indices(m: int):
    all_idx = np.arange(m)
    return [(np.delete(all_idx, i), np.array([i])) for i in range(m)]


@dataclass(frozen=True)
class KernelInput:
    """Either a distance matrix (length-scale kernels) or a fixed unit Gram."""

    values: np.ndarray
    is_gram: bool = False

    def train(self, idx, labels) -> LabeledDataset:
        block = self.values[np.ix_(idx, idx)]
        if self.is_gram:
            return LabeledDataset(None, labels, fixed_gram=block)
        return LabeledDataset(block, labels)

    def test(self, test_idx, train_idx):
        cross = self.values[np.ix_(test_idx, train_idx)]
        self_sim = np.diag(self.values)[test_idx] if self.is_gram else None
        return cross, self_sim


def kernel_input(graphs, method: str, variant: str = "normalized", rw_steps: int = 3,
                 rw_decay: float = 0.01, rw_normalize: bool = False,
                 binarize: float | None = None) -> KernelInput:
    """Precompute the full pairwise input once; splits only slice it."""
    if method == "gp-f":
        return KernelInput(distance_matrix(graphs, "frobenius").values)
    if method == "gp-lambda":
        return KernelInput(distance_matrix(graphs, spectral_kind_for(graphs, variant)).values)
    if method == "gp-rw":
        if binarize is not None:
            graphs = [threshold_binarize(g, binarize) for g in graphs]
        return KernelInput(random_walk_matrix(graphs, rw_steps, rw_decay, rw_normalize), True)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def gp_fit_predict(kin: KernelInput, labels, cfg: ClassifierConfig, mode: str = "plugin"):
    """Default fold runner: fit on train, return test probabilities."""
    labels = np.asarray(labels)

    def run(train_idx, test_idx, rng):
        data = kin.train(train_idx, labels[train_idx])
        post = fit(data, cfg, rng=rng)
        cross, self_sim = kin.test(test_idx, train_idx)
        return predict(post, data, cross, mode=mode, self_sim=self_sim).prob
    return run


@dataclass
class EvalReport:
    accuracies: list = field(default_factory=list)
    aucs: list = field(default_factory=list)
    confusions: list = field(default_factory=list)  # per replicate: tp, tn, fp, fn
    skipped: list = field(default_factory=list)
    runtime: float = 0.0

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else math.nan

    @property
    def sd_accuracy(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if len(self.accuracies) > 1 else 0.0

    @property
    def mean_auc(self) -> float:
        vals = [a for a in self.aucs if not math.isnan(a)]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def sd_auc(self) -> float:
        vals = [a for a in self.aucs if not math.isnan(a)]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    @property
    def confusion(self) -> dict:
        keys = ("tp", "tn", "fp", "fn")
        return {k: sum(c[k] for c in self.confusions) for k in keys}

    @property
    def n_scored(self) -> int:
        return sum(self.confusion.values())

    def add(self, probs, truth):
        """Score one replicate's pooled held-out predictions."""
        probs = np.asarray(probs, dtype=float)
        truth = np.asarray(truth)
        pred = np.where(probs >= 0.5, 1, -1)
        self.accuracies.append(float(np.mean(pred == truth)))
        self.aucs.append(auc(probs, truth))
        self.confusions.append({
            "tp": int(np.sum((pred == 1) & (truth == 1))),
            "tn": int(np.sum((pred == -1) & (truth == -1))),
            "fp": int(np.sum((pred == 1) & (truth == -1))),
            "fn": int(np.sum((pred == -1) & (truth == 1))),
        })

    def rows(self):
        """CSV rows: header, one per replicate, then mean and sd (runtime excluded)."""
        out = [("replicate", "accuracy", "auc", "tp", "tn", "fp", "fn")]
        for r, (a, u, c) in enumerate(zip(self.accuracies, self.aucs, self.confusions)):
            out.append((str(r), repr(a), repr(u), *(str(c[k]) for k in ("tp", "tn", "fp", "fn"))))
        tot = self.confusion
        out.append(("mean", repr(self.mean_accuracy), repr(self.mean_auc),
                    *(str(tot[k]) for k in ("tp", "tn", "fp", "fn"))))
        out.append(("sd", repr(self.sd_accuracy), repr(self.sd_auc), "", "", "", ""))
        return out


@dataclass(frozen=True)
class CVSpec:
    scheme: str = "split"
    train_fraction: float = 0.75
    folds: int = 5
    replicates: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")


def _folds(spec: CVSpec, labels, rng):
    if spec.scheme == "split":
        return [stratified_split(labels, spec.train_fraction, rng)]
    if spec.scheme == "loocv":
        return loocv_indices(len(labels))
    return kfold_indices(labels, spec.folds, rng)


def run_cv(spec: CVSpec, labels, fit_predict: Callable) -> EvalReport:
    """Evaluate ``fit_predict(train_idx, test_idx, rng) -> probabilities``.

    Each replicate pools its folds' held-out predictions before scoring,
    so LOOCV gives one accuracy/AUC per replicate.  Folds whose training
    part holds a single class are skipped and listed in ``skipped``.
    """
    labels = np.asarray(labels)
    report = EvalReport()
    t0 = time.perf_counter()
    for r in range(spec.replicates):
        split_rng = substream(spec.seed, f"split/{r}")
        fit_rng = substream(spec.seed, f"sampler/{r}")
        probs, truth = [], []
        for j, (tr, te) in enumerate(_folds(spec, labels, split_rng)):
            if np.unique(labels[tr]).size < 2:
                report.skipped.append((r, j))
                log.warning("replicate %d fold %d skipped: single class in training", r, j)
                continue
            probs.append(np.asarray(fit_predict(tr, te, fit_rng), dtype=float))
            truth.append(labels[te])
        if probs:
            report.add(np.concatenate(probs), np.concatenate(truth))
    report.runtime = time.perf_counter() - t0
    return report


def simulation_study(design: SimDesign, methods=("gp-f", "gp-lambda"), replicates: int = 10,
                     cfg: ClassifierConfig = ClassifierConfig(), train_fraction: float = 0.75,
                     seed: int = 0, mode: str = "plugin", **kernel_kw) -> dict:
    """Fresh simulated data per replicate; every method sees the same split.

    Returns ``{method: EvalReport}``.
    """
    reports = {meth: EvalReport() for meth in methods}
    for r in range(replicates):
        graphs, labels = simulate_classification(
            replace(design, seed=seed), substream(seed, f"generator/{r}"))
        tr, te = stratified_split(labels, train_fraction, substream(seed, f"split/{r}"))
        for meth in methods:
            t0 = time.perf_counter()
            kin = kernel_input(graphs, meth, **kernel_kw)
            run = gp_fit_predict(kin, labels, cfg, mode)
            probs = run(tr, te, substream(seed, f"sampler/{meth}/{r}"))
            reports[meth].add(probs, labels[te])
            reports[meth].runtime += time.perf_counter() - t0
    return reports


@dataclass
class OccRun:
    """Held-out scores for a one-class fit, plus in-sample scores for orientation."""

    test_idx: np.ndarray
    scores: object  # OccScores on the test points
    train_scores: object  # OccScores on the training points
    elbows: dict
    sides: dict  # score -> anomalous side (+1 above / -1 below / 0 degenerate)

    def flagged(self, score: str = "prob") -> np.ndarray:
        """Boolean mask over test points falling on the anomalous side."""
        side = self.sides[score]
        if side == 0:
            return np.zeros(self.test_idx.size, bool)
        return self.elbows[score].side(getattr(self.scores, score)) == side


def run_occ(kin: KernelInput, labels, normal_class: int, cfg: ClassifierConfig, rng,
            split_rng, train_fraction: float = 0.75, mode: str = "plugin") -> OccRun:
    """Stratified split, then fit on the training members of ``normal_class`` only.

    Training members of the other class are dropped; the whole held-out part
    (both classes) is scored.
    """
    from .occ import anomalous_side, occ_scores

    labels = np.asarray(labels)
    if np.sum(labels == normal_class) < 3:
        raise ValueError("need at least 3 members of the normal class")
    train, test = stratified_split(labels, train_fraction, split_rng)
    train = train[labels[train] == normal_class]
    data = kin.train(train, np.ones(train.size))
    post = fit(data, cfg, rng=rng)
    cross, self_sim = kin.test(test, train)
    scores = occ_scores(post, data, cross, self_sim=self_sim, mode=mode)
    cross_tr, self_tr = kin.test(train, train)
    train_scores = occ_scores(post, data, cross_tr, self_sim=self_tr, mode=mode)
    elbows = scores.thresholds()
    sides = {}
    for name, e in elbows.items():
        sides[name] = 0 if e is None else anomalous_side(e, getattr(train_scores, name))
    return OccRun(test, scores, train_scores, elbows, sides)
