"""One-class anomaly scores from a GP classifier posterior, with elbow thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifier import ClassifierPosterior, LabeledDataset, predict

SCORE_NAMES = ("mu", "var", "prob", "H")


@dataclass(frozen=True)
class Elbow:
    """Cut at the largest jump among sorted scores.

    ``split`` counts the scores on the low side; ``degenerate`` is set when
    every score is equal and no cut exists (threshold is NaN then).
    """

    threshold: float
    split: int
    degenerate: bool = False

    def side(self, values) -> np.ndarray:
        """+1 above the threshold, -1 below (0 everywhere when degenerate)."""
        values = np.asarray(values, dtype=float)
        if self.degenerate:
            return np.zeros(values.shape, dtype=int)
        return np.where(values > self.threshold, 1, -1)


def elbow_threshold(scores) -> Elbow:
    s = np.asarray(scores, dtype=float).ravel()
    s = np.sort(s[np.isfinite(s)])
    if s.size < 3:
        raise ValueError(f"elbow thresholding needs >= 3 finite scores, got {s.size}")
    gaps = np.diff(s)
    k = int(np.argmax(gaps))
    if gaps[k] == 0:
        return Elbow(math.nan, 0, degenerate=True)
    return Elbow(float(0.5 * (s[k] + s[k + 1])), k + 1)


@dataclass
class OccScores:
    mu: np.ndarray
    var: np.ndarray
    prob: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        if np.any(self.var < 0):
            raise ValueError("predictive variance must be >= 0")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in SCORE_NAMES}

    def thresholds(self) -> dict:
        """Elbow cut per score; scores with too few finite values map to None."""
        out = {}
        for name, v in self.as_dict().items():
            try:
                out[name] = elbow_threshold(v)
            except ValueError:
                out[name] = None
        return out


def occ_scores(post: ClassifierPosterior, data: LabeledDataset, D_new, self_sim=None,
               mode: str = "plugin") -> OccScores:
    """Predictive mean, variance, membership probability and H = mu / sd.

    H is +inf where the predictive variance is exactly zero.
    """
    pred = predict(post, data, D_new, mode=mode, self_sim=self_sim)
    sd = np.sqrt(pred.variance)
    with np.errstate(divide="ignore", invalid="ignore"):
        H = np.where(sd > 0, pred.mean / np.where(sd > 0, sd, 1.0), np.inf)
    return OccScores(pred.mean, pred.variance, pred.prob, H)


def anomalous_side(elbow: Elbow, train_scores) -> int:
    """Side (+1 above / -1 below) of ``elbow`` opposite the training centroid.

    Infinite training scores (H at zero variance) count toward the centroid.
    Returns 0 when the cut is degenerate or the centroid undefined.
    """
    v = np.asarray(train_scores, dtype=float)
    v = v[~np.isnan(v)]
    if elbow.degenerate or v.size == 0:
        return 0
    with np.errstate(invalid="ignore"):
        centre = float(np.mean(v))
    if math.isnan(centre):
        return 0
    return -1 if centre > elbow.threshold else 1
