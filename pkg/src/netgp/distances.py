"""Pairwise graph distances and the cached distance matrix."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import Graph, GraphError, graph_spectrum

KINDS = ("frobenius", "spectral-laplacian", "spectral-normalized", "spectral-signed")
DEFAULT_SPECTRAL = "normalized"


def _check_order(g1: Graph, g2: Graph):
    if g1.n != g2.n:
        raise ValueError(f"graph orders differ: {g1.n} vs {g2.n}")


def frobenius_distance(g1: Graph, g2: Graph) -> float:
    """Squared Frobenius norm of ``W1 - W2`` over ordered pairs, divided by n(n-1)."""
    _check_order(g1, g2)
    n = g1.n
    diff = g1.weights - g2.weights
    return float(np.sum(diff * diff) / (n * (n - 1)))


def spectral_distance(g1: Graph, g2: Graph, variant: str = DEFAULT_SPECTRAL) -> float:
    """Sum of squared differences of the sorted Laplacian eigenvalues."""
    _check_order(g1, g2)
    diff = graph_spectrum(g1, variant) - graph_spectrum(g2, variant)
    return float(np.sum(diff * diff))


def _variant_of(kind: str) -> str | None:
    if kind not in KINDS:
        raise ValueError(f"unknown distance kind {kind!r}; choose from {KINDS}")
    if kind == "frobenius":
        return None
    return kind.split("-", 1)[1]


def spectral_kind_for(graphs: Sequence[Graph], variant: str = DEFAULT_SPECTRAL) -> str:
    """Spectral kind to use for ``graphs``: signed when any weight is negative."""
    if variant != "signed" and any(g.has_negative for g in graphs):
        return "spectral-signed"
    return f"spectral-{variant}"


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"distance matrix must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValueError("distance matrix must be exactly symmetric")
        if np.any(np.diag(v) != 0) or np.any(v < 0):
            raise ValueError("distance matrix needs a zero diagonal and entries >= 0")
        _variant_of(self.kind)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def restrict(self, rows, cols=None) -> np.ndarray:
        """Sub-block ``values[rows][:, cols]``; rows alone gives a square block."""
        rows = np.asarray(rows)
        cols = rows if cols is None else np.asarray(cols)
        return self.values[np.ix_(rows, cols)]

    def subset(self, idx) -> "DistanceMatrix":
        return DistanceMatrix(self.restrict(idx), self.kind)

    def to_csv(self, path):
        path = Path(path)
        with path.open("w") as fh:
            fh.write(f"# kind={self.kind} m={self.m}\n")
            for row in self.values:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DistanceMatrix":
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().strip()
            if not header.startswith("#"):
                raise ValueError(f"{path}: missing metadata line")
            meta = dict(tok.split("=", 1) for tok in header[1:].split())
            rows = [
                [float(x) for x in line.split(",")]
                for line in fh
                if line.strip()
            ]
        values = np.array(rows, dtype=float)
        m = int(meta["m"])
        if values.shape != (m, m):
            raise ValueError(f"{path}: expected {m}x{m} entries, got {values.shape}")
        return cls(values, meta["kind"])


def distance_matrix(graphs: Sequence[Graph], kind: str = "spectral-normalized") -> DistanceMatrix:
    """All pairwise distances among ``graphs``.

    Spectra are computed once per graph; each unordered pair is evaluated
    once and mirrored, so the result is exactly symmetric.
    """
    graphs = list(graphs)
    m = len(graphs)
    if m < 2:
        raise ValueError("need at least two graphs")
    n = graphs[0].n
    for k, g in enumerate(graphs):
        if g.n != n:
            raise ValueError(f"graph {k} has order {g.n}, expected {n}")
    variant = _variant_of(kind)
    if variant is None:
        feats = np.stack([g.weights.ravel() for g in graphs])
        scale = 1.0 / (n * (n - 1))
    else:
        if variant != "signed":
            bad = [k for k, g in enumerate(graphs) if g.has_negative]
            if bad:
                raise GraphError(
                    f"graphs {bad[:5]} have negative weights; use spectral-signed"
                )
        feats = np.stack([graph_spectrum(g, variant) for g in graphs])
        scale = 1.0
    out = np.zeros((m, m))
    for i in range(m - 1):
        diff = feats[i + 1:] - feats[i]
        d = np.einsum("ij,ij->i", diff, diff) * scale
        out[i, i + 1:] = d
        out[i + 1:, i] = d
    return DistanceMatrix(out, kind)


def cross_distances(new: Sequence[Graph], train: Sequence[Graph], kind: str) -> np.ndarray:
    """Rectangular ``len(new) x len(train)`` distance block."""
    variant = _variant_of(kind)
    if variant is None:
        return np.array([[frobenius_distance(a, b) for b in train] for a in new])
    sa = np.stack([graph_spectrum(g, variant) for g in new])
    sb = np.stack([graph_spectrum(g, variant) for g in train])
    diff = sa[:, None, :] - sb[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)
