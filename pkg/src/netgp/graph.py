"""Network covariates and their matrix representations."""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

SYMMETRY_TOL = 1e-10


class GraphError(ValueError):
    pass


class Graph:
    """Undirected simple weighted graph stored as a dense adjacency matrix.

    Weights may be any real number (correlation networks carry negative
    weights).  The matrix is validated to be symmetric with a zero diagonal
    up to ``SYMMETRY_TOL`` and is then stored exactly symmetric and read-only.
    """

    __slots__ = ("_w",)

    def __init__(self, weights):
        w = np.array(weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise GraphError(f"adjacency must be square, got shape {w.shape}")
        if w.shape[0] < 2:
            raise GraphError("a graph needs at least 2 nodes")
        if not np.all(np.isfinite(w)):
            raise GraphError("adjacency contains non-finite weights")
        asym = np.abs(w - w.T)
        if asym.max() > SYMMETRY_TOL:
            i, j = np.unravel_index(np.argmax(asym), asym.shape)
            raise GraphError(
                f"adjacency not symmetric at ({i}, {j}): {float(w[i, j])!r} != {float(w[j, i])!r}"
            )
        diag = np.abs(np.diag(w))
        if diag.max() > SYMMETRY_TOL:
            i = int(np.argmax(diag))
            raise GraphError(f"self loop at node {i}: weight {float(w[i, i])!r}")
        w = 0.5 * (w + w.T)
        np.fill_diagonal(w, 0.0)
        w.setflags(write=False)
        self._w = w

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def n(self) -> int:
        return self._w.shape[0]

    @property
    def has_negative(self) -> bool:
        return bool((self._w < 0).any())

    @property
    def is_binary(self) -> bool:
        return bool(np.isin(self._w, (0.0, 1.0)).all())

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self._w.shape == other._w.shape and np.array_equal(self._w, other._w)

    def __hash__(self):
        return hash(self._w.tobytes())

    def __repr__(self):
        return f"Graph(n={self.n}, edges={int(np.count_nonzero(self._w) // 2)})"


def _check_nonnegative(g: Graph, what: str):
    if g.has_negative:
        raise GraphError(
            f"{what} is undefined for negative weights; use signed_laplacian"
        )


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``D - W`` of a non-negative graph."""
    _check_nonnegative(g, "laplacian")
    w = g.weights
    return np.diag(w.sum(axis=1)) - w


def normalized_laplacian(g: Graph) -> np.ndarray:
    """Symmetric normalized Laplacian ``I - D^{-1/2} W D^{-1/2}``.

    Isolated nodes (zero strength) get an all-zero row and column,
    including a zero diagonal entry.
    """
    _check_nonnegative(g, "normalized_laplacian")
    w = g.weights
    strength = w.sum(axis=1)
    connected = strength > 0
    inv_sqrt = np.zeros_like(strength)
    inv_sqrt[connected] = 1.0 / np.sqrt(strength[connected])
    lap = -(inv_sqrt[:, None] * w * inv_sqrt[None, :])
    lap[np.diag_indices_from(lap)] = connected.astype(float)
    return lap


def signed_laplacian(g: Graph) -> np.ndarray:
    """Laplacian with absolute strengths on the diagonal; valid for any sign."""
    w = g.weights
    return np.diag(np.abs(w).sum(axis=1)) - w


LAPLACIANS = {
    "laplacian": laplacian,
    "normalized": normalized_laplacian,
    "signed": signed_laplacian,
}


def spectrum(m) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, sorted ascending."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10):
        raise ValueError("spectrum requires a symmetric matrix")
    try:
        vals = la.eigvalsh(m)
    except la.LinAlgError as exc:
        cond = np.linalg.cond(m) if np.all(np.isfinite(m)) else float("nan")
        raise la.LinAlgError(
            f"eigensolver failed for {m.shape[0]}x{m.shape[0]} matrix "
            f"(condition number {cond:.3g}, max |entry| {np.abs(m).max():.3g})"
        ) from exc
    return np.sort(vals)


def graph_spectrum(g: Graph, variant: str = "normalized") -> np.ndarray:
    try:
        lap = LAPLACIANS[variant]
    except KeyError:
        raise ValueError(
            f"unknown Laplacian variant {variant!r}; choose from {sorted(LAPLACIANS)}"
        ) from None
    return spectrum(lap(g))
