import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netgp.distances import distance_matrix
from netgp.graph import Graph
from netgp.kernels import (
    JITTER_LADDER,
    CholeskyError,
    GramMatrix,
    SqExpHyper,
    additive_sqexp,
    cross_covariance,
    random_walk_features,
    random_walk_gram,
    random_walk_matrix,
    sqexp,
    sqexp_gram,
    squared_differences,
    stabilized_cholesky,
    survival_gram,
    walk_counts,
)

from conftest import path_graph, sym, weighted_graphs


def test_hyper_validation():
    with pytest.raises(ValueError):
        SqExpHyper(0.0, 1.0)
    with pytest.raises(ValueError):
        SqExpHyper(1.0, (1.0, -2.0))
    assert SqExpHyper(2.0, (1.0, 3.0)).length_scales.tolist() == [1.0, 3.0]


def test_sqexp_uses_squared_distance_directly():
    # D is already squared, so K = s2 * exp(-ell * D) with no further squaring
    assert sqexp(np.array([[0.0, 4.0]]), 2.0, 0.5)[0, 1] == pytest.approx(2.0 * np.exp(-2.0))


def test_cholesky_no_jitter_when_pd():
    K = np.array([[2.0, 0.5], [0.5, 1.0]])
    C, j = stabilized_cholesky(K)
    assert j == 0.0 and np.allclose(C @ C.T, K)


def test_cholesky_escalates_on_singular():
    K = np.ones((4, 4))
    C, j = stabilized_cholesky(K)
    assert j in [r * 1.0 for r in JITTER_LADDER[1:]]
    assert np.allclose(C @ C.T, K + j * np.eye(4))


def test_cholesky_min_jitter_floor():
    K = np.eye(3) * 2.0
    _, j = stabilized_cholesky(K, min_jitter=1e-6)
    assert j == pytest.approx(2e-6)


def test_cholesky_failure_reports_spectrum():
    K = np.diag([1.0, -5.0, 1.0])
    with pytest.raises(CholeskyError, match="eigenvalues"):
        stabilized_cholesky(K)


def test_gram_solve():
    K = np.array([[2.0, 0.3], [0.3, 1.0]])
    G = GramMatrix.build(K)
    assert np.allclose(K @ G.solve(np.array([1.0, 2.0])), [1.0, 2.0])


@settings(max_examples=25)
@given(st.lists(weighted_graphs(n=6, signed=True), min_size=3, max_size=12),
       st.floats(0.05, 20.0), st.floats(0.01, 50.0),
       st.sampled_from(["frobenius", "spectral-signed"]))
def test_graph_gram_is_psd(graphs, s2, ell, kind):
    D = distance_matrix(graphs, kind)
    K = sqexp(D.values, s2, ell)
    assert np.linalg.eigvalsh(K)[0] >= -1e-10 * s2 * len(graphs)
    G = sqexp_gram(D, SqExpHyper(s2, ell))
    assert np.allclose(G.chol @ G.chol.T, K + G.jitter * np.eye(len(graphs)))


def test_additive_and_survival_gram():
    DG = np.array([[0.0, 1.0], [1.0, 0.0]])
    t = np.array([1.0, 3.0])
    DT = squared_differences(t)
    Dx = squared_differences(np.array([0.0, 1.0]))
    h = SqExpHyper(2.0, (0.5, 0.25, 1.0))
    G = survival_gram(DG, DT, [Dx], h, min_jitter=0.0)
    expect = 2.0 * (np.exp(-0.5 * DG) + np.exp(-0.25 * DT) + np.exp(-1.0 * Dx))
    assert np.allclose(G.K, expect)
    assert G.jitter >= 0
    with pytest.raises(ValueError):
        additive_sqexp([DG, DT], [1.0])


def test_survival_gram_default_jitter_floor():
    G = survival_gram(np.zeros((2, 2)), np.zeros((2, 2)), [], SqExpHyper(1.0, (1.0, 1.0)))
    # all-equal inputs: singular, needs at least the survival floor
    assert G.jitter >= 1e-6 * 2.0


def test_cross_covariance_single_and_additive():
    h = SqExpHyper(3.0, 0.5)
    assert np.allclose(cross_covariance(np.array([0.0, 2.0]), h), 3.0 * np.exp([0.0, -1.0]))
    h2 = SqExpHyper(1.0, (1.0, 2.0))
    got = cross_covariance([np.array([1.0]), np.array([0.5])], h2)
    assert got == pytest.approx(np.exp(-1.0) + np.exp(-1.0))


def _rw_kron(a, b, steps, decay):
    Ax = np.kron(a.weights, b.weights)
    one = np.ones(Ax.shape[0])
    total, P = 0.0, np.eye(Ax.shape[0])
    for s in range(steps + 1):
        total += decay ** s * one @ P @ one
        P = P @ Ax
    return total


def test_walk_counts_path():
    # P3: 3 nodes, 4 directed 1-walks, 6 2-walks
    assert walk_counts(path_graph(3), 2).tolist() == [3.0, 4.0, 6.0]


@settings(max_examples=20)
@given(weighted_graphs(n=4, binary=True), weighted_graphs(n=5, binary=True),
       st.integers(0, 4), st.floats(0.001, 0.5))
def test_random_walk_matches_kronecker(a, b, steps, decay):
    # different orders are fine for the product-graph kernel
    K = random_walk_matrix([a], steps, decay, others=[b])[0, 0]
    assert K == pytest.approx(_rw_kron(a, b, steps, decay), rel=1e-10)


def test_random_walk_example_value():
    # two triangles, k = 2, decay 0.1: sum_s 0.1^s (3 * 2^s)^2 = 9 + 3.6 + 1.44
    tri = Graph(sym(np.ones((3, 3))))
    K = random_walk_matrix([tri, tri], steps=2, decay=0.1)
    assert K[0, 1] == pytest.approx(14.04)


def test_random_walk_normalize_divides_by_n_squared():
    g = path_graph(4)
    raw = random_walk_matrix([g], 3, 0.05)
    norm = random_walk_matrix([g], 3, 0.05, normalize=True)
    assert norm[0, 0] == pytest.approx(raw[0, 0] / 16)


def test_random_walk_requires_binary():
    g = Graph(sym([[0, 0.3], [0, 0]]))
    with pytest.raises(ValueError, match="threshold_binarize"):
        random_walk_features([g])


@settings(max_examples=20)
@given(st.lists(weighted_graphs(n=5, binary=True), min_size=2, max_size=8))
def test_random_walk_gram_psd(graphs):
    K = random_walk_matrix(graphs, 3, 0.01)
    assert np.array_equal(K, K.T)
    assert np.linalg.eigvalsh(K)[0] >= -1e-9 * np.abs(K).max()
    random_walk_gram(graphs)
