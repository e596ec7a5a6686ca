import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netgp.graph import (
    Graph,
    GraphError,
    graph_spectrum,
    laplacian,
    normalized_laplacian,
    signed_laplacian,
    spectrum,
)

from conftest import path_graph, sym, weighted_graphs


def test_rejects_asymmetric_and_names_entry():
    w = sym(np.ones((3, 3)))
    w[0, 2] += 1e-6
    with pytest.raises(GraphError, match=r"\(0, 2\)|\(2, 0\)"):
        Graph(w)


def test_tolerates_tiny_asymmetry_and_symmetrizes():
    w = sym(np.ones((3, 3)))
    w[1, 2] += 5e-11
    g = Graph(w)
    assert np.array_equal(g.weights, g.weights.T)


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.zeros((1, 1)), np.eye(3),
                                 np.array([[0, np.nan], [np.nan, 0]])])
def test_rejects_malformed(bad):
    with pytest.raises(GraphError):
        Graph(bad)


def test_weights_read_only():
    g = path_graph(3)
    with pytest.raises(ValueError):
        g.weights[0, 1] = 5.0


def test_path_laplacian_spectra():
    # P3: combinatorial eigenvalues 0, 1, 3; normalized 0, 1, 2
    g = path_graph(3)
    assert np.allclose(graph_spectrum(g, "laplacian"), [0, 1, 3])
    assert np.allclose(graph_spectrum(g, "normalized"), [0, 1, 2])


def test_normalized_laplacian_isolated_node():
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 2.0
    L = normalized_laplacian(Graph(w))
    assert np.all(L[2] == 0) and np.all(L[:, 2] == 0)
    assert np.allclose(L[:2, :2], [[1, -1], [-1, 1]])


def test_unsigned_laplacians_refuse_negative_weights():
    g = Graph(sym([[0, -0.5], [0, 0]]))
    with pytest.raises(GraphError, match="signed"):
        laplacian(g)
    with pytest.raises(GraphError):
        normalized_laplacian(g)
    assert np.allclose(signed_laplacian(g), [[0.5, 0.5], [0.5, 0.5]])


def test_unknown_variant():
    with pytest.raises(ValueError, match="variant"):
        graph_spectrum(path_graph(3), "random-walk")


def test_spectrum_requires_symmetry():
    with pytest.raises(ValueError):
        spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]))


@given(weighted_graphs())
def test_laplacian_rows_sum_to_zero_and_psd(g):
    L = laplacian(g)
    assert np.allclose(L.sum(axis=1), 0, atol=1e-12)
    assert spectrum(L)[0] > -1e-10


@given(weighted_graphs())
def test_normalized_spectrum_in_0_2(g):
    lam = graph_spectrum(g, "normalized")
    assert lam[0] > -1e-10 and lam[-1] < 2 + 1e-10
    assert np.all(np.diff(lam) >= 0)


@given(weighted_graphs(signed=True))
def test_signed_laplacian_psd(g):
    assert graph_spectrum(g, "signed")[0] > -1e-10


@settings(max_examples=50)
@given(weighted_graphs(), st.randoms(use_true_random=False))
def test_spectrum_permutation_invariant(g, rnd):
    perm = list(range(g.n))
    rnd.shuffle(perm)
    h = Graph(g.weights[np.ix_(perm, perm)])
    for v in ("laplacian", "normalized", "signed"):
        assert np.allclose(graph_spectrum(g, v), graph_spectrum(h, v), atol=1e-10)


@given(weighted_graphs(signed=True))
def test_signed_matches_plain_on_nonnegative_part(g):
    gp = Graph(np.abs(g.weights))
    # with non-negative weights the two definitions coincide
    assert np.allclose(signed_laplacian(gp), laplacian(gp))


def test_equality_and_hash():
    a, b = path_graph(4), path_graph(4)
    assert a == b and hash(a) == hash(b)
    assert a != path_graph(5)
