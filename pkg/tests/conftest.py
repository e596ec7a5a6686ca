import numpy as np
from hypothesis import strategies as st

from netgp.graph import Graph


def sym(w):
    w = np.triu(np.asarray(w, dtype=float), 1)
    return w + w.T


@st.composite
def weighted_graphs(draw, n=None, signed=False, binary=False):
    n = draw(st.integers(2, 8)) if n is None else n
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    if binary:
        w = (rng.random((n, n)) < draw(st.floats(0.1, 0.9))).astype(float)
    else:
        lo = -1.0 if signed else 0.0
        w = rng.uniform(lo, 1.0, (n, n))
    return Graph(sym(w))


def path_graph(n):
    w = np.zeros((n, n))
    i = np.arange(n - 1)
    w[i, i + 1] = w[i + 1, i] = 1.0
    return Graph(w)
