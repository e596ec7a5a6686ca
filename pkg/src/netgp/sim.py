"""Random graph models and synthetic outcome designs for the simulation studies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .graph import Graph

SMALL_WORLD_RADIUS = 2
PA_EDGES_PER_STEP = 1

SBM_MINUS = ((0.05, 0.15), (0.15, 0.05))
SBM_PLUS = ((0.10, 0.15), (0.15, 0.05))

# per-class parameters; the first entry is class -1, the second class +1
DEFAULT_PARAMS = {
    "small-world": {"rewire": (0.05, 0.07)},
    "sbm": {"link": (SBM_MINUS, SBM_PLUS)},
    "corr-er": {"parent_p": 0.8, "rho": 0.8},
    "pref-attach": {"power": (0.6, 1.4)},
    "er": {"p": (0.3, 0.7)},
}
MODELS = tuple(DEFAULT_PARAMS)


def _from_upper(n, upper_mask) -> Graph:
    w = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    w[iu] = upper_mask.astype(float)
    return Graph(w + w.T)


def gen_er(n: int, p: float, rng) -> Graph:
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    return _from_upper(n, rng.random(n * (n - 1) // 2) < p)


def gen_small_world(n: int, rewire_p: float, rng, radius: int = SMALL_WORLD_RADIUS) -> Graph:
    """Ring lattice (each node linked to ``radius`` neighbours per side) with rewiring.

    Each lattice edge ``(u, v)`` is visited once; with probability
    ``rewire_p`` its far endpoint is moved to a uniformly chosen node that
    is neither ``u`` nor already adjacent to it, so the edge count is kept.
    """
    if n < 5:
        raise ValueError("small-world graphs need n >= 5")
    if not 0 <= rewire_p <= 1:
        raise ValueError("rewire_p must be in [0, 1]")
    adj = np.zeros((n, n), dtype=bool)
    edges = [(u, (u + k) % n) for k in range(1, radius + 1) for u in range(n)]
    for u, v in edges:
        adj[u, v] = adj[v, u] = True
    for u, v in edges:
        if rng.random() >= rewire_p:
            continue
        free = np.flatnonzero(~adj[u])
        free = free[free != u]
        if free.size == 0:
            continue
        w = free[rng.integers(free.size)]
        adj[u, v] = adj[v, u] = False
        adj[u, w] = adj[w, u] = True
    return Graph(adj.astype(float))


def gen_sbm(n: int, link, rng) -> Graph:
    """Two equal communities; each dyad is Bernoulli with its block-pair probability."""
    if n % 2:
        raise ValueError("SBM with two equal blocks needs even n")
    link = np.asarray(link, dtype=float)
    if link.shape != (2, 2) or not np.allclose(link, link.T):
        raise ValueError("link matrix must be a symmetric 2x2 matrix")
    if np.any((link < 0) | (link > 1)):
        raise ValueError("link probabilities must lie in [0, 1]")
    block = np.repeat([0, 1], n // 2)
    iu = np.triu_indices(n, 1)
    probs = link[block[iu[0]], block[iu[1]]]
    return _from_upper(n, rng.random(probs.size) < probs)


def gen_corr_er(base: Graph, retain_rho: float, rng) -> Graph:
    """Keep each edge of a binary parent independently with probability ``retain_rho``."""
    if not base.is_binary:
        raise ValueError("correlated ER needs a binary parent graph")
    if not 0 <= retain_rho <= 1:
        raise ValueError("retain_rho must be in [0, 1]")
    n = base.n
    iu = np.triu_indices(n, 1)
    parent = base.weights[iu] > 0
    return _from_upper(n, parent & (rng.random(parent.size) < retain_rho))


def gen_pref_attach(n: int, power: float, rng) -> Graph:
    """Sequential attachment, one edge per new node, P(j) ~ degree_j^power + 1."""
    if n < 2:
        raise ValueError("preferential attachment needs n >= 2")
    if not power > 0:
        raise ValueError("power must be > 0")
    w = np.zeros((n, n))
    deg = np.zeros(n)
    for t in range(1, n):
        weights = deg[:t] ** power + 1.0
        j = rng.choice(t, p=weights / weights.sum())
        w[t, j] = w[j, t] = 1.0
        deg[t] += 1
        deg[j] += 1
    return Graph(w)


@dataclass(frozen=True)
class SimDesign:
    """Two-class graph design: ``m`` graphs in total, ``plus_fraction`` of them class +1."""

    model: str
    m: int
    n: int
    seed: int = 0
    params: dict = field(default_factory=dict)
    plus_fraction: float = 0.5

    def __post_init__(self):
        if self.model == "ergm":
            raise ValueError(
                "ERGM generation is not supported: it needs an ERGM sampler "
                "(model terms and MCMC settings) that is not specified"
            )
        if self.model not in DEFAULT_PARAMS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.plus_fraction == 0.5 and self.m % 2:
            raise ValueError("balanced two-class designs need even m")
        if not 0 < self.plus_fraction < 1:
            raise ValueError("plus_fraction must be in (0, 1)")

    @property
    def resolved_params(self) -> dict:
        out = dict(DEFAULT_PARAMS[self.model])
        out.update(self.params)
        return out

    @property
    def class_counts(self) -> tuple[int, int]:
        n_plus = int(round(self.m * self.plus_fraction))
        return self.m - n_plus, n_plus


def simulate_classification(design: SimDesign, rng=None):
    """Graphs and +/-1 labels (class -1 first) for a two-class design."""
    rng = np.random.default_rng(design.seed) if rng is None else rng
    p = design.resolved_params
    n = design.n
    counts = design.class_counts
    graphs, labels = [], []
    if design.model == "corr-er":
        parents = [gen_er(n, p["parent_p"], rng) for _ in range(2)]
    for cls, (label, count) in enumerate(zip((-1, 1), counts)):
        for _ in range(count):
            if design.model == "small-world":
                g = gen_small_world(n, p["rewire"][cls], rng)
            elif design.model == "sbm":
                g = gen_sbm(n, p["link"][cls], rng)
            elif design.model == "corr-er":
                g = gen_corr_er(parents[cls], p["rho"], rng)
            elif design.model == "pref-attach":
                g = gen_pref_attach(n, p["power"][cls], rng)
            else:
                g = gen_er(n, p["p"][cls], rng)
            graphs.append(g)
            labels.append(label)
    return graphs, np.array(labels)


# (weight, mean, sd) mixture components per case and group, before truncation to t > 0
SURVIVAL_CASES = {
    "easy": (((1.0, 2.0, 0.8),), ((1.0, 4.0, 1.0),)),
    "hard": (((1.0, 3.0, 0.8),), ((0.4, 4.0, 1.0), (0.6, 2.0, 0.8))),
}


def _mixture(case, group):
    try:
        return SURVIVAL_CASES[case][group]
    except KeyError:
        raise ValueError(f"unknown survival case {case!r} / group {group!r}") from None


def sample_truncated_mixture(components, size, rng) -> np.ndarray:
    """Draw from a normal mixture restricted to (0, inf) by rejection."""
    w = np.array([c[0] for c in components])
    out = np.empty(0)
    while out.size < size:
        k = rng.choice(len(components), size=size, p=w / w.sum())
        mu = np.array([components[j][1] for j in k])
        sd = np.array([components[j][2] for j in k])
        x = rng.normal(mu, sd)
        out = np.concatenate([out, x[x > 0]])
    return out[:size]


def true_survival(case: str, group: int, t) -> np.ndarray:
    """Survival function of the truncated mixture generating group ``group``."""
    comps = _mixture(case, group)
    t = np.asarray(t, dtype=float)
    sf = sum(w * stats.norm.sf(t, mu, sd) for w, mu, sd in comps)
    z = sum(w * stats.norm.sf(0.0, mu, sd) for w, mu, sd in comps)
    return np.minimum(sf / z, 1.0)


@dataclass
class SurvivalSample:
    graphs: list
    times: np.ndarray
    groups: np.ndarray


def gen_survival_case(case: str, m: int, n: int = 50, p0: float = 0.3, p1: float = 0.7,
                      rng=None) -> SurvivalSample:
    """``m`` subjects per group; group 0 pairs with ER(n, p0), group 1 with ER(n, p1)."""
    if m < 2:
        raise ValueError("m must be >= 2")
    rng = np.random.default_rng() if rng is None else rng
    graphs, times, groups = [], [], []
    for group, p in enumerate((p0, p1)):
        t = sample_truncated_mixture(_mixture(case, group), m, rng)
        for ti in t:
            graphs.append(gen_er(n, p, rng))
            times.append(ti)
            groups.append(group)
    return SurvivalSample(graphs, np.array(times), np.array(groups))
