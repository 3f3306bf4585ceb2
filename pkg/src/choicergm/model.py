"""Sufficient statistics, change scores and graph potentials.

Two routes compute the same quantities. ``compute_stats`` counts
configurations on the whole adjacency matrix with numpy, while
``change_stat`` evaluates local toggle differences in compiled code. The
samplers only use the second, and the tests pin it to the first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.special import expit

from . import _kernels as K
from .control import ResolutionRule, edge_multiplicity
from .graph import Graph, GraphSupport

TERM_CODES = {
    "edges": K.EDGES,
    "two_star": K.TWO_STAR,
    "isolates": K.ISOLATES,
    "concurrent": K.CONCURRENT,
    "sociality": K.SOCIALITY,
    "nodematch": K.NODEMATCH,
    "nodematch_level": K.NODEMATCH_LEVEL,
    "absdiff": K.ABSDIFF,
    "edge_covariate": K.EDGE_COVARIATE,
    "local_triangle": K.LOCAL_TRIANGLE,
    "covariate_cyclic_ties": K.CYCLIC_TIES,
    "balance": K.BALANCE,
    "nsp0": K.NSP0,
    "triangle": K.TRIANGLE,
}
DYADIC_TERMS = {"edges", "sociality", "nodematch", "nodematch_level", "absdiff", "edge_covariate"}
_NEEDS_CATEGORICAL = {"nodematch", "nodematch_level", "covariate_cyclic_ties"}
_NEEDS_NUMERIC = {"absdiff"}
_NEEDS_COVARIATE = {"edge_covariate", "local_triangle"}


@dataclass(frozen=True)
class TermSpec:
    """One sufficient statistic.

    ``attribute`` names a categorical (nodematch*, covariate_cyclic_ties)
    or numeric (absdiff) vertex attribute, ``covariate`` names a dyadic
    matrix (edge_covariate, local_triangle), ``vertex`` selects the
    sociality vertex and ``level`` the matched level of nodematch_level.
    """

    kind: str
    vertex: Optional[int] = None
    attribute: Optional[str] = None
    level: object = None
    covariate: Optional[str] = None

    def __post_init__(self):
        if self.kind not in TERM_CODES:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.kind == "sociality" and self.vertex is None:
            raise ValueError("sociality term needs a vertex")
        if self.kind in _NEEDS_CATEGORICAL | _NEEDS_NUMERIC and not self.attribute:
            raise ValueError(f"{self.kind} term needs an attribute")
        if self.kind == "nodematch_level" and self.level is None:
            raise ValueError("nodematch_level term needs a level")
        if self.kind in _NEEDS_COVARIATE and not self.covariate:
            raise ValueError(f"{self.kind} term needs a dyadic covariate")

    @property
    def name(self) -> str:
        if self.kind == "sociality":
            return f"sociality.{self.vertex}"
        if self.kind == "nodematch_level":
            return f"nodematch.{self.attribute}.{self.level}"
        if self.attribute:
            return f"{self.kind}.{self.attribute}"
        if self.covariate:
            return f"{self.kind}.{self.covariate}"
        return self.kind

    @classmethod
    def parse(cls, obj) -> "TermSpec":
        if isinstance(obj, TermSpec):
            return obj
        if isinstance(obj, str):
            # "nodematch.office" / "edge_covariate.advice" shorthand
            kind, _, arg = obj.partition(".")
            if not arg:
                return cls(kind)
            if kind in _NEEDS_COVARIATE:
                return cls(kind, covariate=arg)
            return cls(kind, attribute=arg)
        return cls(**dict(obj))


def sociality_terms(n: int, reference_vertex: int = 0) -> list[TermSpec]:
    """Per-vertex degree effects with ``reference_vertex`` omitted."""
    return [TermSpec("sociality", vertex=v) for v in range(n) if v != reference_vertex]


@dataclass
class NodeData:
    categorical: dict = field(default_factory=dict)
    numeric: dict = field(default_factory=dict)
    covariates: dict = field(default_factory=dict)

    def __post_init__(self):
        self.categorical = {k: np.asarray(v) for k, v in self.categorical.items()}
        self.numeric = {k: np.asarray(v, dtype=float) for k, v in self.numeric.items()}
        self.covariates = {k: np.asarray(v, dtype=float) for k, v in self.covariates.items()}

    def check(self, n: int, directed: bool = False) -> None:
        for name, v in {**self.categorical, **self.numeric}.items():
            if v.shape != (n,):
                raise ValueError(f"attribute {name!r} has shape {v.shape}, expected ({n},)")
        for name, mat in self.covariates.items():
            if mat.shape != (n, n):
                raise ValueError(f"covariate {name!r} has shape {mat.shape}, expected ({n}, {n})")
            if not directed and not np.allclose(mat, mat.T):
                raise ValueError(f"covariate {name!r} must be symmetric for undirected graphs")


@dataclass(frozen=True)
class ReferenceMeasure:
    """Baseline weighting h(y), reduced to per-edge log weights."""

    kind: str = "counting"
    rule: Optional[ResolutionRule] = None

    def __post_init__(self):
        if self.kind not in ("counting", "norm_multiplicity", "krivitsky_sparse"):
            raise ValueError(f"unknown reference measure {self.kind!r}")
        if self.kind == "norm_multiplicity" and self.rule is None:
            raise ValueError("norm_multiplicity reference needs a resolution rule")

    @classmethod
    def counting(cls) -> "ReferenceMeasure":
        return cls("counting")

    @classmethod
    def multiplicity(cls, rule) -> "ReferenceMeasure":
        return cls("norm_multiplicity", ResolutionRule.parse(rule))

    def log_weights(self, n: int) -> tuple[float, float]:
        """(ln h'(1), ln h'(0)) for a graph of order ``n``."""
        if self.kind == "counting":
            return 0.0, 0.0
        if self.kind == "krivitsky_sparse":
            return -math.log(n), 0.0
        h1, h0 = edge_multiplicity(self.rule)
        return math.log(h1), math.log(h0)

    def edge_offset(self, n: int) -> float:
        w1, w0 = self.log_weights(n)
        return w1 - w0


@dataclass(frozen=True, eq=False)
class ModelSpec:
    terms: tuple
    theta: np.ndarray
    reference: ReferenceMeasure = ReferenceMeasure()
    support: Optional[GraphSupport] = None

    def __init__(self, terms, theta=None, reference=None, support=None):
        terms = tuple(TermSpec.parse(t) for t in terms)
        theta = np.zeros(len(terms)) if theta is None else np.array(theta, dtype=float).ravel()
        if theta.shape != (len(terms),):
            raise ValueError(f"theta has {theta.size} entries for {len(terms)} terms")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        theta.setflags(write=False)
        if reference is None:
            reference = ReferenceMeasure()
        elif not isinstance(reference, ReferenceMeasure):
            reference = ReferenceMeasure.multiplicity(reference)
        if support is not None and support.directed:
            bad = [t.kind for t in terms if t.kind not in DYADIC_TERMS]
            if bad:
                raise ValueError(f"terms {bad} are only defined for undirected graphs")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "support", support)

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.terms]

    def with_theta(self, theta) -> "ModelSpec":
        return ModelSpec(self.terms, theta, self.reference, self.support)

    def with_reference(self, reference) -> "ModelSpec":
        return ModelSpec(self.terms, self.theta, reference, self.support)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"model has no term {name!r}") from None


@dataclass(frozen=True)
class BoundTerms:
    """Kernel-ready arrays for a model bound to node data on ``n`` vertices."""

    n: int
    directed: bool
    kinds: np.ndarray
    ivals: np.ndarray
    cat: np.ndarray
    num: np.ndarray
    mats: np.ndarray
    midx: np.ndarray

    def args(self):
        return self.kinds, self.ivals, self.cat, self.num, self.mats, self.midx


def bind(m: ModelSpec, d: Optional[NodeData], n: int, directed: bool = False) -> BoundTerms:
    d = d if d is not None else NodeData()
    d.check(n, directed)
    if directed:
        bad = [t.kind for t in m.terms if t.kind not in DYADIC_TERMS]
        if bad:
            raise ValueError(f"terms {bad} are only defined for undirected graphs")
    p = len(m.terms)
    kinds = np.array([TERM_CODES[t.kind] for t in m.terms], dtype=np.int64)
    ivals = np.zeros(p, dtype=np.int64)
    cat = np.zeros((p, n), dtype=np.int64)
    num = np.zeros((p, n), dtype=np.float64)
    midx = np.zeros(p, dtype=np.int64)
    mats = [np.zeros((n, n))]
    for k, t in enumerate(m.terms):
        if t.kind == "sociality":
            if not 0 <= t.vertex < n:
                raise ValueError(f"sociality vertex {t.vertex} out of range for n={n}")
            ivals[k] = t.vertex
        if t.kind in _NEEDS_CATEGORICAL:
            if t.attribute not in d.categorical:
                raise KeyError(f"unresolved categorical attribute {t.attribute!r}")
            levels, codes = np.unique(d.categorical[t.attribute], return_inverse=True)
            cat[k] = codes
            if t.kind == "nodematch_level":
                hit = np.flatnonzero(levels.astype(str) == str(t.level))
                ivals[k] = hit[0] if hit.size else -1
        if t.kind in _NEEDS_NUMERIC:
            if t.attribute not in d.numeric:
                raise KeyError(f"unresolved numeric attribute {t.attribute!r}")
            num[k] = d.numeric[t.attribute]
        if t.kind in _NEEDS_COVARIATE:
            if t.covariate not in d.covariates:
                raise KeyError(f"unresolved dyadic covariate {t.covariate!r}")
            mat = d.covariates[t.covariate]
            if t.kind == "local_triangle":
                mat = (mat != 0).astype(float)
            midx[k] = len(mats)
            mats.append(mat)
    return BoundTerms(n, directed, kinds, ivals, cat, num, np.ascontiguousarray(np.stack(mats)), midx)


def _pair_sum(g: Graph, weights: np.ndarray) -> float:
    a = g.adj.astype(float)
    total = float((a * weights).sum())
    return total if g.directed else total / 2.0


def _triangles(a: np.ndarray) -> float:
    return float(np.trace(a @ a @ a)) / 6.0


def _stat(g: Graph, t: TermSpec, d: NodeData) -> float:
    a = g.adj.astype(np.int64)
    n = g.n
    deg = a.sum(axis=1)
    kind = t.kind
    if kind == "edges":
        return float(g.n_edges())
    if kind == "two_star":
        return float((deg * (deg - 1) // 2).sum())
    if kind == "isolates":
        return float((deg == 0).sum())
    if kind == "concurrent":
        return float((deg >= 2).sum())
    if kind == "sociality":
        return float(deg[t.vertex])
    if kind in ("nodematch", "nodematch_level", "covariate_cyclic_ties"):
        if t.attribute not in d.categorical:
            raise KeyError(f"unresolved categorical attribute {t.attribute!r}")
        c = d.categorical[t.attribute].astype(str)
        same = c[:, None] == c[None, :]
        if kind == "nodematch":
            return _pair_sum(g, same)
        if kind == "nodematch_level":
            lv = c == str(t.level)
            return _pair_sum(g, same & lv[:, None] & lv[None, :])
        in_triangle = (a @ a) > 0
        return float(np.triu(a * same * in_triangle).sum())
    if kind == "absdiff":
        if t.attribute not in d.numeric:
            raise KeyError(f"unresolved numeric attribute {t.attribute!r}")
        x = d.numeric[t.attribute]
        return _pair_sum(g, np.abs(x[:, None] - x[None, :]))
    if kind == "edge_covariate":
        if t.covariate not in d.covariates:
            raise KeyError(f"unresolved dyadic covariate {t.covariate!r}")
        return _pair_sum(g, d.covariates[t.covariate])
    if kind == "local_triangle":
        if t.covariate not in d.covariates:
            raise KeyError(f"unresolved dyadic covariate {t.covariate!r}")
        c = (d.covariates[t.covariate] != 0).astype(np.int64)
        return _triangles(a * c)
    if kind == "triangle":
        return _triangles(a)
    if kind == "balance":
        tri = _triangles(a)
        m = g.n_edges()
        e2 = float((deg * (deg - 1) // 2).sum()) - 3 * tri
        e1 = m * (n - 2) - 2 * e2 - 3 * tri
        e0 = math.comb(n, 3) - e1 - e2 - tri
        return e0 + tri
    if kind == "nsp0":
        sp = a @ a
        null = (a == 0) & (sp == 0)
        return float(np.triu(null, k=1).sum())
    raise ValueError(f"unknown term kind {kind!r}")


def compute_stats(g: Graph, m: ModelSpec, d: Optional[NodeData] = None) -> np.ndarray:
    d = d if d is not None else NodeData()
    if m.support is not None and not m.support.contains(g):
        raise ValueError("graph does not belong to the model support")
    d.check(g.n, g.directed)
    if g.directed:
        bad = [t.kind for t in m.terms if t.kind not in DYADIC_TERMS]
        if bad:
            raise ValueError(f"terms {bad} are only defined for undirected graphs")
        out = []
        for t in m.terms:
            if t.kind == "sociality":
                out.append(float(g.adj[t.vertex].sum()))
            else:
                out.append(_stat(g, t, d))
        return np.array(out)
    return np.array([_stat(g, t, d) for t in m.terms])


def change_stat(g: Graph, e, m: ModelSpec, d: Optional[NodeData] = None,
                bound: Optional[BoundTerms] = None) -> np.ndarray:
    i, j = int(e[0]), int(e[1])
    if i == j:
        raise ValueError("self-loop is not an edge variable")
    b = bound if bound is not None else bind(m, d, g.n, g.directed)
    out = np.zeros(len(m.terms))
    K.change_stats(g.adj, i, j, g.directed, *b.args(), out)
    return out


def log_reference(g: Graph, reference: ReferenceMeasure) -> float:
    """ln h(y) up to a graph-independent constant: t_e(y) * ln(h'(1)/h'(0))."""
    return g.n_edges() * reference.edge_offset(g.n)


def graph_potential(g: Graph, m: ModelSpec, d: Optional[NodeData] = None) -> float:
    return float(m.theta @ compute_stats(g, m, d)) + log_reference(g, m.reference)


def conditional_edge_prob(g: Graph, e, m: ModelSpec, d: Optional[NodeData] = None,
                          bound: Optional[BoundTerms] = None) -> float:
    delta = float(m.theta @ change_stat(g, e, m, d, bound)) + m.reference.edge_offset(g.n)
    return float(expit(delta))


def edge_probability_matrix(g: Graph, m: ModelSpec, d: Optional[NodeData] = None) -> np.ndarray:
    """Conditional edge probabilities for every dyad given the rest of ``g``."""
    b = bind(m, d, g.n, g.directed)
    p = np.zeros((g.n, g.n))
    for i in range(g.n):
        for j in range(g.n):
            if i != j and (g.directed or i < j):
                p[i, j] = conditional_edge_prob(g, (i, j), m, d, b)
                if not g.directed:
                    p[j, i] = p[i, j]
    return p


@dataclass
class Descriptives:
    density: float
    mean_degree: float
    centralization: float
    isolates: int
    components: int
    degree_distribution: np.ndarray
    esp_distribution: np.ndarray
    geodesic_distribution: np.ndarray
    unreachable_pairs: int
    diameter: float
    median_geodesic: float

    def scalars(self) -> dict:
        return {
            "density": self.density,
            "mean_degree": self.mean_degree,
            "centralization": self.centralization,
            "isolates": self.isolates,
            "components": self.components,
            "unreachable_pairs": self.unreachable_pairs,
            "diameter": self.diameter,
            "median_geodesic": self.median_geodesic,
        }


def degree_centralization(g: Graph) -> float:
    """Freeman degree centralization of the (symmetrized) graph."""
    n = g.n
    if n < 3:
        return 0.0
    a = g.adj | g.adj.T
    deg = a.sum(axis=1)
    return float((deg.max() - deg).sum()) / ((n - 1) * (n - 2))


def descriptives(g: Graph) -> Descriptives:
    """Summary statistics used by adequacy panels and experiments.

    Directed graphs are symmetrized for degree, ESP and geodesic summaries;
    density keeps the directed dyad count.
    """
    n = g.n
    if n < 2:
        raise ValueError("descriptives need at least two vertices")
    a = (g.adj | g.adj.T).astype(np.int64)
    deg = a.sum(axis=1)
    m_und = int(a.sum()) // 2
    density = g.n_edges() / g.support.n_edge_variables
    sp = a @ a
    iu = np.triu_indices(n, k=1)
    esp = np.bincount(sp[iu][a[iu] == 1], minlength=n - 1)[: n - 1]
    dist = shortest_path(a, method="D", unweighted=True, directed=False)[iu]
    finite = dist[np.isfinite(dist)].astype(np.int64)
    geo = np.bincount(finite, minlength=n)[1:n]
    n_comp = connected_components(a, directed=False)[0]
    return Descriptives(
        density=float(density),
        mean_degree=2.0 * m_und / n,
        centralization=degree_centralization(g),
        isolates=int((deg == 0).sum()),
        components=int(n_comp),
        degree_distribution=np.bincount(deg, minlength=n)[:n],
        esp_distribution=esp,
        geodesic_distribution=geo,
        unreachable_pairs=int((~np.isfinite(dist)).sum()),
        diameter=float(finite.max()) if finite.size else 0.0,
        median_geodesic=float(np.median(finite)) if finite.size else float("inf"),
    )
