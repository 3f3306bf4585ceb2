"""Edge-updating dynamics, Gibbs sampling and exact small-system equilibria."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, logsumexp

from . import _kernels as K
from .control import (
    ControlStructure,
    ProsphoricArray,
    ResolutionRule,
    log_multiplicity,
    resolve,
)
from .graph import (
    Graph,
    GraphSupport,
    SupportTooLargeError,
    decode,
    edge_index_arrays,
    enumerate_graphs,
)
from .model import ModelSpec, NodeData, bind, conditional_edge_prob, graph_potential

MAX_ORACLE_STATES = 4096
_BLOCK = 1 << 16


class UpdateEvent(NamedTuple):
    agent: object
    sender: int
    receiver: int
    time: float = 0.0


@dataclass(frozen=True)
class UpdateSchedule:
    """How edge-updating opportunities are drawn.

    ``uniform_random_scan`` picks an (edge variable, controller slot) pair
    uniformly at each event; ``systematic_sweep`` cycles through the pairs in
    edge-major order; ``poisson_clocks`` gives each pair an exponential
    clock with the given ``rates`` (scalar or an array of shape
    ``(n_edge_variables, ell)``) and keeps event times.
    """

    kind: str = "uniform_random_scan"
    rates: object = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("uniform_random_scan", "systematic_sweep", "poisson_clocks"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.rates is not None and np.any(np.asarray(self.rates, dtype=float) <= 0):
            raise ValueError("every (controller, edge) pair needs a positive rate")

    def selection_probabilities(self, m: int, ell: int) -> np.ndarray:
        """Per-event selection distribution over pairs, flattened as slot * m + edge."""
        if self.kind == "poisson_clocks" and self.rates is not None:
            r = np.broadcast_to(np.asarray(self.rates, dtype=float), (m, ell))
            w = r.T.ravel()
            return w / w.sum()
        return np.full(m * ell, 1.0 / (m * ell))


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 0
    thin: int = 1
    n_samples: int = 1
    initial: object = "empty"
    keep_prosphoric: bool = False

    def __post_init__(self):
        if self.burn_in < 0 or self.thin < 1 or self.n_samples < 1:
            raise ValueError("need burn_in >= 0, thin >= 1 and n_samples >= 1")


@dataclass
class EquilibriumDistribution:
    support: GraphSupport
    codes: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if np.any(self.probabilities < 0) or abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to one")

    @property
    def graphs(self) -> list[Graph]:
        return [decode(int(c), self.support.n, self.support.directed) for c in self.codes]

    def as_dict(self) -> dict:
        return dict(zip(self.codes.tolist(), self.probabilities.tolist()))

    def prob(self, g: Graph) -> float:
        return self.as_dict().get(g.code(), 0.0)

    def tv(self, other: Union["EquilibriumDistribution", dict]) -> float:
        a = self.as_dict()
        b = other.as_dict() if isinstance(other, EquilibriumDistribution) else dict(other)
        keys = set(a) | set(b)
        return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)

    def edge_marginals(self) -> np.ndarray:
        m = self.support.n_edge_variables
        bits = (self.codes[:, None] >> np.arange(m)) & 1
        return self.probabilities @ bits

    def expected_density(self) -> float:
        return float(self.edge_marginals().mean())

    @classmethod
    def from_codes(cls, support: GraphSupport, codes) -> "EquilibriumDistribution":
        values, counts = np.unique(np.asarray(codes, dtype=np.int64), return_counts=True)
        return cls(support, values, counts / counts.sum())


def _default_control(support: GraphSupport, rule: ResolutionRule,
                     cs: Optional[ControlStructure]) -> ControlStructure:
    if cs is None:
        if rule.ell > 2:
            agents = tuple(f"agent{k}" for k in range(rule.ell))
            return ControlStructure.shared(support, agents)
        return ControlStructure.standard(support, rule.ell)
    if cs.control_number != rule.ell:
        raise ValueError(f"control number {cs.control_number} does not match rule {rule.label}")
    if not cs.covers(support):
        raise ValueError("control structure does not cover every edge variable")
    return cs


def gibbs_step(g: Graph, e, m: ModelSpec, d: Optional[NodeData], rng) -> Graph:
    """One single-site update of edge ``e`` from its full conditional."""
    p = conditional_edge_prob(g, e, m, d)
    return g.set_edge(e, 1 if rng.random() < p else 0)


def choice_step(p: ProsphoricArray, ev: UpdateEvent, m: ModelSpec, rule,
                cs: ControlStructure, d: Optional[NodeData], rng) -> ProsphoricArray:
    """The updating agent resets its own decision by logistic choice."""
    rule = ResolutionRule.parse(rule)
    e = (ev.sender, ev.receiver)
    slot = cs.slot_of(e, ev.agent)
    plus = p.set_cell(slot, e, 1)
    minus = p.set_cell(slot, e, 0)
    y_plus = resolve(plus, rule)
    y_minus = resolve(minus, rule)
    if y_plus == y_minus:
        prob = 0.5
    else:
        q = conditional_edge_prob(y_plus, e, m, d)
        prob = q if y_plus.has_edge(*e) else 1.0 - q
    return plus if rng.random() < prob else minus


def _initial_state(cfg_initial, n: int, ell: int, directed: bool, rule: ResolutionRule, rng):
    if isinstance(cfg_initial, ProsphoricArray):
        return np.array(cfg_initial.slices, dtype=np.uint8)
    P = np.zeros((ell, n, n), dtype=np.uint8)
    if isinstance(cfg_initial, Graph):
        target = cfg_initial.adj
        # any preimage works; pick the lexically first decision vector per state
        table = rule.truth_table()
        v1 = int(np.flatnonzero(table == 1)[0])
        v0 = int(np.flatnonzero(table == 0)[0])
        for r in range(ell):
            P[r] = np.where(target == 1, (v1 >> r) & 1, (v0 >> r) & 1)
            np.fill_diagonal(P[r], 0)
        return P
    kind, arg = (cfg_initial, None) if isinstance(cfg_initial, str) else tuple(cfg_initial)
    if kind == "empty":
        return P
    if kind == "full":
        P[:] = 1
    elif kind == "random":
        prob = 0.5 if arg is None else float(arg)
        P[:] = rng.random((ell, n, n)) < prob
    else:
        raise ValueError(f"unknown initial state {cfg_initial!r}")
    for r in range(ell):
        np.fill_diagonal(P[r], 0)
        if not directed:
            P[r] = np.triu(P[r], 1) + np.triu(P[r], 1).T
    return P


class Chain:
    """Mutable chain state driven by the compiled event loop.

    The manifest graph and the prosphoric array evolve together; a
    unilateral rule makes this the single-site Gibbs sampler.
    """

    def __init__(self, m: ModelSpec, d: Optional[NodeData], n: int, directed: bool = False,
                 rule=None, schedule: Optional[UpdateSchedule] = None, initial="empty",
                 rng=None, edge_offset: float = 0.0):
        self.rule = ResolutionRule.parse(rule) if rule is not None else ResolutionRule.unilateral()
        self.schedule = schedule or UpdateSchedule()
        self.rng = rng if rng is not None else np.random.default_rng(self.schedule.seed)
        self.n, self.directed = n, directed
        self.bound = bind(m, d, n, directed)
        self.theta = np.ascontiguousarray(m.theta, dtype=np.float64)
        self.offset = float(m.reference.edge_offset(n) + edge_offset)
        self.table = self.rule.truth_table().astype(np.int64)
        self.ei, self.ej = edge_index_arrays(n, directed)
        self.m = len(self.ei)
        ell = self.rule.ell
        self.P = _initial_state(initial, n, ell, directed, self.rule, self.rng)
        self.Y = self.rule.apply(np.moveaxis(self.P, 0, -1)).astype(np.uint8)
        np.fill_diagonal(self.Y, 0)
        self._probs = self.schedule.selection_probabilities(self.m, ell)
        self._position = 0
        self.time = 0.0
        self.events = 0

    def reset(self, initial="empty") -> None:
        """Restart from a new initial state, keeping the generator and parameters."""
        self.P = _initial_state(initial, self.n, self.rule.ell, self.directed, self.rule, self.rng)
        self.Y = self.rule.apply(np.moveaxis(self.P, 0, -1)).astype(np.uint8)
        np.fill_diagonal(self.Y, 0)
        self._position = 0
        self.time = 0.0
        self.events = 0

    def _draw(self, count: int):
        ell = self.rule.ell
        kind = self.schedule.kind
        if kind == "systematic_sweep":
            pos = (self._position + np.arange(count)) % (self.m * ell)
            self._position = int((self._position + count) % (self.m * ell))
            edge, slot = pos // ell, pos % ell
        elif kind == "poisson_clocks" and self.schedule.rates is not None:
            flat = self.rng.choice(self.m * ell, size=count, p=self._probs)
            slot, edge = flat // self.m, flat % self.m
        else:
            edge = self.rng.integers(0, self.m, size=count)
            slot = self.rng.integers(0, ell, size=count)
        if kind == "poisson_clocks":
            total = 1.0 if self.schedule.rates is None else float(
                np.broadcast_to(np.asarray(self.schedule.rates, float), (self.m, ell)).sum())
            self.time += float(self.rng.exponential(1.0 / total, size=count).sum())
        u = self.rng.random(count)
        return edge.astype(np.int64), slot.astype(np.int64), u

    def advance(self, n_events: int, record_every: int = 0) -> np.ndarray:
        """Run ``n_events`` events; optionally return bit codes every ``record_every``."""
        if record_every and self.m > 62:
            raise ValueError("bit-code recording needs at most 62 edge variables")
        out = []
        left = n_events
        block = _BLOCK if not record_every else max(record_every, (_BLOCK // record_every) * record_every)
        while left > 0:
            c = min(block, left)
            if record_every:
                c = max(record_every, (c // record_every) * record_every)
            edge, slot, u = self._draw(c)
            codes = np.zeros(c // record_every if record_every else 0, dtype=np.int64)
            K.run_events(self.Y, self.P, self.table, self.ei, self.ej, edge, slot, u,
                         self.directed, *self.bound.args(), self.theta, self.offset,
                         record_every, codes)
            out.append(codes)
            left -= c
            self.events += c
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def graph(self) -> Graph:
        return Graph(self.Y, self.directed)

    def prosphoric(self) -> ProsphoricArray:
        return ProsphoricArray(self.P, self.directed)


@dataclass
class CrossSection:
    graph: Graph
    prosphoric: Optional[ProsphoricArray] = None
    events: int = 0
    time: float = 0.0


def run_choice_process(m: ModelSpec, rule, cs: Optional[ControlStructure], d: Optional[NodeData],
                       schedule: Optional[UpdateSchedule], cfg: ChainConfig, rng=None,
                       support: Optional[GraphSupport] = None, n: Optional[int] = None,
                       edge_offset: float = 0.0) -> list[CrossSection]:
    """Iterate logistic-choice updates and return thinned manifest cross-sections."""
    rule = ResolutionRule.parse(rule)
    support = support or m.support or (GraphSupport(n) if n is not None else None)
    if support is None:
        raise ValueError("give a support (or n) for the simulated graph")
    _default_control(support, rule, cs)
    chain = Chain(m, d, support.n, support.directed, rule, schedule, cfg.initial, rng, edge_offset)
    chain.advance(cfg.burn_in)
    out = []
    for _ in range(cfg.n_samples):
        chain.advance(cfg.thin)
        out.append(CrossSection(chain.graph(), chain.prosphoric() if cfg.keep_prosphoric else None,
                                chain.events, chain.time))
    return out


def simulate(m: ModelSpec, d: Optional[NodeData], cfg: ChainConfig, rng=None, n: Optional[int] = None,
             directed: bool = False, edge_offset: float = 0.0) -> list[Graph]:
    """Draw graphs from ERGM(m) with the single-site Gibbs sampler."""
    support = m.support or GraphSupport(n, directed)
    xs = run_choice_process(m, "unilateral", None, d, None, cfg, rng, support, edge_offset=edge_offset)
    return [x.graph for x in xs]


def sample_codes(m: ModelSpec, d: Optional[NodeData], support: GraphSupport, cfg: ChainConfig,
                 rng=None, rule=None, schedule=None) -> np.ndarray:
    """Bit codes of thinned cross-sections (small supports only)."""
    rule = ResolutionRule.parse(rule) if rule is not None else ResolutionRule.unilateral()
    chain = Chain(m, d, support.n, support.directed, rule, schedule, cfg.initial, rng)
    chain.advance(cfg.burn_in)
    return chain.advance(cfg.thin * cfg.n_samples, record_every=cfg.thin)


def exact_equilibrium(m: ModelSpec, rule, cs: Optional[ControlStructure], d: Optional[NodeData],
                      support: GraphSupport) -> EquilibriumDistribution:
    """Closed-form limit: multiplicity times exp(potential), normalized over the support."""
    rule = ResolutionRule.parse(rule)
    _default_control(support, rule, cs)
    codes, logw = [], []
    for g in enumerate_graphs(support):
        codes.append(g.code())
        logw.append(log_multiplicity(g, rule) + graph_potential(g, m, d))
    logw = np.array(logw)
    return EquilibriumDistribution(support, np.array(codes), np.exp(logw - logsumexp(logw)))


def _transition_kernels(m, rule, d, support):
    """One sparse kernel per (slot, edge) cell over all prosphoric states."""
    ell = rule.ell
    n_edges = support.n_edge_variables
    bits = ell * n_edges
    n_states = 1 << bits
    states = np.arange(n_states, dtype=np.int64)
    cells = (states[:, None] >> np.arange(bits)) & 1
    decisions = cells.reshape(-1, ell, n_edges).transpose(0, 2, 1)
    manifest = rule.apply(decisions)
    gcodes = (manifest.astype(np.int64) << np.arange(n_edges)).sum(axis=1)
    potential = {}
    for c in np.unique(gcodes):
        potential[int(c)] = graph_potential(decode(int(c), support.n, support.directed), m, d)
    rho = np.array([potential[int(c)] for c in gcodes])
    kernels = []
    for cell in range(bits):
        mask = 1 << cell
        plus = states | mask
        minus = states & ~mask
        p1 = expit(rho[plus] - rho[minus])
        rows = np.concatenate([states, states])
        cols = np.concatenate([plus, minus])
        vals = np.concatenate([p1, 1.0 - p1])
        kernels.append(sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states)))
    return kernels, gcodes


def stationary_oracle(m: ModelSpec, rule, cs: Optional[ControlStructure], d: Optional[NodeData],
                      support: GraphSupport, schedule: Optional[UpdateSchedule] = None,
                      tol: float = 1e-12, max_iter: int = 1_000_000) -> EquilibriumDistribution:
    """Stationary law of the embedded chain on prosphoric states, pushed through resolve.

    Builds the exact one-event transition matrix (or the full-sweep matrix for
    ``systematic_sweep``) and solves it by power iteration.
    """
    rule = ResolutionRule.parse(rule)
    schedule = schedule or UpdateSchedule()
    _default_control(support, rule, cs)
    n_states = 1 << (rule.ell * support.n_edge_variables)
    if n_states > MAX_ORACLE_STATES:
        raise SupportTooLargeError(
            f"{n_states} prosphoric states exceed the oracle bound {MAX_ORACLE_STATES}"
        )
    kernels, gcodes = _transition_kernels(m, rule, d, support)
    if schedule.kind == "systematic_sweep":
        # edge-major cycle: for each edge, each slot in turn
        T = sp.identity(n_states, format="csr")
        m_edges = support.n_edge_variables
        for e in range(m_edges):
            for s in range(rule.ell):
                T = T @ kernels[s * m_edges + e]
    else:
        q = schedule.selection_probabilities(support.n_edge_variables, rule.ell)
        T = sum(w * k for w, k in zip(q, kernels))
    T = sp.csr_matrix(T)
    TT = T.T.tocsr()
    pi = np.full(n_states, 1.0 / n_states)
    for _ in range(max_iter):
        nxt = TT @ pi
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            pi = nxt
            break
        pi = nxt
    else:
        raise RuntimeError("power iteration did not reach the residual tolerance")
    if np.any(pi <= 0):
        raise RuntimeError("stationary vector has empty states; chain is not irreducible")
    codes, inverse = np.unique(gcodes, return_inverse=True)
    probs = np.bincount(inverse, weights=pi)
    return EquilibriumDistribution(support, codes, probs / probs.sum())
