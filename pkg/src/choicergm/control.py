"""Agents, control lists, prosphoric arrays and relational-norm resolution.

A resolution rule maps the decision vector of an edge's controllers to the
manifest edge state. All rules here are edgewise decomposable and
homogeneous, so the number of decision arrays resolving to a graph factors
into per-edge multiplicities (h1 for present edges, h0 for absent ones).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graph import EdgeVariable, Graph, GraphSupport, edge_index_arrays, edge_variables

MAX_PREIMAGE_BITS = 24


class DegenerateRuleError(ValueError):
    """A rule that maps every decision vector to the same edge state."""


@dataclass(frozen=True)
class ResolutionRule:
    kind: str
    ell: int = 2
    k: Optional[int] = None
    table: Optional[tuple] = None

    def __post_init__(self):
        kind = self.kind
        if kind not in ("unilateral", "symphonic", "epibolic", "threshold", "custom"):
            raise ValueError(f"unknown resolution rule {kind!r}")
        if self.ell < 1:
            raise ValueError("control number must be at least 1")
        if kind == "unilateral" and self.ell != 1:
            raise ValueError("unilateral resolution requires control number 1")
        if kind == "threshold" and (self.k is None or not 1 <= self.k <= self.ell):
            raise ValueError(f"threshold k must lie in [1, {self.ell}], got {self.k}")
        if kind == "custom":
            if self.table is None or len(self.table) != 2 ** self.ell:
                raise ValueError(f"custom rule needs a truth table with {2 ** self.ell} entries")
            if any(v not in (0, 1) for v in self.table):
                raise ValueError("custom truth table must be binary")

    @classmethod
    def unilateral(cls) -> "ResolutionRule":
        return cls("unilateral", 1)

    @classmethod
    def symphonic(cls, ell: int = 2) -> "ResolutionRule":
        return cls("symphonic", ell)

    @classmethod
    def epibolic(cls, ell: int = 2) -> "ResolutionRule":
        return cls("epibolic", ell)

    @classmethod
    def threshold(cls, k: int, ell: int) -> "ResolutionRule":
        return cls("threshold", ell, k=k)

    @classmethod
    def custom(cls, table: Sequence[int]) -> "ResolutionRule":
        table = tuple(int(v) for v in table)
        ell = int(round(math.log2(len(table)))) if table else 0
        if 2 ** ell != len(table):
            raise ValueError("truth table length must be a power of two")
        return cls("custom", ell, table=table)

    @classmethod
    def parse(cls, obj, ell: Optional[int] = None) -> "ResolutionRule":
        """Build a rule from a name (``"symphonic"``, ``"xor"``...) or a mapping."""
        if isinstance(obj, ResolutionRule):
            return obj if ell is None else obj.with_ell(ell)
        if isinstance(obj, str):
            obj = {"kind": obj}
        spec = dict(obj)
        kind = spec.pop("kind")
        if ell is not None:
            spec.setdefault("ell", ell)
        if kind == "xor":
            return cls.custom((0, 1, 1, 0))
        if kind == "unilateral":
            return cls.unilateral()
        if kind == "custom":
            return cls.custom(spec["table"])
        if kind == "threshold":
            return cls.threshold(spec["k"], spec.get("ell", 2))
        return cls(kind, spec.get("ell", 2))

    def with_ell(self, ell: int) -> "ResolutionRule":
        if ell == self.ell:
            return self
        if self.kind in ("symphonic", "epibolic"):
            return ResolutionRule(self.kind, ell)
        raise ValueError(f"{self.kind} rule is defined for control number {self.ell}, not {ell}")

    def apply(self, decisions: np.ndarray) -> np.ndarray:
        """Resolve decision vectors stacked along the last axis (length ell)."""
        d = np.asarray(decisions).astype(np.int64)
        if d.shape[-1] != self.ell:
            raise ValueError(f"expected {self.ell} decisions per edge, got {d.shape[-1]}")
        if self.kind in ("unilateral", "symphonic"):
            return d.prod(axis=-1).astype(np.uint8)
        if self.kind == "epibolic":
            return (1 - (1 - d).prod(axis=-1)).astype(np.uint8)
        if self.kind == "threshold":
            return (d.sum(axis=-1) >= self.k).astype(np.uint8)
        idx = (d << np.arange(self.ell)).sum(axis=-1)
        return np.asarray(self.table, dtype=np.uint8)[idx]

    def truth_table(self) -> np.ndarray:
        """Manifest state for every packed decision vector (bit r = slot r)."""
        idx = np.arange(2 ** self.ell)
        bits = (idx[:, None] >> np.arange(self.ell)) & 1
        return self.apply(bits)

    @property
    def label(self) -> str:
        if self.kind == "threshold":
            return f"threshold({self.k} of {self.ell})"
        if self.kind == "custom":
            return f"custom{self.table}"
        return self.kind if self.ell == 2 or self.kind == "unilateral" else f"{self.kind}({self.ell})"


def _rule(rule, ell):
    return ResolutionRule.parse(rule, ell)


def edge_multiplicity(rule, ell: Optional[int] = None) -> tuple[int, int]:
    """Decision vectors mapped to edge-present (h1) and edge-absent (h0)."""
    r = _rule(rule, ell)
    total = 2 ** r.ell
    if r.kind in ("unilateral", "symphonic"):
        h1 = 1
    elif r.kind == "epibolic":
        h1 = total - 1
    elif r.kind == "threshold":
        h1 = sum(math.comb(r.ell, i) for i in range(r.k, r.ell + 1))
    else:
        h1 = sum(r.table)
    h0 = total - h1
    if h1 == 0 or h0 == 0:
        raise DegenerateRuleError(
            f"rule {r.label} has multiplicities (h1={h1}, h0={h0}); one edge state is unreachable"
        )
    return h1, h0


def log_multiplicity(g: Graph, rule, ell: Optional[int] = None) -> float:
    """ln |{p : r(p) = g}| under the per-edge product decomposition."""
    h1, h0 = edge_multiplicity(rule, ell)
    m = g.n_edges()
    return m * math.log(h1) + (g.support.n_edge_variables - m) * math.log(h0)


def norm_shift_offset(from_rule, to_rule, ell: Optional[int] = None) -> float:
    """Change in the effective edge parameter when swapping norms."""
    a1, a0 = edge_multiplicity(from_rule, ell)
    b1, b0 = edge_multiplicity(to_rule, ell)
    return (math.log(b1) - math.log(b0)) - (math.log(a1) - math.log(a0))


@dataclass(frozen=True, eq=False)
class ProsphoricArray:
    """Per-controller decisions: slice ``r`` holds the ``r``-th controller's choices."""

    slices: np.ndarray
    directed: bool = False

    def __post_init__(self):
        s = np.array(self.slices, dtype=np.uint8, copy=True)
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise ValueError(f"prosphoric array must have shape (ell, n, n), got {s.shape}")
        if np.any(s > 1):
            raise ValueError("prosphoric array must be binary")
        if np.any(np.diagonal(s, axis1=1, axis2=2)):
            raise ValueError("prosphoric cells exist only for edge variables")
        if not self.directed and not np.array_equal(s, s.transpose(0, 2, 1)):
            raise ValueError("undirected prosphoric slices must be symmetric")
        s.setflags(write=False)
        object.__setattr__(self, "slices", s)

    @classmethod
    def empty(cls, ell: int, n: int, directed: bool = False) -> "ProsphoricArray":
        return cls(np.zeros((ell, n, n), dtype=np.uint8), directed)

    @property
    def ell(self) -> int:
        return self.slices.shape[0]

    @property
    def n(self) -> int:
        return self.slices.shape[1]

    def decisions(self, e) -> tuple:
        i, j = e
        return tuple(int(v) for v in self.slices[:, i, j])

    def set_cell(self, slot: int, e, value: int) -> "ProsphoricArray":
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise ValueError("self-loop is not an edge variable")
        s = np.array(self.slices, copy=True)
        s[slot, i, j] = value
        if not self.directed:
            s[slot, j, i] = value
        return ProsphoricArray(s, self.directed)

    def __eq__(self, other):
        if not isinstance(other, ProsphoricArray):
            return NotImplemented
        return self.directed == other.directed and np.array_equal(self.slices, other.slices)

    def __hash__(self):
        return hash((self.directed, self.slices.tobytes()))


def resolve(p: ProsphoricArray, rule) -> Graph:
    r = ResolutionRule.parse(rule)
    if r.ell != p.ell:
        raise ValueError(f"rule expects {r.ell} slices, prosphoric array has {p.ell}")
    y = r.apply(np.moveaxis(p.slices, 0, -1))
    np.fill_diagonal(y, 0)
    return Graph(y, p.directed)


def preimage_count(g: Graph, rule, ell: Optional[int] = None,
                   support: Optional[GraphSupport] = None) -> int:
    """Count prosphoric arrays resolving to ``g`` by exhaustive enumeration."""
    r = _rule(rule, ell)
    support = support or g.support
    m = support.n_edge_variables
    bits = r.ell * m
    if bits > MAX_PREIMAGE_BITS:
        raise ValueError(
            f"prosphoric state space 2^{bits} exceeds the enumeration bound 2^{MAX_PREIMAGE_BITS}"
        )
    ei, ej = edge_index_arrays(support.n, support.directed)
    target = g.adj[ei, ej]
    count = 0
    chunk = 1 << 16
    shifts = np.arange(bits, dtype=np.int64)
    for start in range(0, 1 << bits, chunk):
        codes = np.arange(start, min(start + chunk, 1 << bits), dtype=np.int64)
        cells = (codes[:, None] >> shifts) & 1
        # cell index = slot * m + edge
        decisions = cells.reshape(-1, r.ell, m).transpose(0, 2, 1)
        manifest = r.apply(decisions)
        count += int(np.all(manifest == target, axis=1).sum())
    return count


@dataclass(frozen=True)
class ControlStructure:
    agents: tuple
    control_number: int
    control_lists: dict

    def __post_init__(self):
        order = {a: k for k, a in enumerate(self.agents)}
        if len(order) != len(self.agents):
            raise ValueError("agent identifiers must be unique")
        for e, lst in self.control_lists.items():
            if len(lst) != self.control_number:
                raise ValueError(f"control list for {e} has length {len(lst)}, expected {self.control_number}")
            if len(set(lst)) != len(lst):
                raise ValueError(f"control list for {e} repeats an agent")
            pos = [order[a] for a in lst]
            if pos != sorted(pos):
                raise ValueError(f"control list for {e} is not in lexical agent order")

    @classmethod
    def standard(cls, support: GraphSupport, ell: int, orientation: str = "sender") -> "ControlStructure":
        """Endpoints control their own edges.

        Unilateral control goes to the sender (``orientation="sender"``) or the
        receiver; for undirected graphs the sender is the lower index.
        Bilateral control lists both endpoints.
        """
        if orientation not in ("sender", "receiver"):
            raise ValueError("orientation must be 'sender' or 'receiver'")
        lists = {}
        for e in edge_variables(support):
            if ell == 1:
                lists[e] = (e.sender if orientation == "sender" else e.receiver,)
            elif ell == 2:
                lists[e] = tuple(sorted((e.sender, e.receiver)))
            else:
                raise ValueError("standard control lists cover ell in {1, 2}; pass explicit lists otherwise")
        return cls(tuple(range(support.n)), ell, lists)

    @classmethod
    def shared(cls, support: GraphSupport, agents: Sequence) -> "ControlStructure":
        """Every edge governed by the same agents (designer/adversary scenarios)."""
        agents = tuple(agents)
        return cls(agents, len(agents), {e: agents for e in edge_variables(support)})

    def controllers(self, e) -> tuple:
        key = EdgeVariable(*e)
        if key not in self.control_lists:
            key = EdgeVariable(key.receiver, key.sender)
        try:
            return self.control_lists[key]
        except KeyError:
            raise KeyError(f"no control list for edge {tuple(e)}") from None

    def slot_of(self, e, agent) -> int:
        lst = self.controllers(e)
        if agent not in lst:
            raise ValueError(f"agent {agent!r} does not control edge {tuple(e)}")
        return lst.index(agent)

    def covers(self, support: GraphSupport) -> bool:
        return all(e in self.control_lists for e in edge_variables(support))
