import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from choicergm.control import (
    ControlStructure,
    DegenerateRuleError,
    ProsphoricArray,
    ResolutionRule,
    edge_multiplicity,
    log_multiplicity,
    norm_shift_offset,
    preimage_count,
    resolve,
)
from choicergm.graph import Graph, GraphSupport, enumerate_graphs

RULES = [ResolutionRule.symphonic(), ResolutionRule.epibolic(), ResolutionRule.threshold(2, 2),
         ResolutionRule.custom((0, 1, 1, 0))]


def _array(cells, n=2):
    """Prosphoric array for a single dyad (0, 1) from per-slot decisions."""
    s = np.zeros((len(cells), n, n), dtype=np.uint8)
    for r, v in enumerate(cells):
        s[r, 0, 1] = s[r, 1, 0] = v
    return ProsphoricArray(s)


def test_resolve_examples():
    assert resolve(_array((1, 1)), "symphonic").has_edge(0, 1)
    assert not resolve(_array((1, 0)), "symphonic").has_edge(0, 1)
    assert resolve(_array((1, 0)), "epibolic").has_edge(0, 1)
    assert not resolve(_array((0, 0)), "epibolic").has_edge(0, 1)
    p = _array((1,), n=3)
    assert resolve(p, "unilateral") == Graph(p.slices[0])


def test_resolve_slice_mismatch():
    with pytest.raises(ValueError):
        resolve(_array((1, 1)), "unilateral")


def _brute_multiplicity(rule):
    vecs = np.array(list(itertools.product((0, 1), repeat=rule.ell)))
    out = rule.apply(vecs)
    return int(out.sum()), int(len(out) - out.sum())


@pytest.mark.parametrize("rule,want", [
    (ResolutionRule.symphonic(), (1, 3)),
    (ResolutionRule.epibolic(), (3, 1)),
    (ResolutionRule.threshold(2, 3), (4, 4)),
    (ResolutionRule.unilateral(), (1, 1)),
    (ResolutionRule.custom((0, 1, 1, 0)), (2, 2)),
])
def test_edge_multiplicity(rule, want):
    assert edge_multiplicity(rule) == want
    assert _brute_multiplicity(rule) == want


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_multiplicity_matches_enumeration_all_threshold_rules(ell):
    for k in range(1, ell + 1):
        r = ResolutionRule.threshold(k, ell)
        assert edge_multiplicity(r) == _brute_multiplicity(r)
    if ell > 1:
        for kind in ("symphonic", "epibolic"):
            r = ResolutionRule(kind, ell)
            assert edge_multiplicity(r) == _brute_multiplicity(r)


def test_degenerate_rule_flagged():
    with pytest.raises(DegenerateRuleError):
        edge_multiplicity(ResolutionRule.custom((0, 0, 0, 0)))
    with pytest.raises(DegenerateRuleError):
        edge_multiplicity(ResolutionRule.custom((1, 1)))


def test_rule_validation():
    with pytest.raises(ValueError):
        ResolutionRule("unilateral", 2)
    with pytest.raises(ValueError):
        ResolutionRule.threshold(3, 2)
    with pytest.raises(ValueError):
        ResolutionRule.custom((0, 1, 1))
    assert ResolutionRule.parse("xor") == ResolutionRule.custom((0, 1, 1, 0))
    assert ResolutionRule.parse({"kind": "threshold", "k": 2, "ell": 3}).label == "threshold(2 of 3)"


def test_log_multiplicity_examples():
    for n in (3, 4):
        assert log_multiplicity(Graph.complete(n), "symphonic") == 0.0
        assert log_multiplicity(Graph.empty(n), "symphonic") == pytest.approx(math.comb(n, 2) * math.log(3))
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    assert log_multiplicity(g, "unilateral") == 0.0


@pytest.mark.parametrize("rule", RULES + [ResolutionRule.unilateral()])
def test_preimage_count_equals_multiplicity_at_n3(rule):
    total = 0
    for g in enumerate_graphs(GraphSupport(3)):
        c = preimage_count(g, rule)
        assert c == round(math.exp(log_multiplicity(g, rule)))
        total += c
    assert total == 2 ** (rule.ell * 3)


def test_preimage_examples():
    assert preimage_count(Graph.from_edges(3, [(0, 1)]), "symphonic") == 9
    assert preimage_count(Graph.empty(3), "epibolic") == 1
    assert preimage_count(Graph.complete(2), ResolutionRule.custom((0, 1, 1, 0))) == 2


def test_preimage_guard():
    with pytest.raises(ValueError):
        preimage_count(Graph.empty(6), "symphonic")


def test_norm_shift_offset_values():
    assert norm_shift_offset("symphonic", "epibolic") == pytest.approx(2 * math.log(3), abs=1e-15)
    for r in RULES:
        assert norm_shift_offset(r, r) == 0.0
    assert norm_shift_offset("unilateral", "unilateral") == 0.0
    assert norm_shift_offset("epibolic", "symphonic") == pytest.approx(-2 * math.log(3))


def test_symphonic_epibolic_duality_exhaustive():
    n = 3
    iu = list(itertools.combinations(range(n), 2))
    for code in range(1 << 6):
        s = np.zeros((2, n, n), dtype=np.uint8)
        for b in range(6):
            slot, (i, j) = divmod(b, 3)[0], iu[b % 3]
            s[slot, i, j] = s[slot, j, i] = (code >> b) & 1
        p = ProsphoricArray(s)
        comp = 1 - s
        for r in range(2):
            np.fill_diagonal(comp[r], 0)
        epi = resolve(p, "epibolic").adj
        sym_c = resolve(ProsphoricArray(comp), "symphonic").adj
        complement = 1 - sym_c
        np.fill_diagonal(complement, 0)
        assert np.array_equal(epi, complement)


@given(st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_custom_rule_uses_table(table):
    if len(set(table)) == 1:
        return
    r = ResolutionRule.custom(table)
    for idx, (a, b) in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
        assert r.apply(np.array([a, b])) == table[idx]
    assert edge_multiplicity(r) == (sum(table), 4 - sum(table))


def test_prosphoric_validation():
    with pytest.raises(ValueError):
        ProsphoricArray(np.ones((2, 3, 3)))
    bad = np.zeros((1, 3, 3), dtype=np.uint8)
    bad[0, 0, 1] = 1
    with pytest.raises(ValueError):
        ProsphoricArray(bad)
    p = ProsphoricArray.empty(2, 3).set_cell(1, (0, 2), 1)
    assert p.decisions((2, 0)) == (0, 1)


def test_control_structures():
    s = GraphSupport(3)
    cs = ControlStructure.standard(s, 2)
    assert cs.controllers((1, 2)) == (1, 2)
    assert cs.slot_of((0, 2), 2) == 1
    assert cs.covers(s)
    uni = ControlStructure.standard(GraphSupport(3, directed=True), 1)
    assert uni.controllers((2, 0)) == (2,)
    assert ControlStructure.standard(GraphSupport(3, directed=True), 1, "receiver").controllers((2, 0)) == (0,)
    shared = ControlStructure.shared(s, ("designer", "adversary"))
    assert shared.controllers((0, 1)) == ("designer", "adversary")
    with pytest.raises(ValueError):
        cs.slot_of((0, 1), 2)
    with pytest.raises(ValueError):
        ControlStructure((0, 1, 2), 2, {(0, 1): (1, 0)})
    with pytest.raises(ValueError):
        ControlStructure((0, 1, 2), 2, {(0, 1): (1, 1)})
