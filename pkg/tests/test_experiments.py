import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choicergm.control import norm_shift_offset
from choicergm.dynamics import ChainConfig, exact_equilibrium
from choicergm.estimation import FitResult, adequacy_check, build_design, mple
from choicergm.experiments import (
    PerturbationSpec,
    SweepSpec,
    heatmap_svg,
    local_stability_check,
    norm_shift_surface,
    perturb_theta,
    run_counterfactual,
    run_sweep,
    toggle_gains,
)
from choicergm.graph import Graph, GraphSupport
from choicergm.model import ModelSpec, NodeData, ReferenceMeasure, TermSpec, graph_potential, sociality_terms

SMALL = dict(resolution=3, n=5, replicates=4, chain=ChainConfig(burn_in=300))


def test_sweep_points_grid_and_uniform():
    spec = SweepSpec(resolution=5)
    pts = spec.points()
    assert pts.shape == (25, 2)
    assert pts.min() == -5 and pts.max() == 5
    u = SweepSpec(draw_mode="uniform", n_draws=100, low=[-1, 0], high=[0, 2], seed=4).points()
    assert u.shape == (100, 2)
    assert (u[:, 0] >= -1).all() and (u[:, 0] <= 0).all() and (u[:, 1] >= 0).all() and (u[:, 1] <= 2).all()
    np.testing.assert_array_equal(u, SweepSpec(draw_mode="uniform", n_draws=100, low=[-1, 0], high=[0, 2], seed=4).points())


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(family=("edges",))
    with pytest.raises(ValueError):
        SweepSpec(low=1, high=1)
    with pytest.raises(ValueError):
        SweepSpec(summary="diameter")
    with pytest.raises(ValueError):
        SweepSpec(engine="mcmc")
    with pytest.raises((ValueError, KeyError)):
        SweepSpec(rule="majority")


def test_sweep_bit_reproducible_and_thread_independent():
    spec = SweepSpec(seed=9, **SMALL)
    a = run_sweep(spec).points
    b = run_sweep(spec).points
    c = run_sweep(spec.with_(threads=3)).points
    assert a.equals(b) and a.equals(c)
    assert len(a) == 9 * 4
    assert not run_sweep(spec.with_(seed=10)).points["summary"].equals(a["summary"])


def test_sweep_phase_examples():
    spec = SweepSpec(axis_values=([-5.0], [-5.0, 5.0]), n=7, replicates=20, seed=1)
    tab = run_sweep(spec).summary_table().set_index("theta2")
    assert tab.loc[5.0, "mean"] > 0.9
    assert tab.loc[-5.0, "mean"] < 0.05


def test_nsp0_positive_corner_is_decentralized():
    spec = SweepSpec(family=("edges", "nsp0"), axis_values=([2.5], [2.5]), summary="centralization",
                     rule="unilateral", replicates=20, chain=ChainConfig(burn_in=5000), seed=2)
    assert run_sweep(spec).summary_table()["mean"].iloc[0] < 0.35


def test_sweep_matches_exact_equilibrium():
    # mean density of final states vs the closed-form expected density at n=4
    spec = SweepSpec(axis_values=([-1.0], [0.3]), n=4, replicates=3000, chain=ChainConfig(burn_in=200),
                     rule="symphonic", seed=3)
    for engine in ("offset", "choice"):
        est = run_sweep(spec.with_(engine=engine)).summary_table()
        eq = exact_equilibrium(ModelSpec(["edges", "two_star"], [-1.0, 0.3]), "symphonic", None, None,
                               GraphSupport(4))
        se = est["se"].iloc[0]
        assert abs(est["mean"].iloc[0] - eq.expected_density()) < 4 * se + 1e-3


def test_dual_start_flags_metastability():
    spec = SweepSpec(axis_values=([-3.0], [-5.0, 0.6]), n=7, replicates=10, rule="epibolic",
                     chain=ChainConfig(burn_in=50, initial="dual"), seed=0)
    df = run_sweep(spec).points
    assert set(df["start"]) == {"empty", "full"}
    flags = df.groupby("theta2")["metastable"].first()
    assert not flags.loc[-5.0]


def test_norm_shift_surface_equals_offset_shift():
    spec = SweepSpec(rule="symphonic", seed=5, **SMALL)
    surf = norm_shift_surface(spec, "epibolic")
    assert surf.metadata["norm_shift_offset"] == pytest.approx(2 * math.log(3))
    shifted = run_sweep(spec, edge_offset=surf.metadata["norm_shift_offset"]).points["summary"].to_numpy()
    np.testing.assert_allclose(surf.points["summary_to"].to_numpy(), shifted)
    np.testing.assert_allclose(surf.points["summary"], surf.points["summary_to"] - surf.points["summary_from"])


def test_sweep_outputs(tmp_path):
    res = run_sweep(SweepSpec(seed=1, **SMALL))
    res.to_csv(tmp_path / "s.csv")
    res.write_metadata(tmp_path / "m.json")
    assert (tmp_path / "s.csv").read_text().startswith("theta1,theta2")
    assert '"seed": 1' in (tmp_path / "m.json").read_text()
    heatmap_svg(res, tmp_path / "h.svg")
    root = ET.parse(tmp_path / "h.svg").getroot()
    rects = [e for e in root.iter() if e.tag.endswith("rect")]
    assert len(rects) >= 9


# counterfactuals ---------------------------------------------------------

def _fitted_sociality_model(rng, n=12):
    a = np.triu(rng.random((n, n)) < 0.25, 1).astype(np.uint8)
    g = Graph(a + a.T)
    m = ModelSpec(["edges"] + sociality_terms(n), support=g.support)
    fit = mple(build_design(g, m), 0.5)
    return g, m, fit


def test_counterfactual_noop_reproduces_adequacy_draws():
    g, m, fit = _fitted_sociality_model(np.random.default_rng(0))
    cfg = ChainConfig(burn_in=500, thin=66, n_samples=200)
    rep = adequacy_check(m.with_theta(fit.theta_hat), None, g, cfg, np.random.default_rng(42))
    cf = run_counterfactual(fit, m, None, PerturbationSpec("none", replicates=200, chain=cfg),
                            np.random.default_rng(42))
    dens = cf.replicates["density"].to_numpy()
    row = rep.panel("density").iloc[0]
    assert np.percentile(dens, 2.5) == row["lower"]
    assert np.percentile(dens, 97.5) == row["upper"]
    assert dens.mean() == pytest.approx(row["sim_mean"], abs=1e-15)


def test_zero_negative_sociality_raises_density():
    rng = np.random.default_rng(1)
    g, m, fit = _fitted_sociality_model(rng)
    cfg = ChainConfig(burn_in=1000, thin=66)
    base = run_counterfactual(fit, m, None, PerturbationSpec("none", replicates=200, chain=cfg), rng)
    pert = run_counterfactual(fit, m, None, PerturbationSpec("zero_negative_sociality", replicates=200, chain=cfg), rng)
    assert (pert.theta >= fit.theta_hat).all()
    assert pert.summary()["density_mean"] > base.summary()["density_mean"]


def test_permute_sociality_preserves_multiset():
    rng = np.random.default_rng(2)
    g, m, fit = _fitted_sociality_model(rng)
    rep = run_counterfactual(fit, m, None, PerturbationSpec("permute_sociality", n_permutations=30,
                                                            chain=ChainConfig(200, 66)), rng)
    assert len(rep.replicates) == 30


def test_norm_shift_counterfactual_raises_mean_degree():
    rng = np.random.default_rng(3)
    g, m, fit = _fitted_sociality_model(rng)
    cfg = ChainConfig(burn_in=1000, thin=66)
    base = run_counterfactual(fit, m, None, PerturbationSpec("none", replicates=200, chain=cfg), rng)
    pert = run_counterfactual(fit, m, None, PerturbationSpec("norm_shift", from_rule="symphonic",
                                                             to_rule="epibolic", replicates=200, chain=cfg), rng)
    assert pert.edge_offset == pytest.approx(norm_shift_offset("symphonic", "epibolic"))
    assert pert.summary()["mean_degree_mean"] > base.summary()["mean_degree_mean"]


def test_counterfactual_errors():
    rng = np.random.default_rng(4)
    g, m, fit = _fitted_sociality_model(rng)
    with pytest.raises(KeyError):
        run_counterfactual(fit, m, None, PerturbationSpec("sign_flip", term="triangle"), rng)
    plain = ModelSpec(["edges"], support=g.support)
    pfit = mple(build_design(g, plain), 0.0)
    with pytest.raises(KeyError):
        run_counterfactual(pfit, plain, None, PerturbationSpec("zero_negative_sociality"), rng)
    with pytest.raises(ValueError):
        run_counterfactual(pfit, m, None, PerturbationSpec("none"), rng)
    with pytest.raises(ValueError):
        PerturbationSpec("norm_shift", from_rule="symphonic")
    with pytest.raises(ValueError):
        PerturbationSpec("melt")


def test_sign_flip_only_touches_named_term():
    m = ModelSpec(["edges", "triangle", "two_star"])
    th = perturb_theta(np.array([1.0, 2.0, 3.0]), m, PerturbationSpec("sign_flip", term="triangle"))
    np.testing.assert_array_equal(th, [1.0, -2.0, 3.0])


# local stability ---------------------------------------------------------

def test_stability_at_zero_theta_is_equality():
    g = Graph.star(6)
    res = local_stability_check(ModelSpec(["edges", "nsp0"], [0.0, 0.0]), None, g)
    assert res.stable and res.max_gain == 0.0 and res.witness is None


@settings(max_examples=40)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 15 - 1))
def test_toggle_gains_match_potential_differences(t1, t2, code):
    from choicergm.graph import decode
    g = decode(code, 6)
    m = ModelSpec(["edges", "nsp0"], [t1, t2], ReferenceMeasure.multiplicity("epibolic"))
    gains = toggle_gains(m, None, g)
    base = graph_potential(g, m)
    from choicergm.graph import edge_variables
    for k, e in enumerate(edge_variables(g.support)):
        flipped = g.set_edge(e, 1 - g.adj[e])
        assert gains[k] == pytest.approx(graph_potential(flipped, m) - base, abs=1e-9)


def test_stability_witness_is_improving_toggle():
    g = Graph.star(7)
    m = ModelSpec(["edges", "nsp0"], [2.5, 2.5], ReferenceMeasure.multiplicity("epibolic"))
    res = local_stability_check(m, None, g)
    assert not res.stable and not res
    i, j = res.witness
    flipped = g.set_edge((i, j), 1 - g.adj[i, j])
    assert graph_potential(flipped, m) > graph_potential(g, m)
