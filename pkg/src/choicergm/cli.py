"""Command-line entry point: ``choicergm <subcommand> [--config run.yaml] ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure (degenerate simulations, non-convergence).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import ConfigError, load_config, schema_summary, validate_config
from .control import ResolutionRule
from .dynamics import ChainConfig, UpdateSchedule, exact_equilibrium, run_choice_process, stationary_oracle
from .estimation import DegeneracyError, FitResult, SAConfig, adequacy_check
from .estimator import ERGM, make_reference
from .experiments import (
    THREADS_ENV,
    PerturbationSpec,
    SweepSpec,
    default_threads,
    heatmap_svg,
    local_stability_check,
    norm_shift_surface,
    run_counterfactual,
    run_sweep,
)
from .graph import Graph, GraphSupport, SupportTooLargeError, edge_variables
from .io import DataError, IngestedNetwork, ingest_attributes, ingest_covariate, ingest_network, las_aggregate, read_reports
from .model import ModelSpec, NodeData, TermSpec, descriptives, sociality_terms

log = logging.getLogger("choicergm")

COMMANDS = ("simulate", "equilibrium", "fit", "adequacy", "sweep", "counterfactual", "stability",
            "validate-config")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="choicergm", description="Choice-process ERGM engine.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    helps = {
        "simulate": "simulate cross-sections of the choice process",
        "equilibrium": "exact equilibrium distribution of a small system",
        "fit": "fit an ERGM to an observed network",
        "adequacy": "fit, then compare observed descriptives to simulations",
        "sweep": "parameter sweep / norm-shift surface",
        "counterfactual": "simulate a fitted model under a perturbation",
        "stability": "check local stability of a graph under a model",
        "validate-config": "validate a run configuration",
    }
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("config_path", nargs="?", help="run configuration (YAML)")
        s.add_argument("--config", dest="config", help="run configuration (YAML)")
        s.add_argument("--seed", type=int, help="random seed (overrides the config)")
        s.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        s.add_argument("--out-dir", default="choicergm-out", help="run directory for outputs")
        s.add_argument("--network", help="network CSV (overrides data.network)")
        s.add_argument("--format", choices=("edge_list_csv", "adjacency_csv"))
        s.add_argument("--attributes", help="vertex attribute CSV")
        s.add_argument("--terms", nargs="+", help="model terms, e.g. edges nodematch.office")
        s.add_argument("--theta", type=float, nargs="+", help="model coefficients")
        s.add_argument("--verbose", "-v", action="store_true")
        if name == "sweep":
            s.add_argument("--heatmap", action="store_true", help="also write heatmap.svg")
        if name == "equilibrium":
            s.add_argument("--oracle", action="store_true", help="also solve the Markov chain numerically")
    return p


# helpers ------------------------------------------------------------------

def _chain_cfg(block: dict, default: ChainConfig) -> ChainConfig:
    initial = block.get("initial", default.initial)
    if isinstance(initial, list):
        initial = tuple(initial)
    return ChainConfig(block.get("burn_in", default.burn_in), block.get("thin", default.thin),
                       block.get("n_samples", default.n_samples), initial)


def _load_data(cfg: dict, args, required: bool = True):
    data = dict(cfg.get("data", {}))
    if args.network:
        data["network"] = args.network
    if args.format:
        data["format"] = args.format
    if args.attributes:
        data["attributes"] = args.attributes
    directed = data.get("directed", False)
    if "network" in data:
        net = ingest_network(data["network"], data.get("format", "edge_list_csv"), directed, data.get("n"))
    elif "reports" in data:
        las = las_aggregate(read_reports(data["reports"]), data.get("las", "intersection"))
        if las.n_missing:
            log.warning("%d dyads have missing informant reports (treated as no claim)", las.n_missing)
        net = IngestedNetwork(las.graph, las.labels)
    elif required:
        raise UsageError("a network is required: give --network or data.network / data.reports in the config")
    else:
        return None, None
    d = NodeData()
    labels = net.labels
    if "attributes" in data:
        d, _ = ingest_attributes(data["attributes"], labels, data.get("attribute_types"))
    for name, path in data.get("covariates", {}).items():
        d.covariates[name] = ingest_covariate(path, labels)
    d.check(net.graph.n, net.graph.directed)
    return net, d


def _terms(cfg: dict, args, n: int) -> list:
    raw = args.terms or cfg.get("model", {}).get("terms", ["edges"])
    terms = [TermSpec.parse(t) for t in raw]
    if cfg.get("model", {}).get("sociality"):
        terms += sociality_terms(n)
    return terms


def _theta(cfg: dict, args):
    th = args.theta if args.theta is not None else cfg.get("model", {}).get("theta")
    return None if th is None else np.asarray(th, dtype=float)


def _rule(cfg: dict) -> ResolutionRule:
    ctl = cfg.get("control", {})
    rule = ctl.get("rule", "unilateral")
    return ResolutionRule.parse(rule, ctl.get("ell"))


def _estimator(cfg: dict, terms, seed, n_pairs: int) -> ERGM:
    fit = cfg.get("fit", {})
    sa = SAConfig(**fit["sa"]) if "sa" in fit else None
    sampler = _chain_cfg(fit.get("sampler", {}), ChainConfig(20 * n_pairs, n_pairs, 50))
    return ERGM(terms, reference=cfg.get("model", {}).get("reference", "counting"),
                lam=fit.get("lambda", 0.0), method=fit.get("method", "mple"),
                cv_folds=fit.get("cv_folds", 10), sampler=sampler, sa_config=sa, random_state=seed)


def _fitted_model(cfg, args, seed):
    """Observed network plus a model with coefficients (fitted unless theta is given)."""
    net, d = _load_data(cfg, args)
    g = net.graph
    terms = _terms(cfg, args, g.n)
    theta = _theta(cfg, args)
    if theta is not None:
        m = ModelSpec(terms, theta, make_reference(cfg.get("model", {}).get("reference", "counting")), g.support)
        return net, d, m, None
    est = _estimator(cfg, terms, seed, g.support.n_edge_variables).fit(g, node_data=d)
    return net, d, est.model_, est.fit_result_


def _out(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_metadata(out: Path, command: str, cfg: dict, seed, extra: dict) -> None:
    meta = {"command": command, "engine_version": __version__, "seed": seed, "config": cfg, **extra}
    with open(out / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)


# subcommands ----------------------------------------------------------------

def cmd_simulate(cfg, args, seed, threads):
    dyn = cfg.get("dynamics", {})
    net, d = _load_data(cfg, args, required=False)
    n = dyn.get("n") or (net.graph.n if net else None)
    if n is None:
        raise UsageError("simulate needs dynamics.n or a network")
    d = d or NodeData()
    directed = dyn.get("directed", net.graph.directed if net else False)
    theta = _theta(cfg, args)
    terms = _terms(cfg, args, n)
    if theta is None:
        raise UsageError("simulate needs model.theta or --theta")
    support = GraphSupport(n, directed)
    m = ModelSpec(terms, theta, make_reference(cfg.get("model", {}).get("reference", "counting")), support)
    n_pairs = support.n_edge_variables
    chain = _chain_cfg(dyn, ChainConfig(10 * n_pairs, n_pairs, 10))
    sched = UpdateSchedule(dyn.get("schedule", "uniform_random_scan"))
    xs = run_choice_process(m, _rule(cfg), None, d, sched, chain, np.random.default_rng(seed), support)
    out = _out(args)
    rows, edges = [], []
    for k, x in enumerate(xs):
        rows.append({"sample": k, "events": x.events, "time": x.time, **descriptives(x.graph).scalars()})
        edges += [(k, e.sender, e.receiver) for e in x.graph.edges()]
    pd.DataFrame(rows).to_csv(out / "samples.csv", index=False)
    pd.DataFrame(edges, columns=["sample", "from", "to"]).to_csv(out / "graphs.csv", index=False)
    _write_metadata(out, "simulate", cfg, seed, {"n": n, "rule": _rule(cfg).label})
    print(f"wrote {len(xs)} samples to {out}")
    return 0


def cmd_equilibrium(cfg, args, seed, threads):
    dyn = cfg.get("dynamics", {})
    n = dyn.get("n")
    if n is None:
        raise UsageError("equilibrium needs dynamics.n")
    theta = _theta(cfg, args)
    if theta is None:
        raise UsageError("equilibrium needs model.theta or --theta")
    support = GraphSupport(n, dyn.get("directed", False))
    m = ModelSpec(_terms(cfg, args, n), theta, None, support)
    rule = _rule(cfg)
    eq = exact_equilibrium(m, rule, None, None, support)
    df = pd.DataFrame({"graph_id": eq.codes, "n_edges": [g.n_edges() for g in eq.graphs],
                       "probability": eq.probabilities})
    extra = {"rule": rule.label, "expected_density": eq.expected_density()}
    if args.oracle or cfg.get("equilibrium", {}).get("oracle"):
        orc = stationary_oracle(m, rule, None, None, support)
        df["oracle_probability"] = orc.probabilities
        extra["tv_exact_vs_oracle"] = eq.tv(orc)
    out = _out(args)
    df.to_csv(out / "equilibrium.csv", index=False, float_format="%.17g")
    _write_metadata(out, "equilibrium", cfg, seed, extra)
    print(f"{len(df)} graphs; expected density {extra['expected_density']:.6f}")
    return 0


def cmd_fit(cfg, args, seed, threads):
    net, d = _load_data(cfg, args)
    g = net.graph
    est = _estimator(cfg, _terms(cfg, args, g.n), seed, g.support.n_edge_variables).fit(g, node_data=d)
    out = _out(args)
    table = est.coefficient_table()
    table.to_csv(out / "coefficients.csv", index=False, float_format="%.10g")
    res = est.fit_result_
    _write_metadata(out, "fit", cfg, seed, {"fit": res.to_dict(), "n": g.n})
    print(table.to_string(index=False))
    if not res.converged:
        raise NumericalFailure(f"estimation did not converge: {res.message}")
    return 0


def cmd_adequacy(cfg, args, seed, threads):
    net, d, m, res = _fitted_model(cfg, args, seed)
    g = net.graph
    n_pairs = g.support.n_edge_variables
    chain = _chain_cfg(cfg.get("dynamics", {}), ChainConfig(20 * n_pairs, n_pairs, 100))
    rep = adequacy_check(m, d, g, chain, np.random.default_rng(seed))
    out = _out(args)
    rep.table.to_csv(out / "adequacy.csv", index=False, float_format="%.10g")
    if res is not None:
        res.table().to_csv(out / "coefficients.csv", index=False, float_format="%.10g")
    _write_metadata(out, "adequacy", cfg, seed, {"all_covered": rep.all_covered, "n_draws": rep.n_draws,
                                                 "theta": m.theta.tolist()})
    print(f"adequacy: {int(rep.table['covered'].sum())}/{len(rep.table)} bins covered")
    return 0


def cmd_sweep(cfg, args, seed, threads):
    block = dict(cfg.get("sweep", {}))
    to_rule = block.pop("to_rule", None)
    heat = block.pop("heatmap", False) or args.heatmap
    if "axis_values" in block:
        block["axis_values"] = tuple(tuple(v) for v in block["axis_values"])
    for k in ("low", "high"):
        if isinstance(block.get(k), list):
            block[k] = tuple(block[k])
    if "family" in block:
        block["family"] = tuple(block["family"])
    chain = _chain_cfg(cfg.get("dynamics", {}), ChainConfig(burn_in=2000))
    spec = SweepSpec(**block, chain=chain, seed=seed, threads=threads)
    res = norm_shift_surface(spec, to_rule) if to_rule is not None else run_sweep(spec)
    out = _out(args)
    res.to_csv(out / "sweep.csv")
    res.summary_table().to_csv(out / "sweep_summary.csv", index=False, float_format="%.10g")
    if heat:
        heatmap_svg(res, out / "heatmap.svg")
    _write_metadata(out, "sweep", cfg, seed, {"sweep": res.metadata})
    print(f"swept {res.metadata['n_points']} points into {out / 'sweep.csv'}")
    return 0


def cmd_counterfactual(cfg, args, seed, threads):
    block = cfg.get("counterfactual")
    if block is None:
        raise UsageError("counterfactual needs a 'counterfactual' block in the config")
    net, d, m, res = _fitted_model(cfg, args, seed)
    if res is None:
        res = FitResult(m.theta.copy(), None, 0.0, [], True, m.names, "given", "theta supplied")
    g = net.graph
    n_pairs = g.support.n_edge_variables
    chain = _chain_cfg(cfg.get("dynamics", {}), ChainConfig(20 * n_pairs, n_pairs, 1))
    spec = PerturbationSpec(chain=chain, **block)
    rep = run_counterfactual(res, m, d, spec, np.random.default_rng(seed))
    out = _out(args)
    rep.replicates.to_csv(out / "counterfactual.csv", index=False, float_format="%.10g")
    with open(out / "counterfactual.json", "w") as fh:
        json.dump({**rep.summary(), "theta": rep.theta.tolist(), "terms": m.names}, fh, indent=2)
    _write_metadata(out, "counterfactual", cfg, seed, {"summary": rep.summary()})
    print(json.dumps(rep.summary(), indent=2))
    return 0


def cmd_stability(cfg, args, seed, threads):
    block = cfg.get("stability", {})
    fmt = cfg.get("data", {}).get("format", "edge_list_csv")
    if "graph" in block:
        g = ingest_network(block["graph"], fmt).graph
    elif "star" in block:
        g = Graph.star(block["star"])
    else:
        net, _ = _load_data(cfg, args)
        g = net.graph
    theta = _theta(cfg, args)
    if theta is None:
        raise UsageError("stability needs model.theta or --theta")
    m = ModelSpec(_terms(cfg, args, g.n), theta,
                  make_reference(cfg.get("model", {}).get("reference", "counting")), g.support)
    r = local_stability_check(m, None, g)
    out = _out(args)
    evs = edge_variables(g.support)
    ei, ej = [e.sender for e in evs], [e.receiver for e in evs]
    pd.DataFrame({"from": ei, "to": ej, "gain": r.gains}).to_csv(out / "stability.csv", index=False,
                                                                 float_format="%.10g")
    _write_metadata(out, "stability", cfg, seed, {"stable": r.stable, "witness": r.witness,
                                                   "max_gain": r.max_gain})
    print(f"locally stable: {r.stable}" + ("" if r.stable else f" (witness toggle {r.witness})"))
    return 0


def cmd_validate(cfg, args, seed, threads):
    validate_config(cfg)
    print("config OK")
    print(schema_summary(cfg))
    return 0


HANDLERS = {
    "simulate": cmd_simulate, "equilibrium": cmd_equilibrium, "fit": cmd_fit, "adequacy": cmd_adequacy,
    "sweep": cmd_sweep, "counterfactual": cmd_counterfactual, "stability": cmd_stability,
    "validate-config": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("choicergm: error: a command is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        path = args.config or args.config_path
        if args.command == "validate-config" and path is None:
            raise UsageError("validate-config needs a config path")
        cfg = load_config(path) if path else {}
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        threads = args.threads or cfg.get("threads") or default_threads()
        return HANDLERS[args.command](cfg, args, seed, threads)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(str(exc), file=sys.stderr)
        if isinstance(exc, UsageError):
            parser.print_usage(sys.stderr)
        return 1
    except (DegeneracyError, NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, FileNotFoundError, SupportTooLargeError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
