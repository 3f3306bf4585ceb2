"""Batch drivers: phase-diagram sweeps, norm-shift surfaces, counterfactuals."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from . import __version__
from .control import ResolutionRule, norm_shift_offset
from .dynamics import Chain, ChainConfig
from .estimation import FitResult
from .graph import Graph, edge_index_arrays
from .model import (
    ModelSpec,
    NodeData,
    ReferenceMeasure,
    TermSpec,
    bind,
    change_stat,
    degree_centralization,
    descriptives,
)

log = logging.getLogger(__name__)

SUMMARIES = ("density", "centralization")
THREADS_ENV = "CHOICERGM_THREADS"


def default_threads() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def _density(adj: np.ndarray) -> float:
    n = adj.shape[0]
    return float(adj.sum()) / (n * (n - 1)) if n > 1 else 0.0


def _centralization(adj: np.ndarray) -> float:
    return degree_centralization(Graph(adj))


_SUMMARY_FN = {"density": _density, "centralization": _centralization}


@dataclass(frozen=True)
class SweepSpec:
    """Parameter sweep over a two-term model family.

    Parameters
    ----------
    family : pair of term kinds, e.g. ``("edges", "two_star")``.
    draw_mode : ``"grid"`` or ``"uniform"``.
    low, high : bounds shared by both axes (or one pair per axis).
    resolution : grid points per axis (grid mode).
    n_draws : parameter draws (uniform mode).
    axis_values : explicit grid values per axis; overrides low/high/resolution.
    n : group size.
    rule : resolution rule of the simulated norm.
    engine : ``"offset"`` simulates the unilateral chain with the rule's
        multiplicity offset on the edge term; ``"choice"`` runs the
        prosphoric choice process itself.
    summary_mode : ``"final"`` (summary of the last retained draw) or
        ``"mean"`` over retained draws.
    replicates : independent chains per parameter point.
    chain : events for burn-in, thinning and retained draws. ``initial``
        may be ``"dual"``: replicates alternate empty and complete starts and
        points whose two start groups disagree are flagged.
    """

    family: tuple = ("edges", "two_star")
    draw_mode: str = "grid"
    low: object = -5.0
    high: object = 5.0
    resolution: int = 21
    n_draws: int = 2000
    axis_values: Optional[tuple] = None
    n: int = 7
    rule: object = "epibolic"
    summary: str = "density"
    summary_mode: str = "final"
    engine: str = "offset"
    replicates: int = 1
    chain: ChainConfig = field(default_factory=lambda: ChainConfig(burn_in=2000))
    seed: int = 0
    threads: int = 1
    metastability_tol: float = 0.5

    def __post_init__(self):
        if len(self.family) != 2:
            raise ValueError("a sweep needs exactly two free parameters")
        for t in self.family:
            TermSpec.parse(t)
        if self.draw_mode not in ("grid", "uniform"):
            raise ValueError(f"unknown draw mode {self.draw_mode!r}")
        if self.axis_values is None:
            for lo, hi in self.bounds():
                if not lo < hi:
                    raise ValueError(f"need low < high, got [{lo}, {hi}]")
        if self.summary not in SUMMARIES:
            raise ValueError(f"summary must be one of {SUMMARIES}")
        if self.summary_mode not in ("final", "mean"):
            raise ValueError("summary_mode must be 'final' or 'mean'")
        if self.engine not in ("offset", "choice"):
            raise ValueError("engine must be 'offset' or 'choice'")
        if self.replicates < 1 or self.n < 2:
            raise ValueError("need replicates >= 1 and n >= 2")
        ResolutionRule.parse(self.rule)

    def bounds(self) -> list:
        lo, hi = np.broadcast_to(self.low, 2), np.broadcast_to(self.high, 2)
        return [(float(lo[k]), float(hi[k])) for k in range(2)]

    @property
    def resolution_rule(self) -> ResolutionRule:
        return ResolutionRule.parse(self.rule)

    def points(self) -> np.ndarray:
        """Parameter points in sweep order, shape (n_points, 2)."""
        if self.draw_mode == "uniform":
            rng = np.random.default_rng(np.random.SeedSequence(self.seed).spawn(1)[0])
            (a1, b1), (a2, b2) = self.bounds()
            return np.column_stack([rng.uniform(a1, b1, self.n_draws), rng.uniform(a2, b2, self.n_draws)])
        if self.axis_values is not None:
            axes = [np.asarray(v, dtype=float).ravel() for v in self.axis_values]
        else:
            axes = [np.linspace(lo, hi, self.resolution) for lo, hi in self.bounds()]
        g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])

    def with_(self, **changes) -> "SweepSpec":
        return SweepSpec(**{**self.__dict__, **changes})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rule"] = self.resolution_rule.label
        out["family"] = list(self.family)
        out["chain"]["initial"] = str(self.chain.initial)
        if self.axis_values is not None:
            out["axis_values"] = [list(map(float, v)) for v in self.axis_values]
        return out


@dataclass
class SweepResult:
    """Long-format sweep records plus the metadata needed to rerun them."""

    points: pd.DataFrame
    metadata: dict

    def summary_table(self) -> pd.DataFrame:
        """Per-point mean, Monte Carlo standard error and replicate count."""
        g = self.points.groupby(["theta1", "theta2"], sort=False)["summary"]
        out = g.agg(["mean", "std", "count"]).reset_index()
        out["se"] = out["std"].fillna(0.0) / np.sqrt(out["count"])
        return out.drop(columns="std")

    def to_csv(self, path) -> None:
        self.points.to_csv(path, index=False, float_format="%.10g")

    def write_metadata(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)


def _point_model(spec: SweepSpec, theta, engine: str) -> tuple[ModelSpec, ResolutionRule]:
    rule = spec.resolution_rule
    if engine == "offset":
        ref = ReferenceMeasure.counting() if rule.kind == "unilateral" else ReferenceMeasure.multiplicity(rule)
        return ModelSpec(spec.family, theta, ref), ResolutionRule.unilateral()
    return ModelSpec(spec.family, theta), rule


def _run_point(spec: SweepSpec, theta, seed_seq, edge_offset: float = 0.0) -> list[dict]:
    m, rule = _point_model(spec, theta, spec.engine)
    rng = np.random.default_rng(seed_seq)
    fn = _SUMMARY_FN[spec.summary]
    cfg = spec.chain
    rows = []
    chain = None
    for r in range(spec.replicates):
        start = cfg.initial
        if start == "dual":
            start = "empty" if r % 2 == 0 else "full"
        if chain is None:
            chain = Chain(m, None, spec.n, False, rule, initial=start, rng=rng, edge_offset=edge_offset)
        else:
            chain.reset(start)
        chain.advance(cfg.burn_in)
        vals = []
        for _ in range(cfg.n_samples):
            chain.advance(cfg.thin if cfg.n_samples > 1 else 0)
            vals.append(fn(chain.Y))
        value = vals[-1] if spec.summary_mode == "final" else float(np.mean(vals))
        rows.append({"theta1": float(theta[0]), "theta2": float(theta[1]), "replicate": r,
                     "start": str(start), "summary": value})
    return rows


def _flag_metastable(df: pd.DataFrame, tol: float) -> pd.DataFrame:
    if set(df["start"]) != {"empty", "full"}:
        df["metastable"] = False
        return df
    means = df.groupby(["theta1", "theta2", "start"], sort=False)["summary"].mean().unstack("start")
    gap = (means["empty"] - means["full"]).abs() > tol
    df["metastable"] = [bool(gap.loc[(a, b)]) for a, b in zip(df["theta1"], df["theta2"])]
    n_flag = int(gap.sum())
    if n_flag:
        log.info("%d sweep points disagree between empty and complete starts", n_flag)
    return df


def run_sweep(spec: SweepSpec, edge_offset: float = 0.0) -> SweepResult:
    """Simulate every parameter point of ``spec``; deterministic given ``spec.seed``.

    Each point draws from its own child of ``SeedSequence(seed)``, so results
    do not depend on the thread count. ``edge_offset`` is an extra fixed
    shift on the edge log-odds.
    """
    pts = spec.points()
    # child 0 of the root seeds the uniform draws; point k uses child k + 1
    children = np.random.SeedSequence(spec.seed).spawn(len(pts) + 1)[1:]
    work = [(spec, pts[k], children[k], edge_offset) for k in range(len(pts))]
    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as ex:
            chunks = list(ex.map(lambda a: _run_point(*a), work))
    else:
        chunks = [_run_point(*a) for a in work]
    df = pd.DataFrame([row for chunk in chunks for row in chunk])
    df = _flag_metastable(df, spec.metastability_tol)
    meta = {"spec": spec.to_dict(), "seed": spec.seed, "edge_offset": edge_offset,
            "engine_version": __version__, "n_points": len(pts)}
    return SweepResult(df, meta)


def norm_shift_surface(spec: SweepSpec, to_rule) -> SweepResult:
    """Summary under ``to_rule`` minus summary under ``spec.rule`` at shared points and seeds."""
    to_rule = ResolutionRule.parse(to_rule)
    base = run_sweep(spec)
    shifted = run_sweep(spec.with_(rule=to_rule))
    df = base.points[["theta1", "theta2", "replicate"]].copy()
    df["summary_from"] = base.points["summary"].to_numpy()
    df["summary_to"] = shifted.points["summary"].to_numpy()
    df["summary"] = df["summary_to"] - df["summary_from"]
    meta = dict(base.metadata)
    meta["to_rule"] = to_rule.label
    try:
        meta["norm_shift_offset"] = norm_shift_offset(spec.resolution_rule, to_rule)
    except ValueError:
        meta["norm_shift_offset"] = None
    return SweepResult(df, meta)


_RAMP = ((0.0, (33, 102, 172)), (0.5, (247, 247, 247)), (1.0, (178, 24, 43)))


def _ramp(x: float) -> str:
    x = min(max(x, 0.0), 1.0)
    for (a, ca), (b, cb) in zip(_RAMP, _RAMP[1:]):
        if x <= b:
            w = (x - a) / (b - a)
            rgb = [round(u + w * (v - u)) for u, v in zip(ca, cb)]
            return "#%02x%02x%02x" % tuple(rgb)
    return "#%02x%02x%02x" % _RAMP[-1][1]


def heatmap_svg(result: SweepResult, path, vmin: Optional[float] = None, vmax: Optional[float] = None,
                cell: int = 16) -> None:
    """Write per-point means as an SVG heatmap.

    Fixed diverging ramp: blue at ``vmin``, white at the midpoint, red at
    ``vmax``. The mapping is recorded in a comment at the top of the file.
    """
    tab = result.summary_table()
    xs, ys = np.unique(tab["theta1"]), np.unique(tab["theta2"])
    lo = float(tab["mean"].min()) if vmin is None else vmin
    hi = float(tab["mean"].max()) if vmax is None else vmax
    span = hi - lo if hi > lo else 1.0
    w, h = cell * len(xs), cell * len(ys)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
             f"<!-- ramp: blue={lo:.6g} white={(lo + hi) / 2:.6g} red={hi:.6g}; "
             "x=theta1 increasing right, y=theta2 increasing up -->"]
    for a, b, v in zip(tab["theta1"], tab["theta2"], tab["mean"]):
        x = int(np.searchsorted(xs, a)) * cell
        y = (len(ys) - 1 - int(np.searchsorted(ys, b))) * cell
        parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_ramp((v - lo) / span)}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# counterfactuals ---------------------------------------------------------

PERTURBATIONS = ("none", "zero_negative_sociality", "permute_sociality", "sign_flip", "norm_shift")


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str = "none"
    term: Optional[str] = None
    from_rule: object = None
    to_rule: object = None
    n_permutations: int = 1000
    replicates: int = 100
    chain: ChainConfig = field(default_factory=ChainConfig)

    def __post_init__(self):
        if self.kind not in PERTURBATIONS:
            raise ValueError(f"unknown perturbation {self.kind!r}")
        if self.kind == "sign_flip" and not self.term:
            raise ValueError("sign_flip needs a term name")
        if self.kind == "norm_shift" and (self.from_rule is None or self.to_rule is None):
            raise ValueError("norm_shift needs from_rule and to_rule")


@dataclass
class CounterfactualReport:
    """Per-replicate descriptives of graphs simulated under a perturbed model."""

    replicates: pd.DataFrame
    theta: np.ndarray
    edge_offset: float
    kind: str

    def summary(self) -> dict:
        cols = ["density", "mean_degree", "centralization", "diameter", "median_geodesic"]
        out = {"kind": self.kind, "edge_offset": self.edge_offset, "n": len(self.replicates)}
        for c in cols:
            v = self.replicates[c].replace([np.inf, -np.inf], np.nan)
            out[f"{c}_mean"] = float(v.mean())
        out["density_quantiles"] = [float(q) for q in np.quantile(self.replicates["density"], [0.025, 0.5, 0.975])]
        return out


def _sociality_index(m: ModelSpec) -> np.ndarray:
    return np.array([k for k, t in enumerate(m.terms) if t.kind == "sociality"], dtype=int)


def perturb_theta(theta: np.ndarray, m: ModelSpec, spec: PerturbationSpec) -> np.ndarray:
    """Apply a deterministic perturbation to theta (permutation is handled separately)."""
    theta = np.array(theta, dtype=float)
    if spec.kind == "zero_negative_sociality":
        idx = _sociality_index(m)
        theta[idx] = np.maximum(theta[idx], 0.0)
    elif spec.kind == "sign_flip":
        theta[m.index(spec.term)] *= -1.0
    return theta


def _scalars(g: Graph) -> dict:
    return descriptives(g).scalars()


def run_counterfactual(fit: FitResult, m: ModelSpec, d: Optional[NodeData], spec: PerturbationSpec,
                       rng=None, n: Optional[int] = None) -> CounterfactualReport:
    """Simulate the fitted model with one aspect of it perturbed.

    A single chain is burned in and then sampled ``thin`` events apart, the
    same scheme ``adequacy_check`` uses, so the ``none`` perturbation
    reproduces its draws under a shared generator. For ``permute_sociality``
    each of ``n_permutations`` replicates reshuffles the sociality
    coordinates, re-burns the chain and keeps one draw.
    """
    if list(fit.names) != list(m.names):
        raise ValueError("fit and model terms are not aligned")
    if spec.kind == "sign_flip" and spec.term not in m.names:
        raise KeyError(f"model has no term {spec.term!r}")
    if spec.kind in ("zero_negative_sociality", "permute_sociality") and _sociality_index(m).size == 0:
        raise KeyError("model has no sociality terms")
    n = n or (m.support.n if m.support is not None else None)
    if n is None:
        raise ValueError("model support (or n) is needed to simulate")
    directed = m.support.directed if m.support is not None else False
    rng = rng if rng is not None else np.random.default_rng()
    theta = perturb_theta(fit.theta_hat, m, spec)
    offset = norm_shift_offset(spec.from_rule, spec.to_rule) if spec.kind == "norm_shift" else 0.0
    cfg = spec.chain
    chain = Chain(m.with_theta(theta), d, n, directed, initial=cfg.initial, rng=rng, edge_offset=offset)
    rows = []
    if spec.kind == "permute_sociality":
        idx = _sociality_index(m)
        for _ in range(spec.n_permutations):
            t = theta.copy()
            t[idx] = rng.permutation(theta[idx])
            chain.theta = t
            chain.advance(cfg.burn_in + cfg.thin)
            rows.append(_scalars(chain.graph()))
    else:
        chain.advance(cfg.burn_in)
        for _ in range(spec.replicates):
            chain.advance(cfg.thin)
            rows.append(_scalars(chain.graph()))
    return CounterfactualReport(pd.DataFrame(rows), theta, offset, spec.kind)


# local stability ---------------------------------------------------------

@dataclass
class StabilityResult:
    stable: bool
    witness: Optional[tuple]
    max_gain: float
    gains: np.ndarray

    def __bool__(self) -> bool:
        return self.stable


def toggle_gains(m: ModelSpec, d: Optional[NodeData], g: Graph) -> np.ndarray:
    """Potential change from toggling each edge variable, in lexical order."""
    bound = bind(m, d, g.n, g.directed)
    offset = m.reference.edge_offset(g.n)
    ei, ej = edge_index_arrays(g.n, g.directed)
    gains = np.empty(len(ei))
    for k, (i, j) in enumerate(zip(ei, ej)):
        up = float(m.theta @ change_stat(g, (int(i), int(j)), m, d, bound)) + offset
        gains[k] = -up if g.adj[i, j] else up
    return gains


def local_stability_check(m: ModelSpec, d: Optional[NodeData], g: Graph, tol: float = 1e-12) -> StabilityResult:
    """True iff no single edge toggle raises the graph potential.

    The witness is the toggle with the largest gain when the graph is not
    locally stable.
    """
    gains = toggle_gains(m, d, g)
    ei, ej = edge_index_arrays(g.n, g.directed)
    k = int(np.argmax(gains)) if gains.size else 0
    best = float(gains[k]) if gains.size else 0.0
    stable = best <= tol
    witness = None if stable else (int(ei[k]), int(ej[k]))
    return StabilityResult(stable, witness, best, gains)
