"""Pseudo-likelihood and stochastic-approximation estimation from one network."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import expit, log_expit
from scipy.stats import norm

from .dynamics import Chain, ChainConfig
from .graph import Graph, edge_index_arrays
from .model import ModelSpec, NodeData, bind, compute_stats, descriptives
from . import _kernels as K

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DegeneracyError(RuntimeError):
    """Simulated graphs collapse to the empty or complete graph."""


@dataclass
class PseudoLikelihoodDesign:
    X: np.ndarray
    y: np.ndarray
    offset: np.ndarray
    names: list
    senders: np.ndarray
    receivers: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def subset(self, rows) -> "PseudoLikelihoodDesign":
        return PseudoLikelihoodDesign(self.X[rows], self.y[rows], self.offset[rows], self.names,
                                      self.senders[rows], self.receivers[rows])


@dataclass
class FitResult:
    theta_hat: np.ndarray
    se: Optional[np.ndarray]
    lam: float
    objective_trace: list
    converged: bool
    names: list = field(default_factory=list)
    method: str = "mple"
    message: str = ""
    t_ratios: Optional[np.ndarray] = None

    @property
    def z(self) -> Optional[np.ndarray]:
        return None if self.se is None else self.theta_hat / self.se

    @property
    def p_values(self) -> Optional[np.ndarray]:
        return None if self.se is None else 2.0 * norm.sf(np.abs(self.z))

    def table(self) -> pd.DataFrame:
        """Coefficient table; se and Wald p-values are heuristic under regularization."""
        se = self.se if self.se is not None else np.full_like(self.theta_hat, np.nan)
        p = self.p_values if self.se is not None else np.full_like(self.theta_hat, np.nan)
        return pd.DataFrame({"term": self.names, "estimate": self.theta_hat, "se": se, "p_value": p})

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "terms": list(self.names),
            "theta_hat": self.theta_hat.tolist(),
            "se": None if self.se is None else self.se.tolist(),
            "lambda": self.lam,
            "converged": self.converged,
            "iterations": len(self.objective_trace),
            "message": self.message,
            "inference_note": "standard errors and p-values are heuristic under L2 regularization",
        }


def build_design(g: Graph, m: ModelSpec, d: Optional[NodeData] = None) -> PseudoLikelihoodDesign:
    """One logistic-regression row per edge variable, change scores taken with the edge absent."""
    b = bind(m, d, g.n, g.directed)
    ei, ej = edge_index_arrays(g.n, g.directed)
    X = np.zeros((len(ei), len(m.terms)))
    row = np.zeros(len(m.terms))
    for r in range(len(ei)):
        K.change_stats(g.adj, ei[r], ej[r], g.directed, *b.args(), row)
        X[r] = row
    y = g.adj[ei, ej].astype(float)
    offset = np.full(len(ei), m.reference.edge_offset(g.n))
    return PseudoLikelihoodDesign(X, y, offset, m.names, ei, ej)


def pseudo_loglik(design: PseudoLikelihoodDesign, theta) -> float:
    eta = design.offset + design.X @ np.asarray(theta, dtype=float)
    return float(np.sum(design.y * log_expit(eta) + (1 - design.y) * log_expit(-eta)))


def _penalized(design, theta, lam):
    return -pseudo_loglik(design, theta) + lam * float(theta @ theta)


def mple(design: PseudoLikelihoodDesign, lam: float = 0.0, theta0=None,
         max_iter: int = 200, tol: float = 1e-8) -> FitResult:
    """Ridge-penalized maximum pseudo-likelihood by damped Newton iterations.

    Maximizes sum log Bernoulli(y | expit(offset + X theta)) - lam * ||theta||^2.
    Offsets are fixed. Converged when the gradient max-norm drops below ``tol``.
    """
    if design.n_rows == 0:
        raise ValueError("design has no rows")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X, y = design.X, design.y
    p = X.shape[1]
    theta = np.zeros(p) if theta0 is None else np.array(theta0, dtype=float)
    trace = [_penalized(design, theta, lam)]
    converged = False
    message = ""
    for _ in range(max_iter):
        mu = expit(design.offset + X @ theta)
        grad = X.T @ (y - mu) - 2.0 * lam * theta
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        W = mu * (1.0 - mu)
        H = (X * W[:, None]).T @ X + 2.0 * lam * np.eye(p)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        f0 = trace[-1]
        decrease = grad @ step
        # below rounding noise of the objective Armijo cannot discriminate; take the full step
        exact = decrease < 1e-12 * (1.0 + abs(f0))
        while t > 1e-10 and not exact:
            cand = theta + t * step
            f1 = _penalized(design, cand, lam)
            if f1 <= f0 + 1e-4 * t * -(grad @ step):
                break
            t *= 0.5
        if exact:
            cand = theta + step
            f1 = _penalized(design, cand, lam)
        elif t <= 1e-10:
            message = "line search stalled"
            break
        theta = cand
        trace.append(f1)
        if np.max(np.abs(theta)) > 50.0 and lam == 0:
            message = "estimates diverging (complete or quasi-complete separation)"
            break
    else:
        message = f"no convergence after {max_iter} iterations"
    if converged and lam == 0:
        # gradient vanishes along a separating direction long before |theta| hits the cap
        mu = expit(design.offset + X @ theta)
        if np.max(np.abs(theta)) > 15.0 and np.min(np.minimum(mu, 1.0 - mu)) < 1e-7:
            converged = False
            message = "estimates diverging (complete or quasi-complete separation)"
    if not converged and not message:
        message = "no convergence"
    if not converged:
        hint = "; consider lambda > 0" if lam == 0 else ""
        warnings.warn(f"MPLE: {message}{hint}", RuntimeWarning, stacklevel=2)
    mu = expit(design.offset + X @ theta)
    info = (X * (mu * (1 - mu))[:, None]).T @ X + 2.0 * lam * np.eye(p)
    se = None
    if np.linalg.cond(info) < 1e12:
        se = np.sqrt(np.diag(np.linalg.inv(info)))
    return FitResult(theta, se, lam, trace, converged, list(design.names), "mple", message)


def cv_folds(y: np.ndarray, k: int, rng) -> np.ndarray:
    """Fold label per row, stratified by the observed edge state."""
    if k < 2:
        raise ValueError("need at least two folds")
    folds = np.empty(len(y), dtype=np.int64)
    for state in (0, 1):
        idx = np.flatnonzero(y == state)
        if 0 < len(idx) < k:
            raise ValueError(f"only {len(idx)} rows with edge state {state}; cannot fill {k} folds")
        idx = rng.permutation(idx)
        folds[idx] = np.arange(len(idx)) % k
    return folds


def cv_score(design: PseudoLikelihoodDesign, lam: float, folds: np.ndarray) -> float:
    """Mean held-out pseudo-log-likelihood per row."""
    total = 0.0
    k = folds.max() + 1
    for f in range(k):
        test = folds == f
        train = design.subset(~test)
        if np.unique(train.y).size < 2:
            raise ValueError("training fold contains a single edge state")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = mple(train, lam)
        total += pseudo_loglik(design.subset(test), fit.theta_hat)
    return total / design.n_rows


def golden_section_max(f, a: float, b: float, tol: float = 1e-3):
    """Maximize a unimodal ``f`` on [a, b]; endpoints are also checked."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def tune_lambda(g: Graph, m: ModelSpec, d: Optional[NodeData] = None, k_folds: int = 10,
                rng=None, log10_bounds=(-4.0, 2.0), tol: float = 1e-3,
                design: Optional[PseudoLikelihoodDesign] = None) -> float:
    """Cross-validated ridge weight by golden-section search on log10(lambda)."""
    rng = rng if rng is not None else np.random.default_rng()
    design = design if design is not None else build_design(g, m, d)
    try:
        folds = cv_folds(design.y, k_folds, rng)
    except ValueError:
        folds = cv_folds(design.y, k_folds, np.random.default_rng(rng.integers(2**63)))
    cache = {}

    def score(x):
        if x not in cache:
            cache[x] = cv_score(design, 10.0 ** x, folds)
        return cache[x]

    lo, hi = log10_bounds
    x, fx = golden_section_max(score, lo, hi, tol)
    for end in (lo, hi):
        if score(end) > fx:
            x, fx = end, score(end)
    log.debug("tune_lambda: log10(lambda)=%.4f, cv score %.6f", x, fx)
    return 10.0 ** x


@dataclass(frozen=True)
class SAConfig:
    """Gains and phase lengths for regularized stochastic approximation."""

    a0: float = 0.1
    n_iter: int = 100
    n_phase1: int = 100
    n_check: int = 500
    check_tol: float = 0.1
    restarts: int = 3


def _simulate_stats(chain: Chain, m: ModelSpec, d, n_draws: int, thin: int):
    out = np.empty((n_draws, len(m.terms)))
    sizes = np.empty(n_draws, dtype=np.int64)
    for k in range(n_draws):
        chain.advance(thin)
        g = chain.graph()
        out[k] = compute_stats(g, m, d)
        sizes[k] = g.n_edges()
    return out, sizes


def _degenerate(sizes: np.ndarray, n_pairs: int) -> bool:
    return bool(np.all(sizes == 0) or np.all(sizes == n_pairs))


def stochastic_approx_mle(g: Graph, m: ModelSpec, d: Optional[NodeData], theta0, lam: float,
                          sampler_cfg: ChainConfig, rng=None, config: SAConfig = SAConfig()) -> FitResult:
    """Regularized Robbins-Monro moment matching.

    theta <- theta + a_t D^-1 (t_obs - mean simulated t - 2 lam theta), with
    a_t = a0 / (t + 1) and D the diagonal of (Cov t + 2 lam I) estimated in a
    first simulation phase. ``sampler_cfg.n_samples`` draws (``thin`` events
    apart) give the simulated mean at each iteration. The final phase passes
    when every regularized score is within ``check_tol`` simulated standard
    deviations of zero.
    """
    rng = rng if rng is not None else np.random.default_rng()
    theta = np.array(theta0, dtype=float)
    if theta.shape != (len(m.terms),) or not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite with one entry per term")
    t_obs = compute_stats(g, m, d)
    n_pairs = g.support.n_edge_variables

    for attempt in range(config.restarts):
        initial = g if attempt == 0 else ("random", float(rng.random()))
        chain = Chain(m.with_theta(theta), d, g.n, g.directed, initial=initial, rng=rng)
        chain.advance(sampler_cfg.burn_in)
        S, sizes = _simulate_stats(chain, m, d, config.n_phase1, sampler_cfg.thin)
        if not _degenerate(sizes, n_pairs):
            break
        log.warning("phase 1 simulations degenerate (attempt %d)", attempt + 1)
    else:
        raise DegeneracyError(f"simulations degenerate after {config.restarts} restarts")
    D = np.var(S, axis=0) + 2.0 * lam
    D = np.where(D > 1e-8, D, 1.0)

    trace = []
    for t in range(config.n_iter):
        chain.theta = np.ascontiguousarray(theta)
        S, _ = _simulate_stats(chain, m, d, sampler_cfg.n_samples, sampler_cfg.thin)
        score = t_obs - S.mean(axis=0) - 2.0 * lam * theta
        trace.append(float(np.sum(score ** 2 / D)))
        theta = theta + (config.a0 / (t + 1)) * score / D

    chain.theta = np.ascontiguousarray(theta)
    S, sizes = _simulate_stats(chain, m, d, config.n_check, sampler_cfg.thin)
    if _degenerate(sizes, n_pairs):
        raise DegeneracyError("final-phase simulations are degenerate")
    sd = S.std(axis=0)
    sd = np.where(sd > 0, sd, np.inf)
    ratio = (t_obs - S.mean(axis=0) - 2.0 * lam * theta) / sd
    converged = bool(np.all(np.abs(ratio) < config.check_tol))
    p = len(theta)
    info = np.cov(S, rowvar=False).reshape(p, p) + 2.0 * lam * np.eye(p)
    se = None
    if np.linalg.cond(info) < 1e12:
        se = np.sqrt(np.diag(np.linalg.inv(info)))
    msg = "max |t-ratio| = %.3f" % float(np.max(np.abs(ratio)))
    return FitResult(theta, se, lam, trace, converged, m.names, "stochastic_approximation", msg, ratio)


@dataclass
class AdequacyReport:
    table: pd.DataFrame
    n_draws: int

    @property
    def all_covered(self) -> bool:
        return bool(self.table["covered"].all())

    def panel(self, name: str) -> pd.DataFrame:
        return self.table[self.table["panel"] == name]

    def panel_covered(self, name: str) -> bool:
        return bool(self.panel(name)["covered"].all())


def _panel_values(g: Graph) -> dict:
    s = descriptives(g)
    geo = np.append(s.geodesic_distribution, s.unreachable_pairs)
    return {
        "degree": s.degree_distribution.astype(float),
        "esp": s.esp_distribution.astype(float),
        "geodesic": geo.astype(float),
        "density": np.array([s.density]),
        "centralization": np.array([s.centralization]),
        "isolates": np.array([float(s.isolates)]),
    }


def _bin_labels(panel: str, size: int) -> list:
    if panel == "geodesic":
        return [str(k) for k in range(1, size)] + ["inf"]
    if panel in ("degree", "esp"):
        return [str(k) for k in range(size)]
    return [panel]


def simulation_intervals(observed: dict, sims: list, level: float = 0.95) -> pd.DataFrame:
    lo_q, hi_q = 100 * (1 - level) / 2, 100 * (1 + level) / 2
    rows = []
    for panel, obs in observed.items():
        arr = np.vstack([s[panel] for s in sims])
        lo = np.percentile(arr, lo_q, axis=0)
        hi = np.percentile(arr, hi_q, axis=0)
        for label, o, a, b, mean in zip(_bin_labels(panel, len(obs)), obs, lo, hi, arr.mean(axis=0)):
            rows.append({"panel": panel, "bin": label, "observed": o, "lower": a, "upper": b,
                         "sim_mean": mean, "covered": bool(a <= o <= b)})
    return pd.DataFrame(rows)


def adequacy_check(m_fitted: ModelSpec, d: Optional[NodeData], g_obs: Graph, cfg: ChainConfig,
                   rng=None) -> AdequacyReport:
    """95% simulation intervals per descriptive bin with coverage flags."""
    chain = Chain(m_fitted, d, g_obs.n, g_obs.directed, initial=cfg.initial, rng=rng)
    chain.advance(cfg.burn_in)
    sims = []
    for _ in range(cfg.n_samples):
        chain.advance(cfg.thin)
        sims.append(_panel_values(chain.graph()))
    return AdequacyReport(simulation_intervals(_panel_values(g_obs), sims), cfg.n_samples)
