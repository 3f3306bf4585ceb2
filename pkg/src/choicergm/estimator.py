"""scikit-learn style front end for fitting and simulating ERGMs."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .control import ResolutionRule
from .dynamics import ChainConfig, simulate
from .estimation import SAConfig, build_design, mple, pseudo_loglik, stochastic_approx_mle, tune_lambda
from .model import ModelSpec, ReferenceMeasure, edge_probability_matrix
from .validation import check_graph, check_node_data, check_terms


def make_reference(reference) -> ReferenceMeasure:
    if isinstance(reference, ReferenceMeasure):
        return reference
    if reference in (None, "counting"):
        return ReferenceMeasure.counting()
    if reference == "krivitsky_sparse":
        return ReferenceMeasure("krivitsky_sparse")
    return ReferenceMeasure.multiplicity(ResolutionRule.parse(reference))


class ERGM(BaseEstimator):
    """Ridge-regularized ERGM fitted to a single observed network.

    Parameters
    ----------
    terms : sequence of str, dict or TermSpec
        Sufficient statistics of the model.
    reference : str, dict or ReferenceMeasure
        ``"counting"``, ``"krivitsky_sparse"`` or a resolution rule whose
        multiplicities enter as a fixed edge offset (e.g. ``"symphonic"``).
    lam : float or "cv"
        L2 penalty weight; ``"cv"`` tunes it by k-fold cross-validation of
        the pseudo-likelihood.
    method : {"mple", "sa"}
        Pseudo-likelihood only, or pseudo-likelihood followed by
        stochastic-approximation refinement.
    cv_folds : int
    sampler : ChainConfig, optional
        Draw settings for stochastic approximation and ``sample``.
    sa_config : SAConfig, optional
    random_state : int or None
    """

    def __init__(self, terms=("edges",), reference="counting", lam=0.0, method="mple",
                 cv_folds=10, sampler=None, sa_config=None, random_state=None):
        self.terms = terms
        self.reference = reference
        self.lam = lam
        self.method = method
        self.cv_folds = cv_folds
        self.sampler = sampler
        self.sa_config = sa_config
        self.random_state = random_state

    def _sampler(self, n_pairs: int) -> ChainConfig:
        if self.sampler is not None:
            return self.sampler
        return ChainConfig(burn_in=20 * n_pairs, thin=n_pairs, n_samples=50)

    def fit(self, X, y=None, node_data=None):
        if self.method not in ("mple", "sa"):
            raise ValueError(f"unknown method {self.method!r}")
        g = check_graph(X)
        d = check_node_data(node_data, g.n, g.directed)
        model = ModelSpec(check_terms(self.terms), None, make_reference(self.reference), g.support)
        rng = np.random.default_rng(self.random_state)
        design = build_design(g, model, d)
        if isinstance(self.lam, str):
            if self.lam != "cv":
                raise ValueError(f"lam must be a number or 'cv', got {self.lam!r}")
            lam = tune_lambda(g, model, d, self.cv_folds, rng, design=design)
        else:
            lam = float(self.lam)
        result = mple(design, lam)
        if self.method == "sa":
            result = stochastic_approx_mle(g, model, d, result.theta_hat, lam,
                                           self._sampler(g.support.n_edge_variables), rng,
                                           self.sa_config or SAConfig())
        self.lambda_ = lam
        self.fit_result_ = result
        self.coef_ = result.theta_hat
        self.se_ = result.se
        self.model_ = model.with_theta(result.theta_hat)
        self.node_data_ = d
        self.n_vertices_ = g.n
        self.directed_ = g.directed
        self.feature_names_ = model.names
        return self

    def _graph(self, X):
        g = check_graph(X, self.directed_)
        if g.n != self.n_vertices_:
            raise ValueError(f"model was fitted on {self.n_vertices_} vertices, got {g.n}")
        return g

    def predict_proba(self, X) -> np.ndarray:
        """Conditional probability of each edge given the rest of ``X``."""
        check_is_fitted(self)
        return edge_probability_matrix(self._graph(X), self.model_, self.node_data_)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) > 0.5).astype(np.uint8)

    def score(self, X, y=None) -> float:
        """Mean pseudo-log-likelihood per edge variable."""
        check_is_fitted(self)
        design = build_design(self._graph(X), self.model_, self.node_data_)
        return pseudo_loglik(design, self.coef_) / design.n_rows

    def sample(self, n_samples: int = 1, chain: ChainConfig = None, random_state=None) -> list:
        check_is_fitted(self)
        n_pairs = self.model_.support.n_edge_variables
        base = chain or self._sampler(n_pairs)
        cfg = ChainConfig(base.burn_in, base.thin, n_samples, base.initial)
        rng = np.random.default_rng(self.random_state if random_state is None else random_state)
        return simulate(self.model_, self.node_data_, cfg, rng)

    def coefficient_table(self):
        check_is_fitted(self)
        return self.fit_result_.table()
