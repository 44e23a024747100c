"""Scikit-learn style regressor wrapping the adaptive fitting pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .adaptation import AdaptConfig, adaptive_fit
from .bases import LegendreBasis
from .learning import AlsConfig
from .network import evaluate, storage_complexity
from .tree import build_tree

__all__ = ["TreeTensorRegressor"]


class TreeTensorRegressor(BaseEstimator, RegressorMixin):
    """Regression in an adaptively learned tree-based tensor format.

    Parameters
    ----------
    degree : int
        Maximum polynomial degree of the per-dimension Legendre bases.
    tree : {'balanced', 'linear', 'trivial'}
        Shape of the starting dimension tree.
    leaf_order : sequence of int or None
        Permutation of 1..d assigning dimensions to leaves (identity default).
    tree_adaptation : bool
        Whether to search over trees while adapting ranks.
    max_iterations, n_tree_trials, validation_fraction, eps_goal,
    tau_overfit, theta_star : adaptation settings (see
    :class:`~ttnlearn.adaptation.AdaptConfig`).
    max_sweeps, stagnation_tol, pattern_selection : ALS settings.
    random_state : int or None
        Seed for all stochastic steps.

    Attributes
    ----------
    network_ : TreeTensorNetwork
        The fitted model.
    records_ : list of IterationRecord
        The adaptation trace.
    """

    def __init__(
        self,
        degree=5,
        tree="balanced",
        leaf_order=None,
        tree_adaptation=True,
        max_iterations=50,
        n_tree_trials=100,
        validation_fraction=0.2,
        eps_goal=1e-14,
        tau_overfit=10.0,
        theta_star=0.8,
        max_sweeps=30,
        stagnation_tol=1e-10,
        pattern_selection=True,
        random_state=None,
    ):
        self.degree = degree
        self.tree = tree
        self.leaf_order = leaf_order
        self.tree_adaptation = tree_adaptation
        self.max_iterations = max_iterations
        self.n_tree_trials = n_tree_trials
        self.validation_fraction = validation_fraction
        self.eps_goal = eps_goal
        self.tau_overfit = tau_overfit
        self.theta_star = theta_star
        self.max_sweeps = max_sweeps
        self.stagnation_tol = stagnation_tol
        self.pattern_selection = pattern_selection
        self.random_state = random_state

    def _config(self):
        return AdaptConfig(
            theta_star=self.theta_star,
            n_tree_trials=self.n_tree_trials,
            eps_goal=self.eps_goal,
            tau_overfit=self.tau_overfit,
            max_iterations=self.max_iterations,
            validation_fraction=self.validation_fraction,
            tree_adaptation=self.tree_adaptation,
            als=AlsConfig(
                max_sweeps=self.max_sweeps,
                stagnation_tol=self.stagnation_tol,
                pattern_selection=self.pattern_selection,
            ),
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] < 2:
            raise ValueError("need at least two features")
        if np.abs(X).max() > 1.0 + 1e-12:
            raise ValueError("features must lie in [-1, 1]")
        rng = np.random.default_rng(self.random_state)
        tree = build_tree(self.tree, X.shape[1], self.leaf_order)
        bases = LegendreBasis(self.degree)
        self.network_, self.records_ = adaptive_fit(
            (X, y), bases, self._config(), rng, tree
        )
        self.n_features_in_ = X.shape[1]
        self.storage_ = storage_complexity(
            self.network_.tree, self.network_.ranks, self.network_.leaf_dims
        )
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("feature count mismatch")
        return evaluate(self.network_, X)
