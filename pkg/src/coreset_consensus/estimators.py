"""scikit-learn style estimators trained by core-set consensus.

Each estimator spreads the training rows over ``n_nodes`` simulated peers
(round-robin), runs the consensus simulation on the chosen graph process
and builds its model from the agreed core-set only.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, OutlierMixin, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .consensus import round_robin, run_consensus
from .coreset import best_candidate
from .meb import BallCache, SolverConfig, solve_meb
from .netsim import parse_activity, parse_graph
from .reductions import extract_classifier, oneclass_to_meb, svdd_score, svm2norm_to_meb, SvmProblem
from .space import Kernel, PointSpace


class _ConsensusMixin:
    """Shared fitting machinery; subclasses supply the point space."""

    def _kernel(self):
        if self.kernel == "linear":
            return Kernel("linear")
        if self.kernel in ("gaussian", "rbf"):
            return Kernel("gaussian", float(self.gamma))
        return Kernel.parse(self.kernel)

    def _solve(self, space: PointSpace):
        n_points = space.n_points
        n_nodes = n_points if self.n_nodes is None else int(self.n_nodes)
        if not 1 <= n_nodes <= n_points:
            raise ValueError(f"n_nodes must lie in [1, {n_points}], got {n_nodes}")
        config = SolverConfig(self.tol, self.max_iter)
        cache = BallCache(space, config)
        trace = run_consensus(
            space, round_robin(n_points, n_nodes),
            parse_graph(self.graph, n_nodes, self.random_state),
            parse_activity(self.activity, self.random_state),
            epsilon=self.epsilon, max_rounds=self.max_rounds,
            seed=self.random_state, cache=cache, check_fixed_point=False)
        if trace.converged:
            final = trace.final
        else:
            warnings.warn(f"no consensus after {trace.rounds_run} rounds; using the "
                          "best candidate held by any node", ConvergenceWarning)
            final = best_candidate([s.candidate for s in trace.states])
        self.trace_ = trace
        self.coreset_ = np.asarray(final.unique_ids(), dtype=int)
        self.n_rounds_ = trace.rounds_run
        self.consensus_round_ = trace.consensus_round
        # the model is rebuilt from the core-set alone
        return solve_meb(space, self.coreset_, config)


class CoreSetMEB(_ConsensusMixin, TransformerMixin, BaseEstimator):
    """Approximate minimum enclosing ball of the rows of ``X``.

    Parameters
    ----------
    epsilon : float, default=0.1
        Tolerance; the core-set holds ``ceil(1 / epsilon)`` points and every
        training row ends within ``(1 + epsilon)`` times the optimal radius of
        the fitted center.
    n_nodes : int, optional
        Number of simulated peers; defaults to one row per peer.
    graph : str, default="ring"
        ``"ring"``, ``"complete"``, ``"er:P"`` or ``"file:PATH"``.
    activity : str, default="on"
        ``"on"`` or ``"bernoulli:Q"``.
    max_rounds : int, default=10000
    tol, max_iter
        Stopping rule of the inner MEB solver.
    random_state : int, default=0

    Attributes
    ----------
    center_ : ndarray of shape (n_features,)
    radius_ : float
    coreset_ : ndarray of int
        Row indices of the agreed core-set.
    support_, weights_ : ndarray
        Rows with positive weight in the center's convex combination.
    trace_ : Trace
    """

    def __init__(self, epsilon=0.1, n_nodes=None, graph="ring", activity="on",
                 max_rounds=10000, tol=1e-10, max_iter=100000, random_state=0):
        self.epsilon = epsilon
        self.n_nodes = n_nodes
        self.graph = graph
        self.activity = activity
        self.max_rounds = max_rounds
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        space = PointSpace.explicit(X)
        ball = self._solve(space)
        self.support_ = np.asarray(ball.support, dtype=int)
        self.weights_ = np.asarray(ball.weights)
        self.center_ = space.center(ball)
        self.radius_ = ball.radius
        return self

    def transform(self, X):
        """Distance of each row to the fitted center, as a single column."""
        check_is_fitted(self, "center_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.linalg.norm(X - self.center_, axis=1)[:, None]


class CoreSetSVC(_ConsensusMixin, ClassifierMixin, BaseEstimator):
    """Binary 2-norm soft-margin SVM trained through its MEB form.

    ``kernel`` is ``"gaussian"`` (bandwidth ``gamma``) or ``"linear"``. The
    linear kernel requires rows of equal norm.
    """

    def __init__(self, kernel="gaussian", gamma=0.5, C=10.0, epsilon=0.05, n_nodes=None,
                 graph="ring", activity="on", max_rounds=10000, tol=1e-10,
                 max_iter=100000, random_state=0):
        self.kernel = kernel
        self.gamma = gamma
        self.C = C
        self.epsilon = epsilon
        self.n_nodes = n_nodes
        self.graph = graph
        self.activity = activity
        self.max_rounds = max_rounds
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(f"need exactly two classes, got {self.classes_.size}")
        self.n_features_in_ = X.shape[1]
        labels = np.where(y == self.classes_[1], 1.0, -1.0)
        problem = SvmProblem(X, labels, self._kernel(), float(self.C))
        space = svm2norm_to_meb(problem)
        self.model_ = extract_classifier(space, self._solve(space))
        self.support_ = self.model_.ids
        self.dual_coef_ = self.model_.weights * self.model_.labels
        self.intercept_ = self.model_.b
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(check_array(X))

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


class CoreSetSVDD(_ConsensusMixin, OutlierMixin, BaseEstimator):
    """Support vector data description: a kernel-space ball around the data.

    ``decision_function`` is positive inside the ball. The boundary is the
    largest training distance to the fitted center, so every training row
    is an inlier.
    """

    def __init__(self, kernel="gaussian", gamma=0.5, epsilon=0.1, n_nodes=None,
                 graph="ring", activity="on", max_rounds=10000, tol=1e-10,
                 max_iter=100000, random_state=0):
        self.kernel = kernel
        self.gamma = gamma
        self.epsilon = epsilon
        self.n_nodes = n_nodes
        self.graph = graph
        self.activity = activity
        self.max_rounds = max_rounds
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.space_ = PointSpace.svdd(X, self._kernel())
        self.ball_ = self._solve(self.space_)
        self.radius2_ = float(self.space_.dist2_many(np.arange(X.shape[0]), self.ball_).max())
        return self

    def score_samples(self, X):
        """Negated squared feature-space distance to the center."""
        check_is_fitted(self, "ball_")
        return -svdd_score(self.space_, self.ball_, check_array(X))

    def decision_function(self, X):
        return self.score_samples(X) + self.radius2_

    def predict(self, X):
        return np.where(self.decision_function(X) >= -1e-9 * max(1.0, self.radius2_), 1, -1)


class OneClassL2SVM(_ConsensusMixin, BaseEstimator):
    """One-class 2-norm SVM (all labels +1, no bias).

    ``decision_function`` returns the raw kernel expansion; ``rho_`` is the
    margin. Choosing an outlier threshold is left to the caller.
    """

    def __init__(self, kernel="gaussian", gamma=0.5, C=10.0, epsilon=0.1, n_nodes=None,
                 graph="ring", activity="on", max_rounds=10000, tol=1e-10,
                 max_iter=100000, random_state=0):
        self.kernel = kernel
        self.gamma = gamma
        self.C = C
        self.epsilon = epsilon
        self.n_nodes = n_nodes
        self.graph = graph
        self.activity = activity
        self.max_rounds = max_rounds
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        space = oneclass_to_meb(X, self._kernel(), float(self.C))
        self.model_ = extract_classifier(space, self._solve(space))
        self.rho_ = self.model_.rho
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(check_array(X))

    score_samples = decision_function
