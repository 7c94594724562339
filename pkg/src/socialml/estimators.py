"""scikit-learn style wrappers around the training and prediction routines.

Multi-view estimators take one feature matrix and a list of column groups
(``views``); view ``k`` is what agent ``k`` observes.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .adaboost import adaboost_votes, train_adaboost
from .losses import make_loss
from .network import as_combination_matrix, build_uniform_averaging, spectral_analysis
from .prediction import social_learning
from .training import TrainHyper, TrainingSet, train_erm


def _encode_labels(y):
    check_classification_targets(y)
    classes = np.unique(y)
    if classes.size != 2:
        raise ValueError(f"binary targets required, got {classes.size} classes")
    return classes, np.where(y == classes[1], 1, -1)


def _split_views(X, views):
    if views is None:
        raise ValueError("views must list the columns of every agent")
    out = []
    for v in views:
        cols = np.atleast_1d(np.arange(X.shape[1])[v])
        if cols.size == 0:
            raise ValueError("empty view")
        out.append(X[:, cols])
    return out


def _decode(classes, sign):
    return np.where(sign > 0, classes[1], classes[0])


class DebiasedClassifier(ClassifierMixin, BaseEstimator):
    """Bounded ERM classifier centred by its mean training output.

    Parameters
    ----------
    loss : str
        Surrogate loss name.
    kind : {"linear", "mlp"}
    beta : float
        Output bound.
    batch, epochs, rate, hidden, weight_norm_bound
        Mini-batch SGD settings.
    require_balanced : bool
        Reject training sets with unequal class counts.
    random_state : int
    """

    def __init__(self, loss="logistic", kind="linear", beta=1.0, batch=10, epochs=30, rate=0.05,
                 hidden=15, weight_norm_bound=None, require_balanced=True, random_state=0):
        self.loss = loss
        self.kind = kind
        self.beta = beta
        self.batch = batch
        self.epochs = epochs
        self.rate = rate
        self.hidden = hidden
        self.weight_norm_bound = weight_norm_bound
        self.require_balanced = require_balanced
        self.random_state = random_state

    def _hyper(self, seed=None):
        return TrainHyper(self.batch, self.epochs, self.rate,
                          self.random_state if seed is None else seed,
                          self.hidden, self.weight_norm_bound)

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y)
        self.classes_, signed = _encode_labels(y)
        data = TrainingSet(X, signed, require_balanced=self.require_balanced)
        self.agent_ = train_erm(data, make_loss(self.loss, self.beta), kind=self.kind,
                                hyper=self._hyper(), beta=self.beta, sample_weight=sample_weight)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "agent_")
        X = check_array(X)
        return self.agent_.statistic(X)

    def predict(self, X):
        return _decode(self.classes_, self.decision_function(X))


class SocialMachineLearning(ClassifierMixin, BaseEstimator):
    """Independently trained agents combined over a graph.

    ``decision_function`` returns the consensus limit of single-sample
    prediction, the Perron-weighted sum of the agents' debiased statistics.
    ``predict_stream`` runs the streaming recursion over rows that share one
    unknown label.

    Parameters
    ----------
    views : list
        Column selector per agent.
    combination : CombinationMatrix or array, optional
        Left-stochastic weights; defaults to uniform averaging on the
        complete graph.
    """

    def __init__(self, views=None, combination=None, loss="logistic", kind="linear", beta=1.0,
                 batch=10, epochs=30, rate=0.05, hidden=15, weight_norm_bound=None,
                 random_state=0):
        self.views = views
        self.combination = combination
        self.loss = loss
        self.kind = kind
        self.beta = beta
        self.batch = batch
        self.epochs = epochs
        self.rate = rate
        self.hidden = hidden
        self.weight_norm_bound = weight_norm_bound
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, signed = _encode_labels(y)
        parts = _split_views(X, self.views)
        K = len(parts)
        if self.combination is None:
            self.combination_ = build_uniform_averaging(np.ones((K, K), dtype=bool))
        else:
            self.combination_ = as_combination_matrix(self.combination)
        if self.combination_.K != K:
            raise ValueError(f"combination matrix has {self.combination_.K} agents, views give {K}")
        self.spectral_ = spectral_analysis(self.combination_)
        loss = make_loss(self.loss, self.beta)
        seeds = np.random.SeedSequence(self.random_state).generate_state(K)
        self.agents_ = [
            train_erm(TrainingSet(Xk, signed), loss, kind=self.kind,
                      hyper=TrainHyper(self.batch, self.epochs, self.rate, int(s), self.hidden,
                                       self.weight_norm_bound),
                      beta=self.beta)
            for Xk, s in zip(parts, seeds)
        ]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Per-agent debiased statistics, shape ``(n_samples, K)``."""
        check_is_fitted(self, "agents_")
        X = check_array(X)
        return np.column_stack([a.statistic(Xk) for a, Xk in zip(self.agents_, _split_views(X, self.views))])

    def decision_function(self, X):
        return self.transform(X) @ self.spectral_.perron

    def predict(self, X):
        return _decode(self.classes_, self.decision_function(X))

    def predict_stream(self, X):
        """Log-belief ratios ``(S, K)`` and decoded per-agent decisions for a stream."""
        lambdas = social_learning(self.transform(X), self.combination_)
        return lambdas, _decode(self.classes_, lambdas)


class MultiViewAdaBoost(ClassifierMixin, BaseEstimator):
    """Sequentially reweighted agents with an accuracy-weighted vote."""

    def __init__(self, views=None, loss="logistic", kind="linear", beta=1.0, batch=10, epochs=30,
                 rate=0.05, hidden=15, random_state=0):
        self.views = views
        self.loss = loss
        self.kind = kind
        self.beta = beta
        self.batch = batch
        self.epochs = epochs
        self.rate = rate
        self.hidden = hidden
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, signed = _encode_labels(y)
        parts = _split_views(X, self.views)
        seeds = np.random.SeedSequence(self.random_state).generate_state(len(parts))
        hypers = [TrainHyper(self.batch, self.epochs, self.rate, int(s), self.hidden) for s in seeds]
        self.ensemble_ = train_adaboost(
            [TrainingSet(p, signed, require_balanced=False) for p in parts],
            make_loss(self.loss, self.beta), kind=self.kind, hyper=hypers, beta=self.beta,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "ensemble_")
        X = check_array(X)
        votes = adaboost_votes(self.ensemble_, _split_views(X, self.views))
        return _decode(self.classes_, votes)
