"""Sequentially boosted agents with an accuracy-weighted central vote.

Agents see different views of the same index-aligned samples. Agent ``j + 1``
trains on sample weights that upweight the indices agent ``j``
misclassified; the final decision is ``sign(sum_k a_k vote_k)`` with ``a_k``
the training accuracy of agent ``k``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InvalidInputError
from .prediction import TIE
from .training import TrainHyper, train_erm


@dataclass
class BoostEnsemble:
    models: list
    accuracies: np.ndarray
    stage_weights: np.ndarray = field(default=None, repr=False)
    sample_weights: list = field(default_factory=list, repr=False)

    @property
    def K(self):
        return len(self.models)


def _misclassified(model, data):
    # a zero score is no decision, hence wrong
    return np.sign(model(data.X)) != data.y


def train_adaboost(datasets, loss, kind="linear", hyper=None, beta=1.0):
    """Train agents in index order with multiplicative reweighting.

    The reweighting multiplier on misclassified samples is
    ``exp(2 s) = (1 - err) / err`` with stage weight
    ``s = max(0, 0.5 log((1 - err) / err))`` and ``err`` the weighted error;
    weights are renormalized to sum to one. ``hyper`` may be a single
    :class:`TrainHyper` or one per agent.
    """
    if len(datasets) == 0:
        raise InvalidInputError("at least one training set is required")
    N = datasets[0].N
    if any(d.N != N for d in datasets):
        raise InvalidInputError("boosting needs index-aligned training sets of equal size")
    hypers = hyper if isinstance(hyper, (list, tuple)) else [hyper or TrainHyper()] * len(datasets)
    if len(hypers) != len(datasets):
        raise InvalidInputError("one hyperparameter set per agent is required")

    weights = np.full(N, 1.0 / N)
    models, acc, stages, history = [], [], [], [weights.copy()]
    for data, hp in zip(datasets, hypers):
        agent = train_erm(data, loss, kind=kind, hyper=hp, beta=beta, sample_weight=weights)
        wrong = _misclassified(agent.model, data)
        models.append(agent.model)
        acc.append(1.0 - float(np.mean(wrong)))
        err = float(weights @ wrong)
        if err <= 0.0 or err >= 0.5:
            stage = 0.0
        else:
            stage = 0.5 * math.log((1.0 - err) / err)
        stages.append(stage)
        if stage > 0.0:
            weights = weights * np.where(wrong, math.exp(2.0 * stage), 1.0)
            weights /= weights.sum()
        history.append(weights.copy())
    return BoostEnsemble(models, np.array(acc), np.array(stages), history)


def ensemble_accuracies(ensemble, datasets):
    """Recompute ``a_k`` from the training sets."""
    return np.array([1.0 - float(np.mean(_misclassified(m, d))) for m, d in zip(ensemble.models, datasets)])


def adaboost_votes(ensemble, observations):
    """Weighted vote for per-agent arrays of shape ``(..., d_k)``.

    Returns an integer array over the leading axes with values +1, -1 or
    ``TIE``.
    """
    if len(observations) != ensemble.K:
        raise InvalidInputError(f"need one observation array per agent ({ensemble.K})")
    total = 0.0
    for a_k, model, obs in zip(ensemble.accuracies, ensemble.models, observations):
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim == 0 or obs.shape[-1] != model.dim:
            obs = obs[..., None]
        if obs.shape[-1] != model.dim:
            raise InvalidInputError(f"agent expects dimension {model.dim}, got {obs.shape[-1]}")
        scores = model(obs.reshape(-1, model.dim)).reshape(obs.shape[:-1])
        total = total + a_k * np.sign(scores)
    return np.sign(total).astype(np.int8)


def adaboost_predict(ensemble, observations):
    """Decision for one feature vector per agent: +1, -1 or ``TIE``."""
    obs = [np.atleast_1d(np.asarray(h, dtype=np.float64)) for h in observations]
    for h, m in zip(obs, ensemble.models):
        if h.ndim != 1 or h.size != m.dim:
            raise InvalidInputError(f"expected a feature vector of dimension {m.dim}, got shape {h.shape}")
    out = int(adaboost_votes(ensemble, obs))
    return TIE if out == 0 else out


def with_accuracies(ensemble, accuracies):
    """Copy of ``ensemble`` voting with the given weights."""
    return replace(ensemble, accuracies=np.asarray(accuracies, dtype=np.float64))
