import numpy as np
import pytest

from socialml.adaboost import (
    BoostEnsemble,
    adaboost_predict,
    adaboost_votes,
    ensemble_accuracies,
    train_adaboost,
    with_accuracies,
)
from socialml.datagen import heterogeneous_preset, sample_streams, sample_training_sets
from socialml.exceptions import InvalidInputError
from socialml.losses import make_loss
from socialml.prediction import TIE
from socialml.training import BoundedModel, TrainHyper, TrainingSet, train_erm

HYPER = TrainHyper(batch=10, epochs=20, rate=0.05, seed=3)


def sign_model(w):
    """Linear model voting sign(w * h)."""
    return BoundedModel("linear", {"w": np.atleast_1d(np.asarray(w, dtype=float)), "b": np.array(0.0)}, 1.0)


def test_single_agent_reduces_to_erm():
    data = sample_training_sets(heterogeneous_preset(), 60, 1)[0]
    loss = make_loss("logistic", 1.0)
    ens = train_adaboost([data], loss, hyper=HYPER)
    ref = train_erm(data, loss, hyper=HYPER)
    np.testing.assert_array_equal(ens.models[0].get_flat(), ref.model.get_flat())
    assert ens.accuracies[0] == pytest.approx(np.mean(np.sign(ref.model(data.X)) == data.y))


def test_perfect_agent_leaves_weights_unchanged():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([-1, -1, 1, 1])
    data = TrainingSet(X, y)
    ens = train_adaboost([data, data], make_loss("logistic", 1.0), hyper=TrainHyper(batch=4, epochs=50, rate=1.0))
    assert ens.accuracies[0] == 1.0
    np.testing.assert_array_equal(ens.sample_weights[1], ens.sample_weights[0])


def test_weights_stay_normalized_and_accuracies_recompute():
    model = heterogeneous_preset()
    sets = sample_training_sets(model, 80, 11)
    ens = train_adaboost(sets, make_loss("logistic", 1.0), hyper=HYPER)
    for w in ens.sample_weights:
        assert abs(w.sum() - 1.0) <= 1e-12 and np.all(w > 0)
    np.testing.assert_allclose(ensemble_accuracies(ens, sets), ens.accuracies, atol=1e-10)
    assert np.all((0 <= ens.accuracies) & (ens.accuracies <= 1))
    # at least one stage upweighted its predecessor's mistakes
    assert any(not np.allclose(a, b) for a, b in zip(ens.sample_weights, ens.sample_weights[1:]))


def test_misaligned_sets_rejected():
    a = TrainingSet([[0.0], [1.0]], [1, -1])
    b = TrainingSet([[0.0], [1.0], [2.0], [3.0]], [1, -1, 1, -1])
    with pytest.raises(InvalidInputError):
        train_adaboost([a, b], make_loss("logistic", 1.0))


def test_vote_examples():
    ens = BoostEnsemble([sign_model(1.0), sign_model(-1.0)], np.array([0.9, 0.6]))
    assert adaboost_predict(ens, [[1.0], [1.0]]) == 1
    assert adaboost_predict(with_accuracies(ens, [0.7, 0.7]), [[1.0], [1.0]]) == TIE
    unanimous = BoostEnsemble([sign_model(1.0), sign_model(1.0)], np.array([0.6, 0.8]))
    assert adaboost_predict(unanimous, [[2.0], [0.5]]) == 1
    assert adaboost_predict(unanimous, [[-2.0], [-0.5]]) == -1
    with pytest.raises(InvalidInputError):
        adaboost_predict(unanimous, [[1.0, 2.0], [0.5]])


def test_vote_is_time_invariant_and_uncorrelated():
    model = heterogeneous_preset()
    sets = sample_training_sets(model, 100, 4)
    ens = train_adaboost(sets, make_loss("logistic", 1.0), hyper=HYPER)
    streams = sample_streams(model, 1, 6, 20_000, 9)
    err = adaboost_votes(ens, streams) <= 0
    rates = err.mean(axis=0)
    p = err.mean()
    se = np.sqrt(p * (1 - p) / err.shape[0])
    assert np.all(np.abs(rates - p) <= 4.5 * se)
    lag = np.corrcoef(err[:, :-1].ravel(), err[:, 1:].ravel())[0, 1]
    assert abs(lag) <= 4.5 / np.sqrt(err[:, 1:].size)
