import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from oracles import closed_form_lambda, random_primitive
from socialml.datagen import NetworkDataModel, sample_streams, scalar_source
from socialml.exceptions import ConvergenceError, InvalidInputError, PreconditionError
from socialml.network import spectral_analysis
from socialml.prediction import (
    TIE,
    BeliefState,
    Perturbation,
    bounded_difference_check,
    consensus_from_statistics,
    consensus_single_sample,
    run_statistical_classification,
    social_learning,
    social_learning_step,
    stream_statistics,
    variance_budget,
)
from socialml.training import BoundedModel, TrainedAgent, oracle_agent

A2 = np.array([[0.5, 0.25], [0.5, 0.75]])


class ConstantModel:
    """Model returning a fixed value; used to inject exact statistics."""

    kind = "constant"

    def __init__(self, value, dim=1, beta=1.0):
        self.value, self.dim, self.beta = value, dim, beta

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.full(X.shape[0], float(self.value))


def identity_agent(beta=1.0):
    """Statistic equal to the (clipped) scalar feature itself."""
    return TrainedAgent(BoundedModel("linear", {"w": np.array([1e-9]), "b": np.array(0.0)}, beta), 0.0)


class LinearAgent:
    """c(h) = h for scalar features; not bounded, for algebraic tests only."""

    beta = 1.0
    dim = 1

    def statistic(self, X):
        return np.asarray(X, dtype=float).reshape(-1)


def test_step_hand_example():
    out = social_learning_step(BeliefState(np.array([1.0, -1.0]), 3), [2.0, 0.0], A2)
    np.testing.assert_allclose(out.lambdas, [1.0, 0.0])
    assert out.time == 4


def test_step_validation():
    with pytest.raises(InvalidInputError):
        social_learning_step(BeliefState.initial(2), [np.nan, 0.0], A2)
    with pytest.raises(InvalidInputError):
        social_learning_step(BeliefState.initial(2), [1.0], A2)


def test_single_agent_is_cumulative_sum():
    c = np.random.default_rng(0).normal(size=(20, 1))
    np.testing.assert_allclose(social_learning(c, [[1.0]]), np.cumsum(c, axis=0))


def test_zero_statistics_stay_zero():
    assert np.all(social_learning(np.zeros((5, 2)), A2) == 0.0)


@given(st.integers(1, 6), st.integers(1, 50), st.integers(0, 2**31))
def test_recursion_matches_closed_form(K, S, seed):
    rng = np.random.default_rng(seed)
    a = random_primitive(rng, K) if K > 1 else np.ones((1, 1))
    c = rng.uniform(-2, 2, size=(S, K))
    np.testing.assert_allclose(social_learning(c, a), closed_form_lambda(a, c), atol=1e-9, rtol=0)


@given(st.integers(2, 5), st.integers(0, 2**31))
def test_belief_growth_bound(K, seed):
    rng = np.random.default_rng(seed)
    a = random_primitive(rng, K)
    beta = 1.5
    c = rng.uniform(-2 * beta, 2 * beta, size=(30, K))
    lam = social_learning(c, a)
    assert np.all(np.abs(lam) <= 2 * beta * np.arange(1, 31)[:, None] + 1e-12)


def test_vectorized_runs_match_single_runs():
    rng = np.random.default_rng(1)
    c = rng.normal(size=(4, 6, 2))
    full = social_learning(c, A2)
    for r in range(4):
        np.testing.assert_allclose(full[r], social_learning(c[r], A2))


def test_all_positive_statistics_never_err():
    agents = [TrainedAgent(ConstantModel(1.0), -1.0)] * 2
    trace = run_statistical_classification(agents, A2, [np.zeros((5, 1))] * 2, 1)
    assert not trace.errors.any() and np.all(trace.decisions == 1)


def test_zero_statistics_are_all_ties_and_errors():
    agents = [TrainedAgent(ConstantModel(0.3), 0.3)] * 2
    trace = run_statistical_classification(agents, A2, [np.zeros((5, 1))] * 2, 1)
    assert trace.errors.all() and np.all(trace.decisions == TIE)
    assert trace.final_state.time == 5


def test_stream_shape_validation():
    with pytest.raises(InvalidInputError):
        stream_statistics([identity_agent()], [np.zeros((3, 2))])
    with pytest.raises(InvalidInputError):
        run_statistical_classification([identity_agent()], [[1.0]], [np.zeros((3, 1))], 0)


def test_oracle_mode_monte_carlo_matches_closed_form():
    model = NetworkDataModel([scalar_source(2.0)])
    agent = oracle_agent(model.sources[0], 50.0)
    streams = sample_streams(model, 1, 4, 100_000, 123)
    lam = social_learning(stream_statistics([agent], streams), [[1.0]])
    p = np.mean(lam[:, 3, 0] <= 0)
    ref = norm.cdf(-2.0)
    assert abs(p - ref) <= 3 * np.sqrt(ref * (1 - ref) / 100_000)


def test_consensus_tie_example():
    res = consensus_from_statistics([3.0, -1.5], A2)
    assert abs(res.lambda_s) < 1e-9
    assert res.decision == TIE


def test_consensus_of_constants_takes_one_round():
    res = consensus_from_statistics([0.7] * 3, np.full((3, 3), 1 / 3))
    assert res.lambda_s == pytest.approx(0.7, abs=1e-15)
    assert res.residuals[1] == pytest.approx(0.0, abs=1e-15)


def test_rank_one_mixes_in_one_round():
    a = np.array([[0.2, 0.2, 0.2], [0.3, 0.3, 0.3], [0.5, 0.5, 0.5]])
    res = consensus_from_statistics([1.0, -2.0, 0.5], a)
    assert res.residuals[1] <= 1e-15
    assert res.lambda_s == pytest.approx(0.2 - 0.6 + 0.25)


def test_consensus_single_sample_uses_debiased_statistics():
    agents = [TrainedAgent(ConstantModel(v), m) for v, m in ((1.0, 0.25), (0.0, 0.25))]
    res = consensus_single_sample(agents, A2, [[0.0], [0.0]])
    assert res.lambda_s == pytest.approx(0.75 / 3 - 0.25 * 2 / 3, abs=1e-9)
    assert res.decision == 1


def test_consensus_budget_exhausted():
    with pytest.raises(ConvergenceError) as info:
        consensus_from_statistics([1.0, -1.0], A2, tol=1e-14, t_max=3)
    assert info.value.rounds == 2 and info.value.state.shape == (2,)
    with pytest.raises(PreconditionError):
        consensus_from_statistics([1.0, -1.0], A2, tol=0.0)


@given(st.integers(2, 6), st.integers(0, 2**31), st.booleans())
def test_consensus_termination_guarantee(K, seed, certify):
    rng = np.random.default_rng(seed)
    a = random_primitive(rng, K)
    info = spectral_analysis(a)
    c = rng.uniform(-2, 2, size=K)
    tol = 1e-10
    res = consensus_from_statistics(c, a, tol=tol, certify=certify)
    target = info.perron @ c
    limit = tol if certify else tol * (1 + info.sigma) / (1 - info.sigma)
    assert abs(res.lambda_s - target) <= limit


def test_bounded_difference_examples():
    agents = [identity_agent(2.0) for _ in range(3)]
    a = random_primitive(np.random.default_rng(0), 3)
    stream = [np.random.default_rng(k).normal(size=(10, 1)) for k in range(3)]
    same = bounded_difference_check(agents, a, stream, Perturbation(1, 4, stream[1][3]), 2, 8)
    assert same.difference == 0.0
    one_step = bounded_difference_check(agents, a, stream, Perturbation(1, 10, [50.0]), 1, 10)
    assert one_step.bound == pytest.approx(2 * a[1, 1] * 2.0)
    assert one_step.difference <= one_step.bound
    with pytest.raises(InvalidInputError):
        bounded_difference_check(agents, a, stream, Perturbation(1, 11, [0.0]), 1, 10)


@given(st.integers(0, 2**31))
def test_bounded_difference_random(seed):
    rng = np.random.default_rng(seed)
    a = random_primitive(rng, 3)
    agents = [TrainedAgent(BoundedModel("linear", {"w": rng.normal(size=1), "b": np.array(0.1)}, 1.0), 0.2)
              for _ in range(3)]
    stream = [rng.normal(scale=3, size=(10, 1)) for _ in range(3)]
    tau = int(rng.integers(1, 11))
    res = bounded_difference_check(agents, a, stream, Perturbation(int(rng.integers(3)), tau, rng.normal(scale=5, size=1)),
                                   int(rng.integers(3)), 10)
    assert res.difference <= res.bound + 1e-12


@given(st.integers(1, 6), st.integers(0, 2**31), st.integers(1, 40))
def test_variance_budget(K, seed, i):
    a = random_primitive(np.random.default_rng(seed), K) if K > 1 else np.ones((1, 1))
    ref = sum(np.sum((2 * 1.3 * np.linalg.matrix_power(a, i + 1 - tau)[:, seed % K]) ** 2) for tau in range(1, i + 1))
    value = variance_budget(a, seed % K, i, 1.3)
    assert value == pytest.approx(ref, rel=1e-10)
    assert value <= 4 * 1.3**2 * i + 1e-12
