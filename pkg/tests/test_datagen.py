import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal, norm

from socialml.datagen import (
    GaussianSource,
    NetworkDataModel,
    heterogeneous_preset,
    oracle_error_probability,
    sample_stream,
    sample_streams,
    sample_training_sets,
    scalar_source,
    true_llr,
    weighted_kl,
)
from socialml.exceptions import InvalidInputError


def test_covariance_must_be_positive_definite():
    with pytest.raises(InvalidInputError):
        GaussianSource([0.0], [1.0], [0.0])
    with pytest.raises(InvalidInputError):
        GaussianSource([0.0, 0.0], [1.0, 1.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(InvalidInputError):
        NetworkDataModel([scalar_source()], class_prior=1.0)


def test_stream_determinism_and_shape():
    model = heterogeneous_preset()
    a = sample_stream(model, 1, 7, 42)
    b = sample_stream(model, 1, 7, 42)
    assert [x.shape for x in a] == [(7, d) for d in model.dims]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_stream_mean_law_of_large_numbers():
    src = GaussianSource([0.5, -1.0], [0.0, 0.0], [[2.0, 0.3], [0.3, 1.0]])
    (x,) = sample_stream(NetworkDataModel([src]), 1, 1_000_000, 9)
    se = np.sqrt(np.diag(src.covariance) / x.shape[0])
    assert np.all(np.abs(x.mean(axis=0) - src.mean_plus) <= 4 * se)


def test_scalar_llr_is_twice_h():
    src = scalar_source(2.0, 1.0)
    h = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(src.llr(h), 2 * h, atol=1e-14)
    assert true_llr(src, 0.7) == pytest.approx(1.4)


def test_llr_against_density_ratio():
    cov = np.array([[1.5, 0.4, 0.0], [0.4, 1.0, 0.2], [0.0, 0.2, 0.8]])
    src = GaussianSource([1.0, 0.0, -0.5], [0.0, 0.3, 0.5], cov)
    h = np.random.default_rng(0).normal(size=(20, 3))
    ref = multivariate_normal(src.mean_plus, cov).logpdf(h) - multivariate_normal(src.mean_minus, cov).logpdf(h)
    np.testing.assert_allclose(src.llr(h), ref, atol=1e-10)


def test_llr_symmetry_and_identical_classes():
    src = GaussianSource([1.0, 2.0], [-1.0, 0.0], [1.0, 3.0])
    assert true_llr(src, [0.0, 1.0]) == pytest.approx(0.0, abs=1e-14)
    same = GaussianSource([1.0], [1.0], [2.0])
    assert np.all(same.llr(np.linspace(-5, 5, 7)) == 0.0)
    with pytest.raises(InvalidInputError):
        src.llr(np.zeros((3, 3)))


def test_weighted_kl_examples():
    model = NetworkDataModel([GaussianSource([0.0], [0.0], [1.0])] * 2)
    assert weighted_kl(model, [0.5, 0.5]) == {"delta_plus": 0.0, "delta_minus": 0.0, "delta_min": 0.0}
    one = weighted_kl(NetworkDataModel([scalar_source(2.0)]), [1.0])
    assert one["delta_plus"] == one["delta_minus"] == pytest.approx(2.0)
    # per-agent KLs 2 and 0.5
    two = NetworkDataModel([scalar_source(2.0), scalar_source(1.0)])
    assert weighted_kl(two, [1 / 3, 2 / 3])["delta_plus"] == pytest.approx(1.0)


def test_kl_against_monte_carlo():
    src = GaussianSource([0.3, 0.1], [-0.2, 0.4], [[1.0, 0.2], [0.2, 0.5]])
    x = src.sample(1, 400_000, np.random.default_rng(1))
    assert src.kl()[0] == pytest.approx(float(np.mean(src.llr(x))), abs=5e-3)


def test_oracle_error_examples():
    model = NetworkDataModel([scalar_source(2.0)])
    assert oracle_error_probability(model, [1.0], 4) == pytest.approx(norm.cdf(-2.0), abs=1e-15)
    assert oracle_error_probability(model, [1.0], 4, gamma0=-1) == oracle_error_probability(model, [1.0], 4)
    assert oracle_error_probability(NetworkDataModel([GaussianSource([1.0], [1.0], [1.0])]), [1.0], 3) == 0.5
    for S, ref in zip((1, 4, 9), (0.15865525393145707, 0.022750131948179195, 0.0013498980316300933)):
        assert oracle_error_probability(model, [1.0], S) == pytest.approx(ref, rel=1e-12)


@given(st.integers(0, 2**31))
def test_weighted_kl_nonnegative(seed):
    rng = np.random.default_rng(seed)
    srcs = [GaussianSource(rng.normal(size=2), rng.normal(size=2), rng.uniform(0.2, 2, size=2)) for _ in range(3)]
    out = weighted_kl(NetworkDataModel(srcs), rng.dirichlet(np.ones(3)))
    assert out["delta_min"] >= 0 and out["delta_plus"] == pytest.approx(out["delta_minus"])


def test_training_sets_are_balanced_and_aligned():
    model = heterogeneous_preset()
    sets = sample_training_sets(model, 40, 5)
    for d in sets:
        assert d.N == 40 and d.y.sum() == 0
    for d in sets[1:]:
        np.testing.assert_array_equal(d.y, sets[0].y)
    with pytest.raises(InvalidInputError):
        sample_training_sets(model, 41, 5)


def test_unequal_sizes():
    model = NetworkDataModel([scalar_source(), scalar_source()])
    a, b = sample_training_sets(model, [10, 20], 0)
    assert (a.N, b.N) == (10, 20)


def test_streams_shape():
    model = heterogeneous_preset()
    out = sample_streams(model, -1, 5, 3, 0)
    assert [x.shape for x in out] == [(3, 5, d) for d in model.dims]


def test_preset_is_reproducible_and_heterogeneous():
    a, b = heterogeneous_preset(), heterogeneous_preset()
    assert a.to_dict() == b.to_dict()
    assert len(set(a.dims)) == 3
    kls = [s.kl()[0] for s in a.sources]
    assert len(set(np.round(kls, 6))) == 9
    again = NetworkDataModel.from_dict(a.to_dict())
    np.testing.assert_allclose(again.sources[4].llr(np.ones(2)), a.sources[4].llr(np.ones(2)))
