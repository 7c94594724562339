"""Gaussian multi-view sources with closed-form likelihood quantities.

Each agent observes its own Gaussian view; both classes share the view's
covariance, so the log-likelihood ratio is affine in the features and the
KL divergences and the error of LLR-based statistics are available in
closed form. These serve as oracles for the learned pipeline.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .exceptions import InvalidInputError
from .training import TrainingSet


@dataclass
class GaussianSource:
    """Class-conditional Gaussians ``N(mean_plus, cov)`` and ``N(mean_minus, cov)``.

    ``covariance`` may be a full matrix or a vector of diagonal variances.
    """

    mean_plus: np.ndarray
    mean_minus: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mp = np.atleast_1d(np.asarray(self.mean_plus, dtype=np.float64))
        mm = np.atleast_1d(np.asarray(self.mean_minus, dtype=np.float64))
        cov = np.atleast_1d(np.asarray(self.covariance, dtype=np.float64))
        if mp.shape != mm.shape or mp.ndim != 1:
            raise InvalidInputError("class means must be vectors of equal length")
        d = mp.size
        if cov.ndim == 1:
            if cov.size != d:
                raise InvalidInputError(f"expected {d} variances, got {cov.size}")
            if np.any(cov <= 0):
                raise InvalidInputError("variances must be positive")
            self._chol = np.diag(np.sqrt(cov))
            self._prec = np.diag(1.0 / cov)
        else:
            if cov.shape != (d, d) or not np.allclose(cov, cov.T):
                raise InvalidInputError("covariance must be a symmetric d x d matrix")
            try:
                self._chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise InvalidInputError("covariance is not positive definite") from exc
            self._prec = np.linalg.inv(cov)
        self.mean_plus, self.mean_minus, self.covariance = mp, mm, cov
        diff = mp - mm
        self._w = self._prec @ diff
        self._b = -0.5 * self._w @ (mp + mm)

    @property
    def dim(self):
        return self.mean_plus.size

    def mean(self, gamma):
        return self.mean_plus if gamma == 1 else self.mean_minus

    def sample(self, gamma, size, rng):
        """Draw ``size`` (int or tuple) feature vectors under class ``gamma``."""
        size = (size,) if np.isscalar(size) else tuple(size)
        z = rng.standard_normal(size + (self.dim,))
        return self.mean(gamma) + z @ self._chol.T

    def llr(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            X = X[None, :] if self.dim > 1 or X.size == 1 else X[:, None]
        if X.shape[-1] != self.dim:
            raise InvalidInputError(f"expected dimension {self.dim}, got {X.shape[-1]}")
        return X @ self._w + self._b

    def kl(self):
        """``(KL(+ || -), KL(- || +))``; equal for a shared covariance."""
        d = float(0.5 * (self.mean_plus - self.mean_minus) @ self._w)
        return d, d

    def to_dict(self):
        return {
            "mean_plus": self.mean_plus.tolist(),
            "mean_minus": self.mean_minus.tolist(),
            "covariance": self.covariance.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        cov = doc.get("covariance", doc.get("variance"))
        return cls(doc["mean_plus"], doc["mean_minus"], cov)


@dataclass
class NetworkDataModel:
    sources: list
    class_prior: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.class_prior < 1.0:
            raise InvalidInputError("class prior must lie in (0, 1)")
        if len(self.sources) == 0:
            raise InvalidInputError("at least one source is required")

    @property
    def K(self):
        return len(self.sources)

    @property
    def dims(self):
        return [s.dim for s in self.sources]

    def to_dict(self):
        return {"class_prior": self.class_prior, "sources": [s.to_dict() for s in self.sources]}

    @classmethod
    def from_dict(cls, doc):
        return cls([GaussianSource.from_dict(s) for s in doc["sources"]], doc.get("class_prior", 0.5))


def true_llr(source, h):
    """Closed-form ``log L(h|+1) - log L(h|-1)``."""
    out = source.llr(h)
    return float(out[0]) if np.ndim(h) <= 1 and (source.dim > 1 or np.size(h) == 1) else out


def _agent_rngs(seed, K):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(K)]


def sample_stream(model, gamma0, S, seed):
    """One prediction stream: a list of K arrays of shape ``(S, d_k)``."""
    if S < 1:
        raise InvalidInputError("stream length must be >= 1")
    return [src.sample(gamma0, S, rng) for src, rng in zip(model.sources, _agent_rngs(seed, model.K))]


def sample_streams(model, gamma0, S, runs, seed):
    """``runs`` independent streams: K arrays of shape ``(runs, S, d_k)``."""
    if S < 1 or runs < 1:
        raise InvalidInputError("stream length and run count must be >= 1")
    return [
        src.sample(gamma0, (runs, S), rng)
        for src, rng in zip(model.sources, _agent_rngs(seed, model.K))
    ]


def sample_training_sets(model, sizes, seed):
    """Balanced training sets, index-aligned across agents when sizes agree.

    With equal sizes, one shuffled label vector is shared and each agent
    draws its own view of every sample, so sample ``n`` is the same object
    seen by all agents.
    """
    sizes = [int(n) for n in np.broadcast_to(sizes, (model.K,))]
    if any(n < 2 or n % 2 for n in sizes):
        raise InvalidInputError("training sizes must be even and >= 2 for balanced sets")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    label_ss, view_ss = ss.spawn(2)
    label_rng = np.random.default_rng(label_ss)
    rngs = [np.random.default_rng(s) for s in view_ss.spawn(model.K)]
    aligned = len(set(sizes)) == 1
    if aligned:
        n = sizes[0]
        shared = label_rng.permutation(np.repeat([1, -1], n // 2))
    out = []
    for src, n, rng in zip(model.sources, sizes, rngs):
        y = shared if aligned else label_rng.permutation(np.repeat([1, -1], n // 2))
        X = np.empty((n, src.dim))
        for g in (1, -1):
            mask = y == g
            X[mask] = src.sample(g, int(mask.sum()), rng)
        out.append(TrainingSet(X, y.copy()))
    return out


def weighted_kl(model, perron):
    """Perron-weighted KL divergences in both directions and their minimum."""
    perron = np.asarray(perron, dtype=np.float64)
    if perron.shape != (model.K,):
        raise InvalidInputError("perron vector length does not match the number of sources")
    kls = np.array([s.kl() for s in model.sources])
    dp = float(perron @ kls[:, 0])
    dm = float(perron @ kls[:, 1])
    return {"delta_plus": dp, "delta_minus": dm, "delta_min": min(dp, dm)}


def oracle_error_probability(model, perron, S, gamma0=1):
    """Exact error of the sign of ``sum_tau sum_k pi_k LLR_k(h_{k,tau})``.

    Under class +1 each LLR is ``N(D_k, 2 D_k)`` with ``D_k`` the view's KL
    divergence (mirror image under -1). A statistic with no information
    (all ``D_k = 0``) is scored as a fair coin, 0.5.
    Pass ``gamma0=None`` for the prior-weighted error.
    """
    if S < 1:
        raise InvalidInputError("S must be >= 1")
    perron = np.asarray(perron, dtype=np.float64)
    D = np.array([s.kl()[0] for s in model.sources])
    mean = S * float(perron @ D)
    var = 2.0 * S * float((perron**2) @ D)
    if var <= 0:
        return 0.5
    # shared covariances make the two conditional errors identical
    p = float(norm.cdf(-mean / np.sqrt(var)))
    if gamma0 is None or gamma0 in (1, -1):
        return p
    raise InvalidInputError("gamma0 must be +1, -1 or None")


def scalar_source(separation=2.0, variance=1.0):
    """1-D source with means ``+-separation/2``."""
    return GaussianSource([separation / 2.0], [-separation / 2.0], [variance])


def heterogeneous_preset(K=9, seed=20240601):
    """Multi-view sources with varied dimension, separation and variance.

    Per-agent Mahalanobis separations are fixed; directions and variances are
    drawn from ``seed`` so the preset is reproducible.
    """
    separations = np.array([0.8, 1.4, 0.6, 2.0, 1.1, 0.7, 1.7, 0.9, 1.2])
    dims = [1, 2, 3, 1, 2, 3, 1, 2, 3]
    rng = np.random.default_rng(seed)
    sources = []
    for k in range(K):
        d = dims[k % len(dims)]
        var = rng.uniform(0.5, 2.0, size=d)
        u = rng.standard_normal(d)
        u /= np.sqrt(u @ (u / var))  # unit Mahalanobis norm
        delta = separations[k % len(separations)] * u
        sources.append(GaussianSource(delta / 2.0, -delta / 2.0, var))
    return NetworkDataModel(sources, 0.5)
