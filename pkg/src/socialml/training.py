"""Independent per-agent training of bounded, debiased decision statistics.

Every trainable model outputs ``f(h) = beta * tanh(g(h) / beta)`` where ``g``
is the raw linear or MLP score, so ``|f| <= beta`` holds by construction.
The debiased statistic is ``c(h) = f(h) - mean_n f(h_n)`` over the agent's
own training set.
"""

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import DivergedTrainingError, InvalidInputError

logger = logging.getLogger(__name__)

MODEL_KINDS = ("linear", "mlp", "oracle")


@dataclass
class TrainingSet:
    """Labelled samples of one agent; labels in {+1, -1}."""

    X: np.ndarray
    y: np.ndarray
    require_balanced: bool = True

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise InvalidInputError(f"X {X.shape} and y {y.shape} are not aligned")
        if X.shape[0] == 0:
            raise InvalidInputError("training set is empty")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("features must be finite")
        if not np.all(np.isin(y, (-1, 1))):
            raise InvalidInputError("labels must be +1 or -1")
        if self.require_balanced and np.count_nonzero(y == 1) != np.count_nonzero(y == -1):
            raise InvalidInputError(
                f"training set is imbalanced: {np.count_nonzero(y == 1)} positive vs "
                f"{np.count_nonzero(y == -1)} negative"
            )
        self.X = X
        self.y = y.astype(np.int64)

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def digest(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()[:16]


@dataclass
class TrainHyper:
    batch: int = 10
    epochs: int = 30
    rate: float = 0.05
    seed: int = 0
    hidden: int = 15
    weight_norm_bound: float | None = None


# batch 10, 30 epochs, rate 1e-4, 15 tanh hidden units
MLP_PRESET = {"kind": "mlp", "hyper": TrainHyper(batch=10, epochs=30, rate=1e-4, hidden=15)}


class BoundedModel:
    """Linear or one-hidden-layer MLP score squashed into ``[-beta, beta]``."""

    def __init__(self, kind, params, beta):
        if kind not in ("linear", "mlp"):
            raise InvalidInputError(f"unknown model kind {kind!r}")
        if beta <= 0:
            raise InvalidInputError("beta must be positive")
        self.kind = kind
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self.beta = float(beta)

    @classmethod
    def initialize(cls, kind, dim, beta, hidden=15, rng=None):
        rng = np.random.default_rng(rng)
        if kind == "linear":
            params = {"w": np.zeros(dim), "b": np.zeros(())}
        elif kind == "mlp":
            params = {
                "W0": rng.normal(0.0, 1.0 / np.sqrt(dim), size=(dim, hidden)),
                "theta0": np.zeros(hidden),
                "W1": rng.normal(0.0, 0.1 / np.sqrt(hidden), size=(hidden, 2)),
                "theta1": np.zeros(2),
            }
        else:
            raise InvalidInputError(f"unknown model kind {kind!r}")
        return cls(kind, params, beta)

    @classmethod
    def zero(cls, dim, beta):
        return cls.initialize("linear", dim, beta)

    @property
    def dim(self):
        return self.params["w"].shape[0] if self.kind == "linear" else self.params["W0"].shape[0]

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :] if self.dim > 1 or X.size == 1 else X[:, None]
        if X.shape[-1] != self.dim:
            raise InvalidInputError(f"expected feature dimension {self.dim}, got {X.shape[-1]}")
        return X

    def raw(self, X):
        X = self._check(X)
        p = self.params
        if self.kind == "linear":
            return X @ p["w"] + p["b"]
        hidden = np.tanh(X @ p["W0"] - p["theta0"])
        z = hidden @ p["W1"] - p["theta1"]
        return z[..., 0] - z[..., 1]

    def __call__(self, X):
        return self.beta * np.tanh(self.raw(X) / self.beta)

    # flat parameter vector, fixed key order
    def _keys(self):
        return ("w", "b") if self.kind == "linear" else ("W0", "theta0", "W1", "theta1")

    def get_flat(self):
        return np.concatenate([self.params[k].ravel() for k in self._keys()])

    def set_flat(self, theta):
        i = 0
        for k in self._keys():
            n = self.params[k].size
            self.params[k] = np.asarray(theta[i : i + n], dtype=np.float64).reshape(self.params[k].shape)
            i += n

    def copy(self):
        return BoundedModel(self.kind, {k: v.copy() for k, v in self.params.items()}, self.beta)

    def weight_norm(self):
        """Euclidean norm of ``(w, b)`` for linear models."""
        if self.kind != "linear":
            raise InvalidInputError("weight_norm is defined for linear models only")
        return float(np.linalg.norm(self.get_flat()))

    def risk_and_grad(self, X, y, loss, weights=None):
        """Weighted empirical risk and its gradient w.r.t. the flat parameters."""
        X = self._check(X)
        N = X.shape[0]
        w = np.ones(N) if weights is None else weights
        p = self.params
        if self.kind == "linear":
            g = X @ p["w"] + p["b"]
        else:
            hidden = np.tanh(X @ p["W0"] - p["theta0"])
            z = hidden @ p["W1"] - p["theta1"]
            g = z[:, 0] - z[:, 1]
        t = np.tanh(g / self.beta)
        margin = y * self.beta * t
        risk = float(np.sum(w * loss.eval(margin)) / N)
        # dR/dg per sample
        dg = w * y * loss.derivative(margin) * (1.0 - t * t) / N
        if self.kind == "linear":
            grad = np.concatenate([X.T @ dg, [dg.sum()]])
        else:
            d_hidden = np.outer(dg, p["W1"][:, 0] - p["W1"][:, 1]) * (1.0 - hidden * hidden)
            grad = np.concatenate(
                [
                    (X.T @ d_hidden).ravel(),
                    -d_hidden.sum(axis=0),
                    np.stack([hidden.T @ dg, -(hidden.T @ dg)], axis=1).ravel(),
                    np.array([-dg.sum(), dg.sum()]),
                ]
            )
        return risk, grad

    def to_dict(self):
        return {
            "kind": self.kind,
            "beta": self.beta,
            "parameters": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["kind"], {k: np.asarray(v) for k, v in doc["parameters"].items()}, doc["beta"])


class OracleModel:
    """Clipped true log-likelihood ratio of a known source."""

    kind = "oracle"

    def __init__(self, source, beta):
        self.source = source
        self.beta = float(beta)

    @property
    def dim(self):
        return self.source.dim

    def __call__(self, X):
        return np.clip(self.source.llr(X), -self.beta, self.beta)

    def to_dict(self):
        return {"kind": "oracle", "beta": self.beta, "source": self.source.to_dict()}


@dataclass
class TrainedAgent:
    """A bounded model and its empirical training mean."""

    model: object
    training_mean: float
    train_config_digest: dict = field(default_factory=dict)

    @property
    def beta(self):
        return self.model.beta

    @property
    def dim(self):
        return self.model.dim

    def f(self, X):
        return self.model(X)

    def statistic(self, X):
        return self.model(X) - self.training_mean

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "training_mean": self.training_mean,
            "provenance": self.train_config_digest,
        }

    @classmethod
    def from_dict(cls, doc):
        m = doc["model"]
        if m["kind"] == "oracle":
            from .datagen import GaussianSource

            model = OracleModel(GaussianSource.from_dict(m["source"]), m["beta"])
        else:
            model = BoundedModel.from_dict(m)
        return cls(model, float(doc["training_mean"]), doc.get("provenance", {}))


def empirical_risk(model, data, loss, weights=None):
    """Mean of ``phi(gamma_n f(h_n))`` (optionally weighted per sample)."""
    if data.N == 0:
        raise InvalidInputError("empty training set")
    terms = loss.eval(data.y * model(data.X))
    if weights is not None:
        terms = terms * weights
    return float(np.mean(terms))


def _project(theta, radius):
    n = np.linalg.norm(theta)
    return theta if n <= radius else theta * (radius / n)


def train_erm(data, loss, kind="linear", hyper=None, beta=1.0, sample_weight=None):
    """Mini-batch SGD on the (weighted) empirical risk.

    The returned parameters are the best full-data iterate seen, initial
    point included, so training never ends worse than it started.
    """
    hyper = hyper or TrainHyper()
    if hyper.rate <= 0:
        raise InvalidInputError("learning rate must be positive")
    if hyper.batch < 1 or hyper.epochs < 0:
        raise InvalidInputError("batch must be >= 1 and epochs >= 0")
    rng = np.random.default_rng(hyper.seed)
    model = BoundedModel.initialize(kind, data.dim, beta, hidden=hyper.hidden, rng=rng)
    N = data.N
    if sample_weight is None:
        weights = np.ones(N)
    else:
        weights = np.asarray(sample_weight, dtype=np.float64)
        if weights.shape != (N,) or np.any(weights < 0) or weights.sum() <= 0:
            raise InvalidInputError("sample_weight must be nonnegative with positive sum")
        weights = weights * (N / weights.sum())
    project = hyper.weight_norm_bound is not None and kind == "linear"

    theta = model.get_flat()
    best_theta = theta.copy()
    best_risk, _ = model.risk_and_grad(data.X, data.y, loss, weights)
    batch = min(hyper.batch, N)
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(N)
        for start in range(0, N, batch):
            idx = order[start : start + batch]
            _, grad = model.risk_and_grad(data.X[idx], data.y[idx], loss, weights[idx])
            theta = theta - hyper.rate * grad
            if project:
                theta = _project(theta, hyper.weight_norm_bound)
            model.set_flat(theta)
        risk, _ = model.risk_and_grad(data.X, data.y, loss, weights)
        if not np.isfinite(risk) or not np.all(np.isfinite(theta)):
            raise DivergedTrainingError(epoch)
        if risk < best_risk:
            best_risk, best_theta = risk, theta.copy()
    model.set_flat(best_theta)

    training_mean = float(np.mean(model(data.X)))
    digest = {
        "kind": kind,
        "loss": loss.name,
        "beta": float(beta),
        "N": int(N),
        "data": data.digest(),
        "empirical_risk": best_risk,
        **{k: v for k, v in asdict(hyper).items()},
    }
    return TrainedAgent(model, training_mean, digest)


def oracle_agent(source, beta, data=None):
    """Agent whose model is the clipped true LLR.

    The training mean is the empirical mean over ``data`` when given, else
    the balanced population mean of the unclipped LLR,
    ``(KL(+||-) - KL(-||+)) / 2``.
    """
    model = OracleModel(source, beta)
    if data is not None:
        mean = float(np.mean(model(data.X)))
    else:
        kl_plus, kl_minus = source.kl()
        mean = 0.5 * (kl_plus - kl_minus)
    return TrainedAgent(model, mean, {"kind": "oracle", "beta": float(beta)})


def debiased_statistic(agent, h):
    """``f(h) - training_mean`` for a single feature vector."""
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    if h.ndim != 1 or h.size != agent.dim:
        raise InvalidInputError(f"expected one feature vector of dimension {agent.dim}, got shape {h.shape}")
    return float(agent.statistic(h[None, :])[0])


def save_agents(agents, path, extra=None):
    doc = {"agents": [a.to_dict() for a in agents]}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_agents(path):
    with open(path) as fh:
        doc = json.load(fh)
    return [TrainedAgent.from_dict(d) for d in doc["agents"]]


def read_training_csv(path):
    """Training set from a CSV with columns ``f0..f{d-1}, label``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "label" or header[:-1] != [f"f{j}" for j in range(len(header) - 1)]:
            raise InvalidInputError(f"{path}: expected columns f0..f(d-1), label; got {header}")
        rows = [r for r in reader if r]
    arr = np.array(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InvalidInputError(f"{path}: no samples")
    return TrainingSet(arr[:, :-1], arr[:, -1].astype(np.int64))


def write_training_csv(data, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{j}" for j in range(data.dim)] + ["label"])
        for x, y in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in x] + [int(y)])
