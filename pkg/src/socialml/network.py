"""Combination matrices over strongly-connected graphs.

Convention: ``entries[l, k]`` is the weight agent ``k`` assigns to neighbor
``l``, so every *column* sums to one (left-stochastic). A row vector of
per-agent quantities is combined as ``x @ A``.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from .exceptions import InvalidTopologyError, PreconditionError

logger = logging.getLogger(__name__)

COLUMN_SUM_TOL = 1e-12
PERRON_TOL = 1e-12
PERRON_MAX_ITER = 100_000
MAX_AGENTS = 256


@dataclass(frozen=True)
class CombinationMatrix:
    """K x K nonnegative left-stochastic weights."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise InvalidTopologyError(f"combination matrix must be square, got {a.shape}")
        if a.shape[0] > MAX_AGENTS:
            raise InvalidTopologyError(f"at most {MAX_AGENTS} agents supported")
        if not np.all(np.isfinite(a)):
            raise InvalidTopologyError("combination matrix has non-finite entries")
        if np.any(a < 0):
            raise InvalidTopologyError("combination weights must be nonnegative")
        col = a.sum(axis=0)
        bad = np.abs(col - 1.0) > COLUMN_SUM_TOL
        if np.any(bad):
            k = int(np.argmax(bad))
            raise InvalidTopologyError(
                f"column {k} sums to {float(col[k])!r}; columns must sum to 1"
            )
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def K(self):
        return self.entries.shape[0]

    def neighbors(self, k):
        """Indices ``l`` with ``a[l, k] > 0``."""
        return np.flatnonzero(self.entries[:, k] > 0)

    def permuted(self, order):
        """Relabel agents: new agent ``i`` is old agent ``order[i]``."""
        order = np.asarray(order)
        return CombinationMatrix(self.entries[np.ix_(order, order)])

    def to_dict(self):
        return {"K": self.K, "entries": self.entries.ravel().tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc):
        try:
            K = int(doc["K"])
            entries = np.asarray(doc["entries"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidTopologyError(f"malformed combination matrix document: {exc}") from exc
        if entries.size != K * K:
            raise InvalidTopologyError(f"expected {K * K} entries, got {entries.size}")
        return cls(entries.reshape(K, K))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SpectralInfo:
    perron: np.ndarray
    sigma: float
    mixing_constant: float
    eigenvalues: np.ndarray = field(repr=False, default=None)


def as_combination_matrix(m):
    if isinstance(m, CombinationMatrix):
        return m
    return CombinationMatrix(np.asarray(m, dtype=np.float64))


def build_uniform_averaging(adjacency):
    """Uniform averaging weights from a boolean adjacency.

    ``adjacency[l, k]`` true means ``l`` is an in-neighbor of ``k`` (``k``
    listens to ``l``). Column ``k`` puts ``1 / deg(k)`` on each in-neighbor.
    """
    adj = np.asarray(adjacency)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise InvalidTopologyError(f"adjacency must be square, got {adj.shape}")
    adj = adj.astype(bool)
    if not np.any(np.diag(adj)):
        raise InvalidTopologyError("adjacency needs at least one self-loop")
    deg = adj.sum(axis=0)
    if np.any(deg == 0):
        raise InvalidTopologyError(
            f"agents {np.flatnonzero(deg == 0).tolist()} have an empty neighborhood"
        )
    return CombinationMatrix(adj / deg[None, :])


def ring_with_chords(K=9, chords=((0, 4), (2, 6), (3, 7)), self_loops=True):
    """Undirected ring plus chords, as a boolean adjacency."""
    adj = np.zeros((K, K), dtype=bool)
    for k in range(K):
        adj[k, (k + 1) % K] = adj[(k + 1) % K, k] = True
    for a, b in chords:
        if a < K and b < K:
            adj[a, b] = adj[b, a] = True
    if self_loops:
        np.fill_diagonal(adj, True)
    return adj


def check_strong_connectivity(m):
    """Strong connectivity of the positive-weight graph plus one self-loop."""
    a = as_combination_matrix(m).entries
    K = a.shape[0]
    if not np.any(np.diag(a) > 0):
        return False
    graph = csr_matrix((a > 0).astype(np.int8))
    forward = breadth_first_order(graph, 0, directed=True, return_predecessors=False)
    if forward.size != K:
        return False
    backward = breadth_first_order(graph.T.tocsr(), 0, directed=True, return_predecessors=False)
    return backward.size == K


def _perron_power(a):
    K = a.shape[0]
    x = np.full(K, 1.0 / K)
    for it in range(PERRON_MAX_ITER):
        y = a @ x
        y /= y.sum()
        if np.max(np.abs(y - x)) < PERRON_TOL:
            return y, it + 1
        x = y
    return None, PERRON_MAX_ITER


def _perron_eig(a):
    w, v = np.linalg.eig(a)
    i = int(np.argmin(np.abs(w - 1.0)))
    p = np.real(v[:, i])
    return p / p.sum()


def spectral_analysis(m):
    """Perron eigenvector and second largest eigenvalue magnitude."""
    m = as_combination_matrix(m)
    if not check_strong_connectivity(m):
        raise PreconditionError(
            "combination matrix is not strongly connected with a self-loop"
        )
    a = m.entries
    K = a.shape[0]
    perron, iters = _perron_power(a)
    if perron is None or np.any(perron <= 0):
        logger.debug("power iteration stalled after %d iterations; using eig", iters)
        perron = _perron_eig(a)
    eig = np.linalg.eigvals(a)
    if K == 1:
        sigma = 0.0
    else:
        # drop the eigenvalue closest to 1, keep the largest remaining magnitude
        idx = int(np.argmin(np.abs(eig - 1.0)))
        sigma = float(np.max(np.abs(np.delete(eig, idx))))
    if not sigma < 1.0:
        raise PreconditionError(f"second eigenvalue magnitude {sigma} is not below 1")
    return SpectralInfo(
        perron=perron,
        sigma=sigma,
        mixing_constant=mixing_constant(K, sigma),
        eigenvalues=eig,
    )


def mixing_constant(K, sigma):
    """``4 log K / (1 - sigma)`` with the natural logarithm."""
    return 4.0 * np.log(K) / (1.0 - sigma)


def mixing_sum(m, k, t, perron=None):
    """``sum_{tau=1..t} sum_l |[A^(t-tau)]_{lk} - pi_l|``.

    Powers run from ``A^0`` (identity) up to ``A^(t-1)``.
    """
    if t < 1:
        raise PreconditionError("horizon t must be >= 1")
    m = as_combination_matrix(m)
    a = m.entries
    if perron is None:
        perron = spectral_analysis(m).perron
    col = np.zeros(a.shape[0])
    col[k] = 1.0
    total = 0.0
    for _ in range(t):
        total += np.abs(col - perron).sum()
        col = a @ col
    return float(total)


def matrix_power_column(m, k, power):
    """Column ``k`` of ``A^power``."""
    a = as_combination_matrix(m).entries
    col = np.zeros(a.shape[0])
    col[k] = 1.0
    for _ in range(power):
        col = a @ col
    return col
