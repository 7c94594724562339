"""Prediction phase: streaming social learning and single-sample consensus.

Time indices in the public API are 1-based (``i = 1`` is the first
observation); arrays are 0-based along the time axis.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError, InvalidInputError, PreconditionError
from .network import as_combination_matrix, matrix_power_column, spectral_analysis
from .training import debiased_statistic

TIE = 0


@dataclass
class BeliefState:
    lambdas: np.ndarray
    time: int = 0

    @classmethod
    def initial(cls, K):
        return cls(np.zeros(K), 0)


@dataclass
class DecisionTrace:
    """Per-time, per-agent decisions (+1, -1, or 0 for a tie) and beliefs."""

    decisions: np.ndarray
    lambdas: np.ndarray
    gamma0: int
    final_state: BeliefState = field(repr=False, default=None)

    @property
    def errors(self):
        # a tie is an error
        return self.gamma0 * self.lambdas <= 0


def social_learning_step(state, statistics, A):
    """``lambda_k <- sum_l a_{lk} (lambda_l + c_l)``."""
    a = as_combination_matrix(A).entries
    c = np.asarray(statistics, dtype=np.float64)
    if c.shape != state.lambdas.shape or c.shape != (a.shape[0],):
        raise InvalidInputError(f"expected {a.shape[0]} statistics, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("non-finite decision statistic")
    return BeliefState((state.lambdas + c) @ a, state.time + 1)


def social_learning(statistics, A, lambda0=None):
    """Run the recursion over the time axis of ``statistics`` (``(..., S, K)``).

    Returns the log-belief ratios after each step, same shape as the input.
    """
    a = as_combination_matrix(A).entries
    c = np.asarray(statistics, dtype=np.float64)
    if c.shape[-1] != a.shape[0]:
        raise InvalidInputError(f"last axis must have {a.shape[0]} agents, got {c.shape[-1]}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("non-finite decision statistic")
    out = np.empty_like(c)
    lam = np.zeros(c.shape[:-2] + (a.shape[0],)) if lambda0 is None else np.asarray(lambda0, dtype=np.float64)
    for i in range(c.shape[-2]):
        lam = (lam + c[..., i, :]) @ a
        out[..., i, :] = lam
    return out


def stream_statistics(agents, stream):
    """Stack ``c_k(h_{k,i})`` for per-agent arrays ``(..., S, d_k)`` into ``(..., S, K)``."""
    if len(agents) != len(stream):
        raise InvalidInputError(f"{len(agents)} agents but {len(stream)} observation streams")
    cols = []
    for agent, obs in zip(agents, stream):
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim == 1:
            obs = obs[:, None]
        if obs.shape[-1] != agent.dim:
            raise InvalidInputError(f"agent expects dimension {agent.dim}, got {obs.shape[-1]}")
        flat = obs.reshape(-1, agent.dim)
        cols.append(agent.statistic(flat).reshape(obs.shape[:-1]))
    return np.stack(cols, axis=-1)


def run_statistical_classification(agents, A, stream, gamma0):
    """Classify one stream of ``S`` observations per agent."""
    if gamma0 not in (1, -1):
        raise InvalidInputError("gamma0 must be +1 or -1")
    stats = stream_statistics(agents, stream)
    if stats.ndim != 2:
        raise InvalidInputError("stream must hold one (S, d_k) array per agent")
    lambdas = social_learning(stats, A)
    decisions = np.sign(lambdas).astype(np.int8)
    return DecisionTrace(decisions, lambdas, gamma0, BeliefState(lambdas[-1].copy(), stats.shape[0]))


@dataclass
class ConsensusResult:
    lambda_s: float
    decision: int
    rounds: int
    certificate: float
    lambdas: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)


def consensus_single_sample(agents, A, observations, tol=1e-10, t_max=100_000, certify=False, perron=None,
                            sigma=None):
    """Average local statistics over the graph until they stop moving.

    Starts from ``lambda_{k,1} = c_k(h_k)`` and iterates
    ``lambda_t = lambda_{t-1} @ A``. Stops when the largest step change falls
    below ``tol`` or, with ``certify=True``, when every agent is within
    ``tol`` of the Perron-weighted limit. ``rounds`` counts combination
    steps; ``residuals[t]`` is the distance to the Perron-weighted limit
    after ``t`` of them. ``certificate`` is the final
    max distance to that limit. ``decision`` is a tie when ``|lambda_s|``
    is within the guaranteed distance to the limit, ``tol (1 + sigma) /
    (1 - sigma)`` (``tol`` when certifying), because the sign of the limit
    is then unresolved.
    """
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    A = as_combination_matrix(A)
    if len(observations) != A.K:
        raise InvalidInputError(f"need one observation per agent ({A.K})")
    c = np.array([debiased_statistic(a, h) for a, h in zip(agents, observations)])
    return consensus_from_statistics(c, A, tol=tol, t_max=t_max, certify=certify, perron=perron, sigma=sigma)


def consensus_from_statistics(c, A, tol=1e-10, t_max=100_000, certify=False, perron=None, sigma=None):
    """Consensus on precomputed local statistics ``c``; see :func:`consensus_single_sample`."""
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    A = as_combination_matrix(A)
    a = A.entries
    if perron is None or sigma is None:
        info = spectral_analysis(A)
        perron = info.perron if perron is None else perron
        sigma = info.sigma if sigma is None else sigma
    c = np.asarray(c, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("non-finite decision statistic")
    target = float(perron @ c)
    lam = c.copy()
    residuals = [np.max(np.abs(lam - target))]
    t = 1
    while True:
        if certify and residuals[-1] < tol:
            break
        if t >= t_max:
            raise ConvergenceError(
                f"consensus did not reach tol={tol} in {t_max} rounds", state=lam, rounds=t - 1
            )
        nxt = lam @ a
        t += 1
        step = np.max(np.abs(nxt - lam))
        lam = nxt
        residuals.append(np.max(np.abs(lam - target)))
        if not certify and step < tol:
            break
    lam_s = float(lam[0])
    resolution = tol if certify else tol * (1.0 + sigma) / (1.0 - sigma)
    return ConsensusResult(
        lambda_s=lam_s,
        decision=TIE if abs(lam_s) <= resolution else int(np.sign(lam_s)),
        rounds=t - 1,
        certificate=float(residuals[-1]),
        lambdas=lam,
        residuals=np.array(residuals),
    )


class Perturbation(NamedTuple):
    agent: int
    time: int
    observation: np.ndarray


class DifferenceCheck(NamedTuple):
    difference: float
    bound: float


def bounded_difference_check(agents, A, stream, perturb, k, i):
    """Change in ``lambda_{k,i}`` when one observation ``h_{l,tau}`` is replaced.

    Returns the observed difference together with ``2 [A^(i+1-tau)]_{lk} beta``.
    """
    A = as_combination_matrix(A)
    ell, tau, new_obs = perturb
    S = np.asarray(stream[0]).shape[0]
    if not (0 <= ell < A.K and 0 <= k < A.K and 1 <= tau <= i <= S):
        raise InvalidInputError("perturbation indices out of range")
    original = run_statistical_classification(agents, A, stream, 1).lambdas[i - 1, k]
    changed = [np.array(s, dtype=np.float64, copy=True) for s in stream]
    if changed[ell].ndim == 1:
        changed[ell] = changed[ell][:, None]
    changed[ell][tau - 1] = np.asarray(new_obs, dtype=np.float64).reshape(-1)
    perturbed = run_statistical_classification(agents, A, changed, 1).lambdas[i - 1, k]
    beta = agents[ell].beta
    weight = matrix_power_column(A, k, i + 1 - tau)[ell]
    return DifferenceCheck(float(abs(original - perturbed)), float(2.0 * weight * beta))


def variance_budget(A, k, i, beta):
    """``sum_tau sum_l (2 [A^(i+1-tau)]_{lk} beta)^2``; at most ``4 beta^2 i``."""
    A = as_combination_matrix(A)
    col = A.entries[:, k].copy()
    total = 0.0
    for _ in range(i):
        total += np.sum((2.0 * beta * col) ** 2)
        col = A.entries @ col
    return float(total)
