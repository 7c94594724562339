"""Bound calculator.

Quantities computed here:

* conditional means of the trained statistics and the achieved margin,
* Rademacher complexities (analytic for norm-bounded linear scores, Monte
  Carlo for finite or parametric classes),
* the imbalance penalty ``alpha``, the network constant ``kappa``,
* the root ``d*`` of ``g(d) = d - (phi(d) - R) / (2 L)`` and the energy
  ``E(R, delta) = (d* - delta) / 4``,
* lower bounds on the probability of margin-consistent training and upper
  bounds on the streaming and single-sample error probabilities, and
* the stream length needed to push the conditional streaming error below
  a target level.

Logarithms are natural throughout.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import bisect

from .exceptions import InvalidInputError, MarginTooLargeError, OutOfRegimeError, PreconditionError
from .losses import LossSpec
from .training import BoundedModel, TrainHyper, train_erm

ROOT_TOL = 1e-10


def _seed_sequence(seed):
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


class Bound(NamedTuple):
    """A probability bound; ``vacuous`` marks values carrying no information."""

    value: float
    vacuous: bool


# --------------------------------------------------------------------------
# margins


@dataclass
class MarginReport:
    mu_plus: float
    mu_minus: float
    mu_tilde: float
    delta_plus: float
    delta_minus: float
    delta_achieved: float
    local_deltas: np.ndarray
    local_gaps_plus: np.ndarray = field(repr=False)
    local_gaps_minus: np.ndarray = field(repr=False)
    se_plus: float = 0.0
    se_minus: float = 0.0

    @property
    def se(self):
        """Standard error of the smaller side."""
        return self.se_plus if self.delta_plus <= self.delta_minus else self.se_minus

    def delta_lower(self, z=1.96):
        """Lower confidence limit of the achieved margin."""
        return min(self.delta_plus - z * self.se_plus, self.delta_minus - z * self.se_minus)

    def satisfies(self, delta):
        """Both strict margin inequalities at level ``delta`` (point estimates)."""
        return self.delta_plus > delta and self.delta_minus > delta


def conditional_means(agents, model, perron, M=100_000, seed=0):
    """Monte Carlo class-conditional means of every agent's model.

    ``M`` draws per class and agent; network averages are Perron-weighted and
    the training-mean average comes from the stored training means.
    """
    if M < 1000:
        raise PreconditionError("M must be at least 1000")
    perron = np.asarray(perron, dtype=np.float64)
    K = len(agents)
    if perron.shape != (K,) or model.K != K:
        raise InvalidInputError("agents, sources and Perron vector disagree on K")
    ss = _seed_sequence(seed)
    mp, mm, vp, vm = (np.empty(K) for _ in range(4))
    for k, (agent, src, child) in enumerate(zip(agents, model.sources, ss.spawn(K))):
        rp, rm = (np.random.default_rng(s) for s in child.spawn(2))
        fp = agent.f(src.sample(1, M, rp))
        fm = agent.f(src.sample(-1, M, rm))
        mp[k], vp[k] = fp.mean(), fp.var(ddof=1)
        mm[k], vm[k] = fm.mean(), fm.var(ddof=1)
    tm = np.array([a.training_mean for a in agents])
    mu_plus, mu_minus, mu_tilde = float(perron @ mp), float(perron @ mm), float(perron @ tm)
    gaps_plus = mp - tm
    gaps_minus = tm - mm
    dp = mu_plus - mu_tilde
    dm = mu_tilde - mu_minus
    return MarginReport(
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        mu_tilde=mu_tilde,
        delta_plus=dp,
        delta_minus=dm,
        delta_achieved=min(dp, dm),
        local_deltas=np.minimum(gaps_plus, gaps_minus),
        local_gaps_plus=gaps_plus,
        local_gaps_minus=gaps_minus,
        se_plus=float(np.sqrt((perron**2) @ vp / M)),
        se_minus=float(np.sqrt((perron**2) @ vm / M)),
    )


# --------------------------------------------------------------------------
# complexity


def rademacher_linear_bound(norm_bound_W, feature_second_moment_X2, N_k):
    """``W sqrt(X2) / sqrt(N)`` for scores ``<w, x>`` with ``||w|| <= W``."""
    if norm_bound_W <= 0 or feature_second_moment_X2 <= 0 or N_k <= 0:
        raise InvalidInputError("inputs must be positive")
    return norm_bound_W * math.sqrt(feature_second_moment_X2) / math.sqrt(N_k)


def augmented_second_moment(source):
    """``E ||(h, 1)||^2`` under the balanced class mixture."""
    cov = np.asarray(source.covariance)
    tr = float(np.sum(cov)) if cov.ndim == 1 else float(np.trace(cov))
    means = 0.5 * (source.mean_plus @ source.mean_plus + source.mean_minus @ source.mean_minus)
    return tr + float(means) + 1.0


class RademacherEstimate(NamedTuple):
    value: float
    se: float


@dataclass
class ParametricClass:
    """Bounded linear/MLP scores; the supremum is approached by gradient ascent.

    ``stored`` models (e.g. trained agents) seed the search alongside
    ``restarts`` random initializations.
    """

    kind: str
    beta: float
    dim: int
    hidden: int = 15
    weight_norm_bound: float | None = None
    restarts: int = 3
    steps: int = 100
    rate: float = 0.5
    stored: Sequence = ()


_CORRELATION = LossSpec("neg_identity", lambda x: -np.asarray(x, dtype=np.float64), lambda x: -np.ones_like(np.asarray(x, dtype=np.float64)), 1.0)


def _ascend(model, X, r, cls):
    theta = model.get_flat()
    for _ in range(cls.steps):
        _, grad = model.risk_and_grad(X, r, _CORRELATION)
        theta = theta - cls.rate * grad
        if cls.weight_norm_bound is not None and cls.kind == "linear":
            n = np.linalg.norm(theta)
            if n > cls.weight_norm_bound:
                theta *= cls.weight_norm_bound / n
        model.set_flat(theta)
    return abs(float(np.mean(r * model(X))))


def rademacher_empirical(function_class, X, draws=200, seed=0):
    """Monte Carlo empirical Rademacher complexity ``E_r sup_f |mean(r f(X))|``.

    ``function_class`` is either an ``(m, N)`` array of function values on
    ``X`` (a finite class; the supremum is exact), a sequence of callables,
    or a :class:`ParametricClass`. For parametric classes the inner supremum
    is found by local search, so the estimate is biased low.
    """
    if draws < 100:
        raise PreconditionError("draws must be >= 100")
    rng = np.random.default_rng(seed)
    X = np.asarray(X, dtype=np.float64)
    N = X.shape[0]
    signs = rng.choice(np.array([-1.0, 1.0]), size=(draws, N))
    if isinstance(function_class, ParametricClass):
        cls = function_class
        X2 = X if X.ndim == 2 else X[:, None]
        vals = np.empty(draws)
        for j, r in enumerate(signs):
            starts = [m.copy() for m in cls.stored]
            starts += [
                BoundedModel.initialize(cls.kind, cls.dim, cls.beta, cls.hidden, rng=rng)
                for _ in range(cls.restarts)
            ]
            for m in starts:
                if m.kind == "linear" and not np.any(m.get_flat()):
                    m.set_flat(rng.normal(0.0, 0.1, size=m.get_flat().size))
            vals[j] = max(_ascend(m, X2, r, cls) for m in starts)
    else:
        if callable(getattr(function_class, "__iter__", None)) and not isinstance(function_class, np.ndarray):
            members = list(function_class)
            if members and callable(members[0]):
                function_class = np.stack([np.asarray(f(X), dtype=np.float64).reshape(N) for f in members])
        V = np.atleast_2d(np.asarray(function_class, dtype=np.float64))
        if V.shape[1] != N:
            raise InvalidInputError(f"function values have {V.shape[1]} columns, expected {N}")
        vals = np.max(np.abs(signs @ V.T), axis=1) / N
    return RademacherEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(draws)))


def alpha_penalty(sample_counts, perron):
    """``N_max`` and ``alpha = sum_k pi_k N_max / N_k``."""
    counts = np.asarray(sample_counts, dtype=np.float64)
    if np.any(counts < 1):
        raise InvalidInputError("sample counts must be >= 1")
    perron = np.asarray(perron, dtype=np.float64)
    n_max = int(counts.max())
    return n_max, float(perron @ (n_max / counts))


def kappa(beta, K, sigma):
    """``8 beta log K / (1 - sigma)``."""
    if not sigma < 1:
        raise PreconditionError("sigma must be below 1")
    return 8.0 * beta * math.log(K) / (1.0 - sigma)


# --------------------------------------------------------------------------
# target-risk root


def g_function(loss, R_target, d):
    return d - (loss.eval(d) - R_target) / (2.0 * loss.lipschitz)


def _check_target(loss, R_target):
    if not R_target < loss.at_zero:
        raise PreconditionError(
            f"target risk {R_target} must be strictly below phi(0) = {loss.at_zero}"
        )


def d_R(loss, R_target):
    """Smallest ``x`` with ``phi(x) <= R``; ``inf`` if ``phi`` never gets there."""
    _check_target(loss, R_target)
    hi = 1.0
    while loss.eval(hi) > R_target:
        hi *= 2.0
        if hi > 1e8:
            return math.inf
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if loss.eval(mid) <= R_target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4e-16 * max(1.0, hi):
            break
    return hi


def delta_max(loss, R_target):
    """Largest admissible margin: ``g(d_R)``."""
    dr = d_R(loss, R_target)
    return math.inf if math.isinf(dr) else float(g_function(loss, R_target, dr))


def solve_d_star(loss, R_target, delta):
    """Unique root of ``g(d) = delta`` by bisection."""
    _check_target(loss, R_target)
    if delta < 0:
        raise PreconditionError("delta must be nonnegative")
    dmax = delta_max(loss, R_target)
    if not delta < dmax:
        raise MarginTooLargeError(delta, dmax)
    lo = 0.0
    hi = delta + loss.at_zero / (2.0 * loss.lipschitz) + 1.0
    while g_function(loss, R_target, hi) < delta:
        hi *= 2.0
    root = bisect(lambda d: g_function(loss, R_target, d) - delta, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)


def energy(loss, R_target, delta):
    """``E(R, delta) = (d* - delta) / 4``."""
    return (solve_d_star(loss, R_target, delta) - delta) / 4.0


# --------------------------------------------------------------------------
# bounds


@dataclass
class BoundInputs:
    N_max: int
    alpha: float
    beta: float
    rho: float
    R_target: float
    L_phi: float
    phi_at_0: float

    def __post_init__(self):
        if self.alpha < 1 - 1e-12:
            raise InvalidInputError(f"alpha must be >= 1, got {self.alpha}")
        if not self.R_target < self.phi_at_0:
            raise PreconditionError("target risk must be strictly below phi(0)")
        if self.N_max < 1 or self.beta <= 0 or self.rho < 0:
            raise InvalidInputError("N_max >= 1, beta > 0 and rho >= 0 are required")

    @classmethod
    def from_loss(cls, loss, N_max, alpha, beta, rho, R_target):
        return cls(N_max, alpha, beta, rho, R_target, loss.lipschitz, loss.at_zero)


def _training_failure_term(inputs, loss, delta):
    """``2 exp{-8 N_max (E - rho)^2 / (alpha beta)^2}`` or 1 when vacuous."""
    E = energy(loss, inputs.R_target, delta)
    if inputs.rho >= E:
        return 1.0, True
    t = 2.0 * math.exp(-8.0 * inputs.N_max * (E - inputs.rho) ** 2 / (inputs.alpha * inputs.beta) ** 2)
    return min(t, 1.0), t >= 1.0


def consistency_bound(inputs, loss, delta):
    """Lower bound on the probability of ``delta``-margin consistent training."""
    t, vac = _training_failure_term(inputs, loss, delta)
    return Bound(max(0.0, 1.0 - t), vac)


def conditional_stream_bound(delta, beta, kappa_value, S):
    """``exp{-(delta S - kappa)^2 / (2 beta^2 S)}``, valid for ``S >= kappa / delta``."""
    if delta <= 0:
        raise PreconditionError("delta must be positive")
    if S < kappa_value / delta:
        raise OutOfRegimeError(f"S={S} is below kappa/delta={kappa_value / delta:.6g}")
    return math.exp(-((delta * S - kappa_value) ** 2) / (2.0 * beta**2 * S))


def theorem1_bound(inputs, loss, delta, kappa_value, S):
    """Streaming error bound at stream length ``S`` (two-term sum, clamped)."""
    second = conditional_stream_bound(delta, inputs.beta, kappa_value, S)
    first, vac = _training_failure_term(inputs, loss, delta)
    total = first + second
    return Bound(min(total, 1.0), vac or total >= 1.0)


def sample_complexity(delta, beta, kappa_value, epsilon):
    """Stream length past which the conditional streaming error is <= epsilon."""
    if not 0 < epsilon < 1:
        raise PreconditionError("epsilon must lie in (0, 1)")
    if delta <= 0:
        raise PreconditionError("delta must be positive")
    le = math.log(epsilon)
    root = beta * math.sqrt(beta**2 * le**2 - 2.0 * kappa_value * delta * le)
    return (root - beta**2 * le + kappa_value * delta) / delta**2


def theorem2_bound(inputs, loss, delta, perron):
    """Single-sample ensemble error bound."""
    if delta < 0:
        raise PreconditionError("delta must be nonnegative")
    perron = np.asarray(perron, dtype=np.float64)
    second = math.exp(-(delta**2) / (2.0 * inputs.beta**2 * float(perron @ perron)))
    first, vac = _training_failure_term(inputs, loss, delta)
    total = first + second
    return Bound(min(total, 1.0), vac or total >= 1.0)


@dataclass
class BoundReport:
    delta: float
    d_star: float
    energy: float
    kappa: float
    delta_max: float
    d_R: float
    p_c_delta_lower: float
    p_c_delta_vacuous: bool
    theorem2_bound: float
    theorem2_vacuous: bool
    sample_complexity: float | None
    epsilon: float
    S_grid: np.ndarray = field(repr=False)
    theorem1_bound: np.ndarray = field(repr=False)
    theorem1_vacuous: np.ndarray = field(repr=False)
    inputs: BoundInputs = None

    def to_dict(self):
        return {
            "delta": self.delta,
            "d_star": self.d_star,
            "energy": self.energy,
            "kappa": self.kappa,
            "delta_max": self.delta_max,
            "d_R": self.d_R,
            "p_c_delta_lower": self.p_c_delta_lower,
            "p_c_delta_vacuous": self.p_c_delta_vacuous,
            "theorem2_bound": self.theorem2_bound,
            "theorem2_vacuous": self.theorem2_vacuous,
            "sample_complexity": self.sample_complexity,
            "epsilon": self.epsilon,
            "inputs": None if self.inputs is None else vars(self.inputs).copy(),
        }


def compute_bound_report(inputs, loss, delta, perron, sigma, epsilon=0.05, S_grid=None):
    """Evaluate every bound at one margin ``delta``.

    ``theorem1_bound`` on the ``S_grid`` is NaN where ``S < kappa / delta``.
    """
    perron = np.asarray(perron, dtype=np.float64)
    K = perron.size
    kap = kappa(inputs.beta, K, sigma)
    d_star = solve_d_star(loss, inputs.R_target, delta)
    pc = consistency_bound(inputs, loss, delta)
    t2 = theorem2_bound(inputs, loss, delta, perron)
    S_grid = np.arange(1, 201) if S_grid is None else np.asarray(S_grid)
    t1 = np.full(S_grid.shape, np.nan)
    t1_vac = np.ones(S_grid.shape, dtype=bool)
    if delta > 0:
        for j, S in enumerate(S_grid):
            if S >= kap / delta:
                b = theorem1_bound(inputs, loss, delta, kap, int(S))
                t1[j], t1_vac[j] = b.value, b.vacuous
    return BoundReport(
        delta=float(delta),
        d_star=d_star,
        energy=(d_star - delta) / 4.0,
        kappa=kap,
        delta_max=delta_max(loss, inputs.R_target),
        d_R=d_R(loss, inputs.R_target),
        p_c_delta_lower=pc.value,
        p_c_delta_vacuous=pc.vacuous,
        theorem2_bound=t2.value,
        theorem2_vacuous=t2.vacuous,
        sample_complexity=sample_complexity(delta, inputs.beta, kap, epsilon) if delta > 0 else None,
        epsilon=epsilon,
        S_grid=S_grid,
        theorem1_bound=t1,
        theorem1_vacuous=t1_vac,
        inputs=inputs,
    )


def estimate_target_risk(model, loss, perron, kind="linear", beta=1.0, hyper=None, M=20_000, seed=0):
    """Approximate ``R = sum_k pi_k inf_f R_k(f)``.

    Each agent's infimum is approached by ERM on a large balanced sample and
    the minimizer is scored on a fresh sample, which errs on the high side.
    Returns the network value and the per-agent values.
    """
    from .datagen import sample_training_sets

    hyper = hyper or TrainHyper(batch=M, epochs=400, rate=2.0)
    ss = _seed_sequence(seed)
    fit_ss, eval_ss = ss.spawn(2)
    fit_sets = sample_training_sets(model, M, fit_ss)
    eval_sets = sample_training_sets(model, M, eval_ss)
    per_agent = np.empty(model.K)
    for k, (fs, es) in enumerate(zip(fit_sets, eval_sets)):
        agent = train_erm(fs, loss, kind=kind, hyper=hyper, beta=beta)
        per_agent[k] = float(np.mean(loss.eval(es.y * agent.f(es.X))))
    return float(np.asarray(perron) @ per_agent), per_agent
