"""Seeded Monte Carlo experiments and their CSV outputs.

Work is split into cells, one per training set. A cell trains every agent,
optionally measures margins, and runs all of its prediction streams in one
vectorized pass. Cells draw their randomness from seeds derived from the
master seed and the cell coordinates only, so results do not depend on how
cells are spread across workers.
"""

import copy
import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

import jsonschema
import numpy as np
from joblib import Parallel, delayed

from .adaboost import adaboost_votes, train_adaboost
from .datagen import (
    GaussianSource,
    NetworkDataModel,
    heterogeneous_preset,
    sample_streams,
    sample_training_sets,
    scalar_source,
)
from .exceptions import ConfigError, MarginTooLargeError, SMLError
from .losses import make_loss
from .network import (
    CombinationMatrix,
    build_uniform_averaging,
    ring_with_chords,
    spectral_analysis,
)
from .prediction import social_learning, stream_statistics
from .theory import (
    Bound,
    BoundInputs,
    alpha_penalty,
    augmented_second_moment,
    conditional_means,
    consistency_bound,
    estimate_target_risk,
    rademacher_linear_bound,
    conditional_stream_bound,
    kappa as kappa_constant,
)
from .training import TrainHyper, oracle_agent, train_erm

# first spawn-key entry of every derived seed
TRAIN, HYPER, STREAM, MEANS, SINGLE, TARGET = range(6)


def derive_seed(master, *path):
    """Child seed for the cell at ``path`` under ``master``."""
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(p) for p in path))


# --------------------------------------------------------------------------
# configuration


def _load_json_resource(name):
    return json.loads(resources.files("socialml").joinpath(name).read_text())


def preset_names():
    return sorted(p.name[:-5] for p in resources.files("socialml").joinpath("presets").iterdir()
                  if p.name.endswith(".json"))


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_preset(name):
    if name not in preset_names():
        raise ConfigError(f"unknown preset {name!r}; available: {preset_names()}")
    doc = _load_json_resource(f"presets/{name}.json")
    if name != "default":
        doc = _merge(_load_json_resource("presets/default.json"), doc)
    return doc


@dataclass
class ExperimentConfig:
    """Validated experiment settings.

    Build with :meth:`from_dict` or :meth:`load`; the raw merged document
    is kept in ``doc``.
    """

    doc: dict

    def __post_init__(self):
        try:
            jsonschema.validate(self.doc, _load_json_resource("config_schema.json"))
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {exc.message}") from exc
        try:
            self._combination = self._build_network()
            self._data_model = self._build_data()
        except SMLError as exc:
            raise ConfigError(str(exc)) from exc
        if self._combination.K != self._data_model.K:
            raise ConfigError(
                f"network has {self._combination.K} agents but data model has {self._data_model.K}"
            )
        n = self.doc["N"]
        if isinstance(n, list) and len(n) != self.K:
            raise ConfigError(f"N lists {len(n)} sizes for {self.K} agents")
        if any(v % 2 for v in np.atleast_1d(n)) or any(v % 2 for v in self.doc["N0_list"]):
            raise ConfigError("training sizes must be even for balanced sets")
        if list(self.doc["N0_list"]) != sorted(self.doc["N0_list"]):
            raise ConfigError("N0_list must be nondecreasing")
        try:
            self.spectral = spectral_analysis(self._combination)
        except SMLError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        base = load_preset(doc.pop("preset", "default"))
        return cls(_merge(base, doc))

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def replace(self, **changes):
        """Copy with top-level keys (nested dicts merged) overridden."""
        return ExperimentConfig(_merge(self.doc, changes))

    def to_dict(self):
        return copy.deepcopy(self.doc)

    def _build_network(self):
        net = self.doc["network"]
        if "matrix" in net:
            return CombinationMatrix.from_dict(net["matrix"])
        if "adjacency" in net:
            return build_uniform_averaging(np.asarray(net["adjacency"], dtype=bool))
        K = net.get("K", 9)
        topo = net.get("topology", "ring_with_chords")
        if topo == "complete":
            adj = np.ones((K, K), dtype=bool)
        elif topo == "ring":
            adj = ring_with_chords(K, chords=())
        else:
            chords = tuple(tuple(c) for c in net.get("chords", ((0, 4), (2, 6), (3, 7))))
            adj = ring_with_chords(K, chords=chords)
        return build_uniform_averaging(adj)

    def _build_data(self):
        data = self.doc["data"]
        prior = data.get("class_prior", 0.5)
        if "sources" in data:
            return NetworkDataModel([GaussianSource.from_dict(s) for s in data["sources"]], prior)
        K = data.get("K", 9)
        if data.get("preset", "heterogeneous") == "scalar":
            src = scalar_source(data.get("separation", 2.0), data.get("variance", 1.0))
            return NetworkDataModel([src] * K, prior)
        return NetworkDataModel(heterogeneous_preset(K, data.get("seed", 20240601)).sources, prior)

    # convenient views ------------------------------------------------------

    @property
    def combination(self):
        return self._combination

    @property
    def data_model(self):
        return self._data_model

    @property
    def K(self):
        return self._combination.K

    @property
    def seed(self):
        return int(self.doc["seed"])

    @property
    def beta(self):
        return float(self.doc["beta"])

    @property
    def loss(self):
        return make_loss(self.doc["loss"], self.beta)

    @property
    def sizes(self):
        return [int(v) for v in np.broadcast_to(self.doc["N"], (self.K,))]

    @property
    def T(self):
        return int(self.doc["monte_carlo"]["training_sets"])

    @property
    def R(self):
        return int(self.doc["monte_carlo"]["runs_per_set"])

    @property
    def M(self):
        return int(self.doc["monte_carlo"]["mean_estimation"])

    @property
    def S(self):
        return int(self.doc["S"])

    @property
    def z(self):
        return float(self.doc["confidence_z"])

    def hyper(self, seed):
        m = self.doc["model"]
        return TrainHyper(
            batch=int(m.get("batch", 10)),
            epochs=int(m.get("epochs", 30)),
            rate=float(m.get("rate", 0.05)),
            seed=int(seed),
            hidden=int(m.get("hidden", 15)),
            weight_norm_bound=m.get("weight_norm_bound"),
        )


# --------------------------------------------------------------------------
# results and CSV schemas


def binomial_ci(errors, trials, z=1.96):
    """Wald interval ``p +- z sqrt(p (1 - p) / n)`` (not truncated to [0, 1])."""
    p = errors / trials
    half = z * math.sqrt(p * (1.0 - p) / trials)
    return p, p - half, p + half


class ErrorRow(NamedTuple):
    strategy: str
    training_set_id: int
    agent: int
    time: int
    trials: int
    errors: int
    p_hat: float
    ci_lo: float
    ci_hi: float

    @classmethod
    def tally(cls, strategy, training_set_id, agent, time, trials, errors, z):
        p, lo, hi = binomial_ci(int(errors), int(trials), z)
        return cls(strategy, int(training_set_id), int(agent), int(time), int(trials), int(errors), p, lo, hi)


class MarginRow(NamedTuple):
    N0: int
    training_set_id: int
    delta_plus: float
    delta_minus: float
    delta_achieved: float
    se: float


class SingleSampleRow(NamedTuple):
    N0: int
    strategy: str
    training_set_id: int
    agent: int
    time: int
    trials: int
    errors: int
    p_hat: float
    ci_lo: float
    ci_hi: float


POOLED = -1  # training_set_id of rows aggregated over training sets
NETWORK = -1  # agent id of network-level decisions

ERROR_COLUMNS = ErrorRow._fields
MARGIN_COLUMNS = MarginRow._fields
SINGLE_COLUMNS = SingleSampleRow._fields


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(rows, columns, path_or_buffer):
    """Serialize named tuples; floats use their shortest round-trip form."""
    own = isinstance(path_or_buffer, str)
    fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    finally:
        if own:
            fh.close()


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    write_rows(rows, columns, buf)
    return buf.getvalue()


def read_rows(row_type, text):
    """Parse CSV text back into ``row_type`` instances using its annotations."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != row_type._fields:
        raise ValueError(f"unexpected columns {header}")
    types = [row_type.__annotations__[f] for f in row_type._fields]
    return [row_type(*(t(v) for t, v in zip(types, rec))) for rec in reader]


@dataclass
class RunResult:
    errors: list = field(default_factory=list)
    margins: list = field(default_factory=list)
    margin_summary: list = field(default_factory=list)
    single_sample: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def errors_csv(self):
        return rows_to_csv(self.errors, ERROR_COLUMNS)

    def margins_csv(self):
        return rows_to_csv(self.margins, MARGIN_COLUMNS)

    def single_sample_csv(self):
        return rows_to_csv(self.single_sample, SINGLE_COLUMNS)

    def pooled(self, strategy="sml", agent=0):
        """Pooled rows of one strategy and agent, ordered by time."""
        rows = [r for r in self.errors
                if r.strategy == strategy and r.agent == agent and r.training_set_id == POOLED]
        return sorted(rows, key=lambda r: r.time)


class CellFailure(NamedTuple):
    training_set_id: int
    N0: int
    error: str


# --------------------------------------------------------------------------
# cells


def train_network(config, training_set_id, N0=None):
    """Train every agent of one training-set cell.

    Returns the agents and the training sets. ``N0`` overrides the per-agent
    sizes with a common size.
    """
    sizes = config.sizes if N0 is None else [int(N0)] * config.K
    key = 0 if N0 is None else int(N0)
    sets = sample_training_sets(config.data_model, sizes, derive_seed(config.seed, TRAIN, training_set_id, key))
    model_doc = config.doc["model"]
    if model_doc.get("kind") == "oracle":
        population = model_doc.get("training_mean") == "population"
        agents = [oracle_agent(src, config.beta, None if population else d)
                  for src, d in zip(config.data_model.sources, sets)]
        return agents, sets
    seeds = derive_seed(config.seed, HYPER, training_set_id, key).generate_state(config.K)
    loss = config.loss
    agents = [train_erm(d, loss, kind=model_doc.get("kind", "linear"), hyper=config.hyper(s), beta=config.beta)
              for d, s in zip(sets, seeds)]
    return agents, sets


def _boost(config, sets, training_set_id, key):
    seeds = derive_seed(config.seed, HYPER, training_set_id, key).generate_state(config.K)
    return train_adaboost(sets, config.loss, kind=config.doc["model"].get("kind", "linear"),
                          hyper=[config.hyper(s) for s in seeds], beta=config.beta)


class _StreamCell(NamedTuple):
    sml_errors: np.ndarray  # (S, K)
    boost_errors: np.ndarray | None  # (S,)
    margin: object


def _stream_cell(config, t, S, with_margin, with_boost):
    agents, sets = train_network(config, t)
    margin = None
    if with_margin:
        margin = conditional_means(agents, config.data_model, config.spectral.perron,
                                   M=config.M, seed=derive_seed(config.seed, MEANS, t, 0))
    gamma0 = int(config.doc["gamma0"])
    streams = sample_streams(config.data_model, gamma0, S, config.R, derive_seed(config.seed, STREAM, t, S))
    lam = social_learning(stream_statistics(agents, streams), config.combination)
    sml = np.count_nonzero(gamma0 * lam <= 0, axis=0)
    boost = None
    if with_boost:
        if config.doc["model"].get("kind") == "oracle":
            raise ConfigError("the boosting baseline needs trainable models")
        ens = _boost(config, sets, t, 0)
        votes = adaboost_votes(ens, streams)
        boost = np.count_nonzero(gamma0 * votes <= 0, axis=0)
    return _StreamCell(sml, boost, margin)


def _safe(fn, t, N0, *args):
    try:
        return fn(*args)
    except SMLError as exc:
        return CellFailure(t, N0, f"{type(exc).__name__}: {exc}")


def _run_cells(fn, arg_list, workers):
    if workers <= 1:
        return [fn(*a) for a in arg_list]
    return Parallel(n_jobs=workers)(delayed(fn)(*a) for a in arg_list)


def _workers(config, workers):
    return int(config.doc["workers"] if workers is None else workers)


# --------------------------------------------------------------------------
# experiments


def estimate_instantaneous_error(config, workers=None, S=None, strategies=("sml", "adaboost")):
    """Per-(agent, time) streaming error rates over ``T`` training sets.

    Rows are emitted per training set and pooled (``training_set_id`` = -1).
    The boosting baseline appears with ``agent`` = -1 when enabled in the
    config and requested in ``strategies``.
    """
    S = config.S if S is None else int(S)
    with_boost = bool(config.doc["adaboost"]) and "adaboost" in strategies
    with_margin = bool(config.doc["margins"])
    cells = _run_cells(
        _safe,
        [(_stream_cell, t, 0, config, t, S, with_margin, with_boost) for t in range(config.T)],
        _workers(config, workers),
    )
    result = RunResult()
    R, z = config.R, config.z
    sml_total = np.zeros((S, config.K), dtype=np.int64)
    boost_total = np.zeros(S, dtype=np.int64)
    done = 0
    for t, cell in enumerate(cells):
        if isinstance(cell, CellFailure):
            result.failures.append(cell)
            continue
        done += 1
        if "sml" in strategies:
            for k in range(config.K):
                for i in range(S):
                    result.errors.append(ErrorRow.tally("sml", t, k, i + 1, R, cell.sml_errors[i, k], z))
        sml_total += cell.sml_errors
        if cell.boost_errors is not None:
            for i in range(S):
                result.errors.append(ErrorRow.tally("adaboost", t, NETWORK, i + 1, R, cell.boost_errors[i], z))
            boost_total += cell.boost_errors
        if cell.margin is not None:
            m = cell.margin
            result.margins.append(MarginRow(0, t, m.delta_plus, m.delta_minus, m.delta_achieved, m.se))
    if done:
        n = done * R
        if "sml" in strategies:
            for k in range(config.K):
                for i in range(S):
                    result.errors.append(ErrorRow.tally("sml", POOLED, k, i + 1, n, sml_total[i, k], z))
        if with_boost:
            for i in range(S):
                result.errors.append(ErrorRow.tally("adaboost", POOLED, NETWORK, i + 1, n, boost_total[i], z))
    return result


def _margin_cell(config, t, N0):
    agents, _ = train_network(config, t, N0)
    return conditional_means(agents, config.data_model, config.spectral.perron,
                             M=config.M, seed=derive_seed(config.seed, MEANS, t, N0))


class MarginSummary(NamedTuple):
    N0: int
    training_sets: int
    mean_delta: float
    ci_lo: float
    ci_hi: float


def estimate_margin_vs_training_size(config, N0_list=None, workers=None):
    """Achieved margin per training set for every common size ``N0``."""
    N0_list = list(config.doc["N0_list"] if N0_list is None else N0_list)
    if N0_list != sorted(N0_list):
        raise ConfigError("N0_list must be nondecreasing")
    args = [(_margin_cell, t, n0, config, t, n0) for n0 in N0_list for t in range(config.T)]
    cells = _run_cells(_safe, args, _workers(config, workers))
    result = RunResult()
    for (_, t, n0, *_rest), m in zip(args, cells):
        if isinstance(m, CellFailure):
            result.failures.append(m)
            continue
        result.margins.append(MarginRow(int(n0), t, m.delta_plus, m.delta_minus, m.delta_achieved, m.se))
    for n0 in N0_list:
        vals = np.array([r.delta_achieved for r in result.margins if r.N0 == n0])
        if vals.size == 0:
            continue
        half = config.z * (vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else 0.0)
        mean = float(vals.mean())
        result.margin_summary.append(MarginSummary(int(n0), int(vals.size), mean, mean - half, mean + half))
    return result


def network_rademacher(config, agents=None):
    """Perron-weighted Rademacher complexity of the configured classes.

    Linear classes use the norm bound with ``W`` from ``weight_norm_bound``
    or, failing that, the largest trained parameter norm in ``agents``.
    Returns ``(rho, is_analytic)``.
    """
    m = config.doc["model"]
    kind = m.get("kind", "linear")
    sizes = config.sizes
    if kind == "linear":
        W = m.get("weight_norm_bound")
        if W is None:
            if not agents:
                raise ConfigError("linear rho needs weight_norm_bound or trained agents")
            W = max(a.model.weight_norm() for a in agents)
        rhos = [rademacher_linear_bound(W, augmented_second_moment(src), n)
                for src, n in zip(config.data_model.sources, sizes)]
        return float(config.spectral.perron @ np.array(rhos)), m.get("weight_norm_bound") is not None
    from .theory import ParametricClass, rademacher_empirical

    rhos = []
    for k, (src, n) in enumerate(zip(config.data_model.sources, sizes)):
        rng = np.random.default_rng(derive_seed(config.seed, TARGET, k, n))
        y = rng.choice([1, -1], size=n)
        X = np.stack([src.sample(int(g), 1, rng)[0] for g in y])
        cls = ParametricClass(kind, config.beta, src.dim, hidden=int(m.get("hidden", 15)),
                              stored=[agents[k].model] if agents else ())
        rhos.append(rademacher_empirical(cls, X, draws=100, seed=derive_seed(config.seed, TARGET, k)).value)
    return float(config.spectral.perron @ np.array(rhos)), False


def target_risk(config):
    """Configured ``target_risk`` or an estimate by large-sample ERM."""
    if config.doc.get("target_risk") is not None:
        return float(config.doc["target_risk"]), None
    m = config.doc["model"]
    kind = m.get("kind", "linear")
    if kind == "oracle":
        raise ConfigError("target risk must be given explicitly for oracle models")
    hyper = TrainHyper(batch=20_000, epochs=400, rate=2.0, hidden=int(m.get("hidden", 15)),
                       weight_norm_bound=m.get("weight_norm_bound"))
    return estimate_target_risk(config.data_model, config.loss, config.spectral.perron, kind=kind,
                                beta=config.beta, hyper=hyper, M=20_000,
                                seed=derive_seed(config.seed, TARGET, 0))


@dataclass
class ConsistencyEstimate:
    delta: float
    trials: int
    successes: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    bound: float
    vacuous: bool
    rho: float
    rho_analytic: bool
    R_target: float
    N_max: int
    alpha: float


def estimate_consistency_probability(config, delta, workers=None, margins=None):
    """Fraction of training sets meeting both strict margin inequalities.

    Pass ``margins`` (a list of :class:`MarginReport`) to reuse measured
    reports across several ``delta`` values.
    """
    if config.T < 30:
        raise ConfigError("estimating a training-set probability needs T >= 30")
    if margins is None:
        margins = collect_margins(config, workers)
    reports = [m for m in margins if not isinstance(m, CellFailure)]
    hits = sum(m.satisfies(delta) for m in reports)
    p, lo, hi = binomial_ci(hits, len(reports), config.z)
    rho, analytic = network_rademacher(config)
    R_target, _ = target_risk(config)
    n_max, alpha = alpha_penalty(config.sizes, config.spectral.perron)
    inputs = BoundInputs.from_loss(config.loss, n_max, alpha, config.beta, rho, R_target)
    try:
        b = consistency_bound(inputs, config.loss, delta)
    except MarginTooLargeError:
        # no admissible energy above delta_max: nothing is guaranteed
        b = Bound(0.0, True)
    return ConsistencyEstimate(float(delta), len(reports), int(hits), p, lo, hi, b.value, b.vacuous,
                               rho, analytic, R_target, n_max, alpha)


def collect_margins(config, workers=None):
    """Margin reports of the ``T`` training sets at the configured sizes."""
    return _run_cells(_safe, [(_margin_cell_config, t, 0, config, t) for t in range(config.T)],
                      _workers(config, workers))


def _margin_cell_config(config, t):
    agents, _ = train_network(config, t)
    return conditional_means(agents, config.data_model, config.spectral.perron,
                             M=config.M, seed=derive_seed(config.seed, MEANS, t, 0))


class ConditionalErrorCurve(NamedTuple):
    delta: float
    kappa: float
    training_sets: int
    trials: int
    times: np.ndarray
    errors: np.ndarray
    p_hat: np.ndarray
    bound: np.ndarray


def _conditional_cell(config, t, S, delta, agent):
    agents, _ = train_network(config, t)
    margin = conditional_means(agents, config.data_model, config.spectral.perron,
                               M=config.M, seed=derive_seed(config.seed, MEANS, t, 0))
    if margin.delta_lower(config.z) < delta:
        return None
    gamma0 = int(config.doc["gamma0"])
    streams = sample_streams(config.data_model, gamma0, S, config.R, derive_seed(config.seed, STREAM, t, S))
    lam = social_learning(stream_statistics(agents, streams), config.combination)
    return np.count_nonzero(gamma0 * lam[:, :, agent] <= 0, axis=0)


def estimate_conditional_error(config, delta, S, agent=0, workers=None):
    """Streaming error of ``agent`` given ``delta``-margin consistent training.

    Training sets whose margin lower confidence limit falls below ``delta``
    are discarded; the rest are pooled. ``bound`` holds
    ``exp{-(delta i - kappa)^2 / (2 beta^2 i)}`` where ``i >= kappa / delta``
    and NaN elsewhere.
    """
    cells = _run_cells(_safe, [(_conditional_cell, t, 0, config, t, S, delta, agent) for t in range(config.T)],
                       _workers(config, workers))
    kept = [c for c in cells if c is not None and not isinstance(c, CellFailure)]
    times = np.arange(1, S + 1)
    errors = np.sum(kept, axis=0) if kept else np.zeros(S, dtype=np.int64)
    trials = len(kept) * config.R
    kap = kappa_constant(config.beta, config.K, config.spectral.sigma)
    bound = np.full(S, np.nan)
    if delta > 0:
        for j, i in enumerate(times):
            if i >= kap / delta:
                bound[j] = conditional_stream_bound(delta, config.beta, kap, int(i))
    p_hat = errors / trials if trials else np.full(S, np.nan)
    return ConditionalErrorCurve(float(delta), kap, len(kept), trials, times, errors, p_hat, bound)


def _single_cell(config, t, N0):
    agents, sets = train_network(config, t, N0)
    gamma0 = int(config.doc["gamma0"])
    obs = sample_streams(config.data_model, gamma0, 1, config.R, derive_seed(config.seed, SINGLE, t, N0))
    c = stream_statistics(agents, obs)[:, 0, :]  # (R, K)
    noncoop = np.count_nonzero(gamma0 * c <= 0, axis=0)
    ensemble = np.count_nonzero(gamma0 * (c @ config.spectral.perron) <= 0)
    boost = None
    if config.doc["adaboost"] and config.doc["model"].get("kind") != "oracle":
        ens = _boost(config, sets, t, N0)
        boost = int(np.count_nonzero(gamma0 * adaboost_votes(ens, obs)[:, 0] <= 0))
    return noncoop, int(ensemble), boost


def run_single_sample_experiment(config, N0_list=None, workers=None):
    """Single-sample errors per ``N0``: each agent alone, the network, boosting.

    The network decision is the sign of the consensus limit
    ``sum_k pi_k c_k(h_k)``.
    """
    N0_list = list(config.doc["N0_list"] if N0_list is None else N0_list)
    args = [(_single_cell, t, n0, config, t, n0) for n0 in N0_list for t in range(config.T)]
    cells = _run_cells(_safe, args, _workers(config, workers))
    result = RunResult()
    R, z = config.R, config.z
    totals = {}
    for (_, t, n0, *_rest), cell in zip(args, cells):
        if isinstance(cell, CellFailure):
            result.failures.append(cell)
            continue
        noncoop, ens, boost = cell
        entries = [("noncoop", k, noncoop[k]) for k in range(config.K)] + [("sml", NETWORK, ens)]
        if boost is not None:
            entries.append(("adaboost", NETWORK, boost))
        for strategy, agent, errs in entries:
            result.single_sample.append(SingleSampleRow(int(n0), *ErrorRow.tally(strategy, t, agent, 1, R, errs, z)))
            tot = totals.setdefault((n0, strategy, agent), [0, 0])
            tot[0] += R
            tot[1] += int(errs)
    for (n0, strategy, agent), (n, e) in totals.items():
        result.single_sample.append(SingleSampleRow(int(n0), *ErrorRow.tally(strategy, POOLED, agent, 1, n, e, z)))
    return result


# --------------------------------------------------------------------------
# plotting


def plot_error_curves(result, path, strategies=("sml", "adaboost"), agent=0):
    """SVG of pooled error rates versus time (requires matplotlib)."""
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for s in strategies:
        rows = result.pooled(s, agent if s == "sml" else NETWORK)
        if rows:
            ax.semilogy([r.time for r in rows], [max(r.p_hat, 1e-6) for r in rows], label=s)
    ax.set_xlabel("time i")
    ax.set_ylabel("error probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
