"""Command line entry point ``sml``.

Every subcommand takes ``--config``, ``--seed`` and ``--out``. Exit codes:
0 on success, 2 for configuration or input errors, 3 for numeric failures.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import harness
from .datagen import sample_stream
from .exceptions import ConfigError, MarginTooLargeError, NumericalError, SMLError
from .network import mixing_constant
from .prediction import consensus_single_sample, run_statistical_classification
from .theory import (
    BoundInputs,
    alpha_penalty,
    compute_bound_report,
    conditional_means,
    kappa,
)
from .training import load_agents, read_training_csv, save_agents, train_erm, write_training_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
U64_MAX = 2**64 - 1


def _u64(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _label(text):
    if text not in ("1", "+1", "-1"):
        raise argparse.ArgumentTypeError("label must be +1 or -1")
    return int(text)


def _dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _write_text(text, path):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _config(args):
    cfg = harness.ExperimentConfig.load(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "S", None) is not None:
        changes["S"] = args.S
    if getattr(args, "label", None) is not None:
        changes["gamma0"] = args.label
    return cfg.replace(**changes) if changes else cfg


def _agents(args, cfg):
    if getattr(args, "agents", None):
        try:
            agents = load_agents(args.agents)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot load agents from {args.agents}: {exc}") from exc
        if len(agents) != cfg.K:
            raise ConfigError(f"{len(agents)} agents loaded but the network has {cfg.K}")
        return agents
    agents, _ = harness.train_network(cfg, getattr(args, "training_set", 0))
    return agents


# --------------------------------------------------------------------------
# subcommands


def cmd_train(args):
    cfg = _config(args)
    if args.train_csv:
        if len(args.train_csv) != cfg.K:
            raise ConfigError(f"need {cfg.K} training CSVs, got {len(args.train_csv)}")
        sets = [read_training_csv(p) for p in args.train_csv]
        seeds = harness.derive_seed(cfg.seed, harness.HYPER, args.training_set, 0).generate_state(cfg.K)
        kind = cfg.doc["model"].get("kind", "linear")
        if kind == "oracle":
            raise ConfigError("oracle agents are not trained from CSV data")
        agents = [train_erm(d, cfg.loss, kind=kind, hyper=cfg.hyper(s), beta=cfg.beta) for d, s in zip(sets, seeds)]
    else:
        agents, sets = harness.train_network(cfg, args.training_set)
        for k, d in enumerate(sets):
            write_training_csv(d, os.path.join(args.out, f"training_{k}.csv"))
    save_agents(agents, os.path.join(args.out, "agents.json"),
                extra={"config": cfg.to_dict(), "training_set_id": args.training_set})
    print(f"trained {len(agents)} agents -> {os.path.join(args.out, 'agents.json')}")


def cmd_predict_stream(args):
    cfg = _config(args)
    agents = _agents(args, cfg)
    gamma0 = int(cfg.doc["gamma0"])
    rows = ["run,agent,time,lambda,decision"]
    for run in range(args.runs):
        stream = sample_stream(cfg.data_model, gamma0, cfg.S, harness.derive_seed(cfg.seed, harness.STREAM, run))
        trace = run_statistical_classification(agents, cfg.combination, stream, gamma0)
        for i in range(cfg.S):
            for k in range(cfg.K):
                rows.append(f"{run},{k},{i + 1},{float(trace.lambdas[i, k])!r},{int(trace.decisions[i, k])}")
    _write_text("\n".join(rows) + "\n", os.path.join(args.out, "stream.csv"))


def cmd_predict_single(args):
    cfg = _config(args)
    agents = _agents(args, cfg)
    gamma0 = int(cfg.doc["gamma0"])
    if args.observations:
        try:
            obs = [np.asarray(h, dtype=np.float64) for h in json.loads(args.observations)]
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse observations: {exc}") from exc
        if len(obs) != cfg.K:
            raise ConfigError(f"need {cfg.K} observations, got {len(obs)}")
    else:
        obs = [s[0] for s in sample_stream(cfg.data_model, gamma0, 1, harness.derive_seed(cfg.seed, harness.SINGLE, 0))]
    c = cfg.doc["consensus"]
    res = consensus_single_sample(agents, cfg.combination, obs, tol=float(c["tol"]), t_max=int(c["t_max"]),
                                  certify=bool(c.get("certify", False)), perron=cfg.spectral.perron)
    doc = {"lambda_s": res.lambda_s, "decision": res.decision, "rounds": res.rounds,
           "certificate": res.certificate, "true_label": gamma0}
    _dump_json(doc, os.path.join(args.out, "single.json"))
    print(json.dumps(doc, sort_keys=True))


def cmd_bounds(args):
    cfg = _config(args)
    agents = _agents(args, cfg)
    perron, sigma = cfg.spectral.perron, cfg.spectral.sigma
    margin = conditional_means(agents, cfg.data_model, perron, M=cfg.M,
                               seed=harness.derive_seed(cfg.seed, harness.MEANS, 0, 0))
    rho, analytic = harness.network_rademacher(cfg, agents)
    R_target, per_agent = harness.target_risk(cfg)
    n_max, alpha = alpha_penalty(cfg.sizes, perron)
    loss = cfg.loss
    inputs = BoundInputs.from_loss(loss, n_max, alpha, cfg.beta, rho, R_target)
    deltas = args.delta if args.delta else cfg.doc["delta_grid"]
    S_grid = np.asarray(cfg.doc.get("S_grid") or np.arange(1, 1001))
    reports, csv_rows = [], ["delta,S,bound,vacuous"]
    for d in deltas:
        try:
            rep = compute_bound_report(inputs, loss, float(d), perron, sigma, epsilon=float(cfg.doc["epsilon"]),
                                       S_grid=S_grid)
        except MarginTooLargeError as exc:
            # keep sweeping; the report records why this margin has no bound
            reports.append({"delta": float(d), "error": str(exc), "delta_max": exc.delta_max})
            continue
        reports.append(rep.to_dict())
        for S, b, v in zip(rep.S_grid, rep.theorem1_bound, rep.theorem1_vacuous):
            csv_rows.append(f"{float(d)!r},{int(S)},{float(b)!r},{int(bool(v))}")
    doc = {
        "margin": {
            "mu_plus": margin.mu_plus, "mu_minus": margin.mu_minus, "mu_tilde": margin.mu_tilde,
            "delta_plus": margin.delta_plus, "delta_minus": margin.delta_minus,
            "delta_achieved": margin.delta_achieved, "delta_lower": margin.delta_lower(cfg.z),
            "local_gaps_plus": margin.local_gaps_plus.tolist(),
            "local_gaps_minus": margin.local_gaps_minus.tolist(),
        },
        "rho": rho,
        "rho_analytic": analytic,
        "target_risk": R_target,
        "target_risk_per_agent": None if per_agent is None else per_agent.tolist(),
        "perron": perron.tolist(),
        "sigma": sigma,
        "reports": reports,
    }
    _dump_json(doc, os.path.join(args.out, "bounds.json"))
    _write_text("\n".join(csv_rows) + "\n", os.path.join(args.out, "stream_bounds.csv"))


def _finish(result, args, cfg, name="errors.csv"):
    _write_text(result.errors_csv(), os.path.join(args.out, name))
    if result.margins:
        _write_text(result.margins_csv(), os.path.join(args.out, "margins.csv"))
    if cfg.doc.get("plot"):
        harness.plot_error_curves(result, os.path.join(args.out, "errors.svg"))
    if result.failures:
        for f in result.failures:
            print(f"training set {f.training_set_id} (N0={f.N0}) failed: {f.error}", file=sys.stderr)
        raise NumericalError(f"{len(result.failures)} Monte Carlo cells failed")


def cmd_mc_error(args):
    cfg = _config(args)
    _finish(harness.estimate_instantaneous_error(cfg, workers=args.workers), args, cfg)


def cmd_adaboost(args):
    cfg = _config(args).replace(adaboost=True, margins=False)
    result = harness.estimate_instantaneous_error(cfg, workers=args.workers, strategies=("adaboost",))
    _finish(result, args, cfg)


def cmd_margin_sweep(args):
    cfg = _config(args)
    sweep = harness.estimate_margin_vs_training_size(cfg, workers=args.workers)
    single = harness.run_single_sample_experiment(cfg, workers=args.workers)
    _write_text(sweep.margins_csv(), os.path.join(args.out, "margins.csv"))
    _write_text(harness.rows_to_csv(sweep.margin_summary, harness.MarginSummary._fields),
                os.path.join(args.out, "margins_summary.csv"))
    _write_text(single.single_sample_csv(), os.path.join(args.out, "single_sample.csv"))
    failures = sweep.failures + single.failures
    if failures:
        raise NumericalError(f"{len(failures)} Monte Carlo cells failed")


def cmd_spectral(args):
    cfg = _config(args)
    sp = cfg.spectral
    lines = ["quantity,index,value"]
    lines += [f"perron,{k},{float(p)!r}" for k, p in enumerate(sp.perron)]
    lines.append(f"sigma,,{float(sp.sigma)!r}")
    lines.append(f"mixing_constant,,{float(mixing_constant(cfg.K, sp.sigma))!r}")
    lines.append(f"kappa,,{float(kappa(cfg.beta, cfg.K, sp.sigma))!r}")
    text = "\n".join(lines) + "\n"
    _write_text(text, os.path.join(args.out, "spectral.csv"))
    sys.stdout.write(text)


COMMANDS = {
    "train": cmd_train,
    "predict-stream": cmd_predict_stream,
    "predict-single": cmd_predict_single,
    "bounds": cmd_bounds,
    "mc-error": cmd_mc_error,
    "margin-sweep": cmd_margin_sweep,
    "adaboost-baseline": cmd_adaboost,
    "spectral": cmd_spectral,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="sml", description="Social machine learning simulator and bounds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment configuration (JSON)")
        p.add_argument("--seed", type=_u64, default=None, help="master seed (overrides the config)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None, help="parallel workers")
        if name in ("train", "predict-stream", "predict-single", "bounds"):
            p.add_argument("--training-set", type=int, default=0, help="training-set cell to train")
        if name in ("predict-stream", "predict-single", "bounds"):
            p.add_argument("--agents", help="trained agents JSON (default: train from the config)")
        if name in ("predict-stream", "predict-single", "adaboost-baseline", "mc-error"):
            p.add_argument("--label", type=_label, default=None, help="true label (+1 or -1)")
        if name in ("predict-stream", "adaboost-baseline", "mc-error"):
            p.add_argument("--S", type=int, default=None, help="stream length")
        if name == "predict-stream":
            p.add_argument("--runs", type=int, default=1, help="number of independent streams")
        if name == "predict-single":
            p.add_argument("--observations", help="JSON list with one feature vector per agent")
        if name == "train":
            p.add_argument("--train-csv", nargs="+", help="one training CSV per agent")
        if name == "bounds":
            p.add_argument("--delta", type=float, nargs="+", help="margins to evaluate")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if getattr(args, "S", None) is not None and args.S < 1:
            raise ConfigError("--S must be >= 1")
        if getattr(args, "runs", 1) < 1:
            raise ConfigError("--runs must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SMLError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
