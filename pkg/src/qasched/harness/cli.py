"""Command-line interface.

Subcommands: generate, train, predict, simulate, evaluate, experiment.
Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from .. import dynamics, ising
from .. import schedule as schedules
from .. import spectral
from ..errors import ConfigurationError, FormatError, NumericalError
from ..surrogate import (Dataset, TrainConfig, forward, history_to_csv,
                         load_model, metric_mre, read_jsonl, save_model, train,
                         write_jsonl)
from . import figures
from .experiments import (EXPERIMENT_NAMES, compare_schedules, desk_spec,
                          experiment_anneal_compare,
                          experiment_extrapolate_chains,
                          experiment_extrapolate_cliques,
                          experiment_same_size, experiment_symmetry,
                          generate_dataset, generate_records)
from .reports import Report, emit_report, provenance_block

_EXPERIMENT_RUNNERS = {
    "anneal-compare": experiment_anneal_compare,
    "same-size": experiment_same_size,
    "extrapolate-chains": experiment_extrapolate_chains,
    "extrapolate-cliques": experiment_extrapolate_cliques,
    "symmetry": experiment_symmetry,
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--epsilon", type=float, default=0.1,
                        help="adiabaticity parameter (default 0.1)")
    common.add_argument("--m-max", type=int, default=4,
                        help="excited clusters tracked per grid point")
    common.add_argument("--grid", type=int, default=500,
                        help="s-grid and schedule sample count")
    common.add_argument("--paper-scale", action="store_true",
                        help="full-scale instance counts and architecture")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--config", default=None,
                        help="JSON file of ExperimentSpec field overrides")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="qasched",
        description="Random-Ising annealing schedules: generation, "
                    "simulation, and LSTM surrogate training.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common],
                       help="sample instances and write a schedule dataset")
    p.add_argument("--topology", default=ising.OPEN_CHAIN,
                   choices=ising.TOPOLOGY_KINDS)
    p.add_argument("--n-spins", type=int, default=4)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--mask-scheme", default=None, choices=ising.MASK_SCHEMES)
    p.add_argument("--mask-config", type=int, default=0)
    p.add_argument("--experiment", default=None, choices=EXPERIMENT_NAMES,
                   help="write a full experiment's dataset files instead")
    p.add_argument("--dataset", default="dataset.jsonl",
                   help="output file name (below --out)")

    p = sub.add_parser("train", parents=[common],
                       help="train the LSTM surrogate on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--architecture", default="64,64",
                   help="comma-separated hidden widths")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--model-out", default="model.npz")
    p.add_argument("--history-out", default="history.csv")

    p = sub.add_parser("predict", parents=[common],
                       help="predict schedule curves for dataset records")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions-out", default="predictions.jsonl")

    p = sub.add_parser("simulate", parents=[common],
                       help="anneal one instance under competing schedules")
    p.add_argument("--topology", default=ising.OPEN_CHAIN,
                   choices=ising.TOPOLOGY_KINDS)
    p.add_argument("--n-spins", type=int, default=4)
    p.add_argument("--instance-seed", type=int, default=0)
    p.add_argument("--instance", default=None,
                   help="instance JSON file (overrides sampling)")
    p.add_argument("--schedules", default="linear,local-adiabatic",
                   help="comma list from {linear, local-adiabatic, predicted}")
    p.add_argument("--model", default=None,
                   help="checkpoint for the predicted schedule")

    p = sub.add_parser("evaluate", parents=[common],
                       help="score a trained model on a labeled dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("experiment", parents=[common],
                       help="run a full experiment preset")
    p.add_argument("name", choices=EXPERIMENT_NAMES)

    return parser


def _load_config_overrides(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ConfigurationError("--config must hold a JSON object")
    return obj


def _spec_from_args(name: str, args) -> "object":
    overrides = _load_config_overrides(args.config)
    train_over = overrides.pop("train_config", None)
    paper = bool(overrides.pop("paper_scale", args.paper_scale))
    # Config-file values override flag values for fields both can set.
    fields = {"seed": args.seed, "out_dir": args.out,
              "epsilon": args.epsilon, "m_max": args.m_max,
              "grid_points": args.grid}
    fields.update(overrides)
    spec = desk_spec(name, paper_scale=paper, **fields)
    if train_over:
        if "architecture" in train_over:
            train_over["architecture"] = tuple(train_over["architecture"])
        spec = dataclasses.replace(
            spec, train_config=dataclasses.replace(spec.train_config,
                                                   **train_over))
    return spec


def _cmd_generate(args) -> int:
    if args.experiment is not None:
        spec = _spec_from_args(args.experiment, args)
        paths, stats_list = generate_dataset(spec)
        for path in paths:
            print(path)
        return 0
    topo = ising.Topology(args.topology, args.n_spins)
    records, stats = generate_records(
        topo, args.count, args.seed, epsilon=args.epsilon, m_max=args.m_max,
        grid_points=args.grid, mask_scheme=args.mask_scheme,
        mask_config=args.mask_config)
    os.makedirs(args.out, exist_ok=True)
    layout = {"kind": topo.kind, "n_spins": topo.n_spins,
              "feature_count": topo.feature_count(), "epsilon": args.epsilon,
              "m_max": args.m_max, "grid_points": args.grid}
    path = os.path.join(args.out, args.dataset)
    write_jsonl(Dataset(records, layout), path)
    regenerated = stats["flagged"] + stats["invalid_schedule"] + stats["t_f_capped"]
    print(f"{path}: {len(records)} records ({regenerated} regenerated)")
    return 0


def _cmd_train(args) -> int:
    dataset = read_jsonl(args.dataset)
    architecture = tuple(int(w) for w in args.architecture.split(","))
    config = TrainConfig(architecture=architecture, epochs=args.epochs,
                         batch_size=args.batch_size,
                         learning_rate=args.learning_rate,
                         dropout_rate=args.dropout,
                         validation_fraction=args.val_fraction,
                         seed=args.seed)
    model, history = train(dataset, config)
    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, args.model_out)
    save_model(model, model_path)
    history_to_csv(history, os.path.join(args.out, args.history_out))
    if history:
        figures.history_figure(history, os.path.join(args.out, "history.png"))
        last = history[-1]
        print(f"{model_path}: epoch {last.epoch} "
              f"train_mse {last.train_mse:.3e} val_mse {last.val_mse:.3e} "
              f"val_mre {last.val_mre:.4f}")
    else:
        print(f"{model_path}: training diverged at the first epoch")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    dataset = read_jsonl(args.dataset)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, args.predictions_out)
    mres = []
    with open(path, "w") as fh:
        for rec in dataset.records:
            outputs = forward(model, np.asarray(rec.features, dtype=float))
            row = {"seed": rec.meta.get("seed"), "t_f": float(rec.t_f),
                   "prediction": [float(v) for v in outputs]}
            if len(rec.target):
                mre = metric_mre(outputs, rec.target)
                row["mre"] = mre
                mres.append(mre)
            fh.write(json.dumps(row) + "\n")
    if mres:
        print(f"{path}: {len(mres)} records, median MRE {np.median(mres):.4f}")
    else:
        print(f"{path}: {len(dataset.records)} records")
    return 0


def _cmd_simulate(args) -> int:
    if args.instance is not None:
        with open(args.instance) as fh:
            inst = ising.instance_from_json(fh.read())
    else:
        topo = ising.Topology(args.topology, args.n_spins)
        inst = ising.sample_instance(topo, topo.n_spins, args.instance_seed)
    profile = spectral.gap_profile(inst, m_max=args.m_max, n_grid=args.grid)
    la = schedules.local_adiabatic_schedule(profile, args.epsilon,
                                            n_points=args.grid)
    wanted = [w.strip() for w in args.schedules.split(",") if w.strip()]
    sched_map = {}
    for label in wanted:
        if label == "linear":
            sched_map[label] = schedules.linear_schedule(la.t_f, args.grid)
        elif label == "local-adiabatic":
            sched_map[label] = la
        elif label == "predicted":
            if args.model is None:
                raise ConfigurationError("--model is required for predicted")
            model = load_model(args.model)
            layout = ising.Topology(inst.topology.kind, inst.n_spins)
            outputs = forward(model, ising.feature_vector(inst, layout))
            sched_map[label] = schedules.schedule_from_prediction(outputs,
                                                                  la.t_f)
        else:
            raise ConfigurationError(f"unknown schedule {label!r}")
    results = compare_schedules(inst, sched_map)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "instance.json"), "w") as fh:
        fh.write(ising.instance_to_json(inst) + "\n")
    for label, res in results.items():
        with open(os.path.join(args.out, f"result_{label}.json"), "w") as fh:
            fh.write(dynamics.result_to_json(res, sched_map[label]) + "\n")
        dynamics.trace_to_csv(res, sched_map[label],
                              os.path.join(args.out, f"trace_{label}.csv"))
        schedules.schedule_to_csv(sched_map[label],
                                  os.path.join(args.out,
                                               f"schedule_{label}.csv"))
        residual = ("excluded" if res.residual_excluded
                    else f"{res.residual_energy:.4e}")
        print(f"{label}: fidelity {res.fidelity:.6f} residual {residual}")
    figures.schedule_overlay_figure(sched_map,
                                    os.path.join(args.out, "schedules.png"))
    figures.trace_figure(
        {lab: (sched_map[lab].times, results[lab].ground_prob_trace,
               results[lab].gap_trace) for lab in results},
        os.path.join(args.out, "populations.png"))
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    dataset = read_jsonl(args.dataset)
    mres = [metric_mre(forward(model, np.asarray(r.features, dtype=float)),
                       r.target)
            for r in dataset.records]
    report = Report("evaluate")
    report.add_distribution("mre", mres)
    report.provenance = provenance_block(
        {"model": args.model, "dataset": args.dataset}, {"seed": args.seed})
    emit_report(report, args.out)
    figures.histogram_figure(report.histograms["mre"],
                             os.path.join(args.out, "hist_mre.png"),
                             xlabel="MRE")
    print(f"median MRE {report.summaries['mre']['median']:.4f} "
          f"over {len(mres)} records")
    return 0


def _cmd_experiment(args) -> int:
    spec = _spec_from_args(args.name, args)
    runner = _EXPERIMENT_RUNNERS[args.name]
    report, _ = runner(spec)
    for key in sorted(report.scalars):
        print(f"{key}: {report.scalars[key]}")
    for key in sorted(report.summaries):
        med = report.summaries[key]["median"]
        if med is not None:
            print(f"median {key}: {med:.6g}")
    print(f"report written to {spec.out_dir}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
    "experiment": _cmd_experiment,
}


def entry(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(entry())
