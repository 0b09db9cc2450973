"""Command-line entry point for reproducible surrogate experiments.

Subcommands cover feeder generation, dataset generation, training,
evaluation, and a one-shot experiment pipeline. Every command is
deterministic given its flags; experiment runs echo their fully resolved
configuration into the output directory for provenance.

Exit codes: 0 success, 2 usage or validation failure, 3 generation
failure, 4 training divergence, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen, evaluation, network, surrogate, training
from .errors import Diverged, GenerationFailed, GridfpError, ParseError, ValidationError

EXIT_VALIDATION = 2
EXIT_GENERATION = 3
EXIT_DIVERGED = 4
EXIT_IO = 5

_CONFIG_DEFAULTS = {
    "feeder": None,
    "buses": 13,
    "feeder_seed": 1,
    "train_samples": 40,
    "test_samples": 1000,
    "data_seed": 11,
    "load_range": [0.5, 1.5],
    "delta_fraction": 0.2,
    "pv_buses": [],
    "pv_range": [0.0, 0.05],
    "nominal_load": [0.01, 0.005],
    "epochs": 7000,
    "lr": 0.5,
    "lr_decay": 0.1,
    "lr_every": 2000,
    "train_seed": 0,
    "out": "experiment-out",
}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridfp",
        description="Fixed-point load-flow surrogates for three-phase feeders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-feeder", help="generate a synthetic radial feeder")
    p.add_argument("--buses", type=_positive_int, required=True, help="number of PQ buses")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o", required=True, help="output feeder JSON path")

    p = sub.add_parser("gen-data", help="generate train/test datasets from a feeder")
    p.add_argument("--feeder", required=True, help="feeder JSON path")
    p.add_argument("--train", type=_positive_int, required=True, help="training sample count")
    p.add_argument("--test", type=_positive_int, required=True, help="test sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--load-range", type=float, nargs=2, default=[0.5, 1.5],
                   metavar=("LO", "HI"), help="uniform load multiplier range")
    p.add_argument("--delta-fraction", type=float, default=0.2,
                   help="fraction of load power on delta terms")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="train a surrogate on a dataset")
    p.add_argument("--data", required=True, help="training dataset JSONL path")
    p.add_argument("--feeder", default=None,
                   help="optional feeder JSON for slack voltage and no-load error logging")
    p.add_argument("--epochs", type=_positive_int, default=7000)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--lr-decay", type=float, default=0.1)
    p.add_argument("--lr-every", type=_positive_int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test dataset")
    p.add_argument("--checkpoint", required=True, help="parameter checkpoint JSON path")
    p.add_argument("--data", required=True, help="test dataset JSONL path")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("experiment", help="run feeder -> data -> train -> eval end to end")
    p.add_argument("--config", required=True, help="experiment config JSON path")
    p.add_argument("--feeder", default=None, help="override: use this feeder file")
    p.add_argument("--buses", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=None, help="override feeder seed")
    p.add_argument("--train", type=_positive_int, default=None, help="override train samples")
    p.add_argument("--test", type=_positive_int, default=None, help="override test samples")
    p.add_argument("--epochs", type=_positive_int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--lr-decay", type=float, default=None)
    p.add_argument("--lr-every", type=_positive_int, default=None)
    p.add_argument("--out", default=None, help="override output directory")
    return parser


def _cmd_gen_feeder(args) -> int:
    feeder = network.generate_synthetic_feeder(args.buses, args.seed)
    network.save_feeder(feeder, args.out)
    cond = np.linalg.cond(feeder.y_ll)
    print(f"wrote {args.out}: {feeder.n_buses} PQ buses, cond(y_ll) ~ {cond:.3e}")
    return 0


def _scenario_from_args(args) -> datagen.ScenarioConfig:
    return datagen.ScenarioConfig(
        n_train=args.train,
        n_test=args.test,
        load_range=tuple(args.load_range),
        delta_fraction=args.delta_fraction,
        seed=args.seed,
    )


def _cmd_gen_data(args) -> int:
    feeder = network.load_feeder(args.feeder)
    train_set, test_set = datagen.generate_dataset(feeder, _scenario_from_args(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    datagen.save_dataset(train_set, out / "train.jsonl")
    datagen.save_dataset(test_set, out / "test.jsonl")
    print(
        f"wrote {out / 'train.jsonl'} ({train_set.n_samples} samples) and "
        f"{out / 'test.jsonl'} ({test_set.n_samples} samples)"
    )
    return 0


def _cmd_train(args) -> int:
    dataset = datagen.load_dataset(args.data)
    config = training.TrainConfig(
        epochs=args.epochs,
        lr_initial=args.lr,
        lr_decay_factor=args.lr_decay,
        lr_decay_every=args.lr_every,
        seed=args.seed,
    )
    ground_truth = None
    slack = None
    if args.feeder is not None:
        feeder = network.load_feeder(args.feeder)
        ground_truth = network.derive_operators(feeder)
        slack = feeder.v_slack
    params, log = training.train(dataset, config, ground_truth, slack)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    surrogate.save_params(params, out / "checkpoint.json")
    log.write_csv(out / "trainlog.csv")
    print(
        f"trained {config.epochs} epochs on {dataset.n_samples} samples: "
        f"first-epoch loss {log.mean_loss[0]:.3e}, final {log.mean_loss[-1]:.3e}"
    )
    return 0


def _cmd_eval(args) -> int:
    params = surrogate.load_params(args.checkpoint)
    test_set = datagen.load_dataset(args.data)
    report = evaluation.evaluate(params, test_set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.save_report(report, out / "report.json")
    evaluation.write_entry_errors_csv(report, out / "errors.csv")
    print(
        f"evaluated {report.n_samples} samples: rmse(|v|) {report.rmse_magnitude:.4e} p.u., "
        f"rmse(angle) {report.rmse_angle:.4e} rad, {report.mean_predict_ms:.2f} ms/sample"
    )
    return 0


def _resolve_experiment_config(args) -> dict:
    with open(args.config) as fh:
        try:
            loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{args.config}: not valid JSON: {exc}") from None
    if not isinstance(loaded, dict):
        raise ParseError(f"{args.config}: config must be a JSON object")
    unknown = sorted(set(loaded) - set(_CONFIG_DEFAULTS))
    if unknown:
        raise ValidationError(f"{args.config}: unknown config keys {unknown}")
    resolved = dict(_CONFIG_DEFAULTS)
    resolved.update(loaded)
    overrides = {
        "feeder": args.feeder,
        "buses": args.buses,
        "feeder_seed": args.seed,
        "train_samples": args.train,
        "test_samples": args.test,
        "epochs": args.epochs,
        "lr": args.lr,
        "lr_decay": args.lr_decay,
        "lr_every": args.lr_every,
        "out": args.out,
    }
    for key, value in overrides.items():
        if value is not None:
            resolved[key] = value
    return resolved


def _cmd_experiment(args) -> int:
    cfg = _resolve_experiment_config(args)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)

    if cfg["feeder"] is not None:
        feeder = network.load_feeder(cfg["feeder"])
    else:
        feeder = network.generate_synthetic_feeder(cfg["buses"], cfg["feeder_seed"])
    network.save_feeder(feeder, out / "feeder.json")

    scenario = datagen.ScenarioConfig(
        n_train=cfg["train_samples"],
        n_test=cfg["test_samples"],
        load_range=tuple(cfg["load_range"]),
        pv_buses=tuple((int(b), int(p)) for b, p in cfg["pv_buses"]),
        pv_range=tuple(cfg["pv_range"]),
        nominal_load=complex(cfg["nominal_load"][0], cfg["nominal_load"][1]),
        delta_fraction=cfg["delta_fraction"],
        seed=cfg["data_seed"],
    )
    train_set, test_set = datagen.generate_dataset(feeder, scenario)
    datagen.save_dataset(train_set, out / "train.jsonl")
    datagen.save_dataset(test_set, out / "test.jsonl")

    train_cfg = training.TrainConfig(
        epochs=cfg["epochs"],
        lr_initial=cfg["lr"],
        lr_decay_factor=cfg["lr_decay"],
        lr_decay_every=cfg["lr_every"],
        seed=cfg["train_seed"],
    )
    truth = network.derive_operators(feeder)
    params, log = training.train(train_set, train_cfg, truth, feeder.v_slack)
    surrogate.save_params(params, out / "checkpoint.json")
    log.write_csv(out / "trainlog.csv")

    report = evaluation.evaluate(params, test_set)
    evaluation.save_report(report, out / "report.json")
    evaluation.write_entry_errors_csv(report, out / "errors.csv")

    with open(out / "config.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)

    print(
        f"experiment complete in {out}: rmse(|v|) {report.rmse_magnitude:.4e} p.u., "
        f"rmse(angle) {report.rmse_angle:.4e} rad, "
        f"final no-load error {log.w_error[-1]:.3e}"
    )
    return 0


_HANDLERS = {
    "gen-feeder": _cmd_gen_feeder,
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except GenerationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except Diverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ParseError, ValidationError, GridfpError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
