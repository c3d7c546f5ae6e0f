"""Command-line front end.

Exit codes: 0 success, 2 domain/data errors, 64 usage errors, 74 I/O errors.
"""
import argparse
import csv
import logging
import sys
from dataclasses import replace

import numpy as np

from . import persist, simlab
from .boost import BoostConfig, train
from .cir import (CirConfig, dense_tau_grid, grid_rng, max_cir_distribution,
                  simulate_cir_max_samples, split_tau_grid, tau_grid_from_quantiles)
from .data import load_csv, load_features_csv, read_numeric_csv
from .errors import CirBoostError
from .loss import LossKind

EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_IO = 0, 2, 64, 74
STUDIES = ("root-stump", "multi-feature", "linear-case", "bound-tightness")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_cir_flags(p):
    p.add_argument("--paths", type=int, default=1000, help="Monte-Carlo paths per CIR law")
    p.add_argument("--epsilon", type=float, default=1e-7, help="quantile clamp of the time transform")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    parser = _Parser(prog="cirboost", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="file of key=value lines used as flag defaults")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model to a CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--target", default="y")
    p.add_argument("--loss", choices=("mse", "logloss"), default="mse")
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--max-iterations", type=int, default=50000)
    p.add_argument("--out", "--model", dest="out", required=True, help="model file to write")
    _add_cir_flags(p)

    p = sub.add_parser("predict", help="score a CSV file with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", default=None, help="column to ignore if present")
    p.add_argument("--out", required=True)
    p.add_argument("--probability", action="store_true")

    p = sub.add_parser("simulate-cir", help="fit the law of the maximum of the CIR process on a grid")
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--splits", type=int, help="equally spaced split points")
    grid.add_argument("--grid-file", help="file of split quantiles u in (0, 1)")
    grid.add_argument("--dense", action="store_true", help="whole clamped time range")
    p.add_argument("--out", help="CSV file for the raw simulated maxima")
    _add_cir_flags(p)

    p = sub.add_parser("study", help="run a simulation study")
    p.add_argument("--study", required=True)
    p.add_argument("--dgp", choices=simlab.DGP_KINDS, default="noise")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--a", type=int, default=None, help="split points (omit for continuous)")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--test-mc", type=int, default=1000)
    p.add_argument("--m-list", default="1,2,5,10,20,50")
    p.add_argument("--case", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--m", type=int, default=10000, help="feature count for cases 2 and 3")
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--out", required=True)
    _add_cir_flags(p)
    return parser


def _config_args(path):
    args = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read config {path}: {exc.strerror}") from exc
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"config line {line!r} is not key=value")
        key, value = key.strip(), value.strip()
        if value.lower() in ("true", "yes"):
            args.append(f"--{key}")
        elif value.lower() not in ("false", "no"):
            args += [f"--{key}", value]
    return args


def _cir_config(args):
    return CirConfig(epsilon=args.epsilon, n_paths=args.paths, seed=args.seed)


def cmd_train(args):
    d = load_csv(args.data, args.target)
    cfg = BoostConfig(loss=LossKind.parse(args.loss), learning_rate=args.learning_rate,
                      max_iterations=args.max_iterations, cir=_cir_config(args),
                      seed=args.seed, threads=args.threads)
    ens = train(d, cfg)
    persist.save_model(ens, args.out)
    leaves = ens.leaf_counts()
    print(f"seed: {args.seed}")
    print(f"iterations: {ens.n_trained}")
    print(f"stopped_by: {'iteration cap' if ens.hit_iteration_cap else 'criterion'}")
    print(f"final_training_loss: {ens.train_loss_path[-1]!r}")
    print(f"leaf_counts: {','.join(map(str, leaves))}")
    print(f"model: {args.out}")
    return EXIT_OK


def _write_column(path, name, values):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([name])
        for v in values:
            w.writerow([repr(float(v))])


def cmd_predict(args):
    ens = persist.load_model(args.model)
    X = load_features_csv(args.data, ens.feature_names, drop=args.target)
    preds = ens.predict_probability(X) if args.probability else ens.predict(X)
    _write_column(args.out, "probability" if args.probability else "prediction", preds)
    return EXIT_OK


def _read_u_grid(path):
    try:
        header, table = read_numeric_csv(path)
        u = np.concatenate([[float(header[0])], table[:, 0]])
    except (ValueError, CirBoostError):
        # a header row is allowed; numeric parse of the first line failed
        _, table = read_numeric_csv(path)
        u = table[:, 0]
    return u


def cmd_simulate_cir(args):
    cfg = _cir_config(args)
    if args.splits is not None:
        if args.splits < 1:
            raise UsageError("--splits must be at least 1")
        grid = split_tau_grid(args.splits, cfg.epsilon)
    elif args.dense:
        grid = dense_tau_grid(cfg.epsilon)
    else:
        grid = tau_grid_from_quantiles(_read_u_grid(args.grid_file), cfg.epsilon)
    law = max_cir_distribution(grid, cfg)
    samples = None
    if args.out:
        rng = grid_rng(grid, cfg.seed)
        samples = simulate_cir_max_samples(grid, cfg.n_paths, rng)
        _write_column(args.out, "max", samples)
    form = "exact_gamma" if law.is_exact else law.form
    print(f"form: {form}")
    print(f"grid_points: {len(grid)}")
    print(f"location: {law.location!r}")
    print(f"scale: {law.scale!r}")
    print(f"mean: {law.mean()!r}")
    return EXIT_OK


def cmd_study(args):
    if args.study not in STUDIES:
        raise UsageError(f"unknown study {args.study!r}; choose from {', '.join(STUDIES)}")
    cfg = _cir_config(args)
    if args.study == "root-stump":
        spec = simlab.DgpSpec(args.dgp, args.sigma, args.n, None if args.a is None else args.a + 1)
        res = simlab.root_stump_study(spec, args.replicas, args.test_mc, cfg, args.seed)
        simlab.write_study_csv(res, args.out)
        for name, s in res.rows():
            print(f"{name}: E={s.mean!r} P={s.P!r}")
    elif args.study == "multi-feature":
        m_list = [int(v) for v in args.m_list.split(",") if v.strip()]
        rows = simlab.multi_feature_bias_curve(m_list, args.a, args.n, args.replicas, cfg,
                                               args.seed, args.test_mc)
        simlab.write_long_csv(rows, "m", args.out)
    elif args.study == "bound-tightness":
        a_list = (1, 4, 9, 49, 99) if args.a is None else (args.a,)
        rows = simlab.bound_tightness_study(args.n, a_list, args.replicas, cfg, args.test_mc,
                                            args.seed)
        simlab.write_long_csv(rows, "a", args.out)
    else:
        bcfg = BoostConfig(learning_rate=args.learning_rate, cir=cfg, seed=cfg.seed,
                           threads=args.threads)
        res = simlab.linear_case_experiment(args.case, args.seed, bcfg, args.n, args.m)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "test_loss", "n_trained", "runtime", "constant_test_loss"])
            w.writerow([res.case, repr(res.test_loss), res.n_trained, repr(res.runtime),
                        repr(res.constant_test_loss)])
        print(f"test_loss: {res.test_loss!r} n_trained: {res.n_trained}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict,
            "simulate-cir": cmd_simulate_cir, "study": cmd_study}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="cirboost: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            # config values act as defaults: explicit flags come later and win
            pre = argv[:argv.index(args.command) + 1] if args.command in argv else argv
            rest = argv[len(pre):]
            args = parser.parse_args(pre + _config_args(args.config) + rest)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CirBoostError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def run():
    sys.exit(main())
