"""Command line entry point: ``coreset-consensus {run,verify,train,gen}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .experiment import (EXIT_OK, ExperimentConfig, generate_dataset, run_experiment,
                         train_svm, verify_run)
from .space import save_csv

log = logging.getLogger("coreset_consensus")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nodes", type=int, default=100, help="number of simulated peers")
    p.add_argument("--epsilon", type=float, default=0.1,
                   help="tolerance; core-sets hold ceil(1/epsilon) points")
    p.add_argument("--graph", default="er:0.01",
                   help="er:P | ring | complete | file:PATH (JSON schedule)")
    p.add_argument("--activity", default="on", help="on | bernoulli:Q")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-rounds", type=int, default=10_000)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--dataset", help="CSV, features then optional -1/+1 label column")
    p.add_argument("--kernel", default=None, help="linear | gaussian:GAMMA")
    p.add_argument("--C", type=float, default=10.0, help="SVM penalty")
    p.add_argument("--tol", type=float, default=1e-10, help="MEB solver relative gap")
    p.add_argument("--max-iter", type=int, default=100_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coreset-consensus",
        description="Distributed minimum enclosing ball by core-set consensus.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one configuration and verify it")
    _add_common(run)
    run.add_argument("--problem", choices=("meb", "svm", "svdd", "oneclass"), default="meb")
    run.add_argument("--dim", type=int, default=50, help="dimension of generated points")
    run.add_argument("--points", type=int, help="generated points (default: --nodes)")
    run.add_argument("--distribution", choices=("normal", "uniform"), default="normal")
    run.add_argument("--r-star", type=float, help="known optimal radius (skips the oracle)")
    run.add_argument("--sweep", type=int, default=0, metavar="K",
                     help="run seeds SEED..SEED+K-1 in parallel, one subdirectory each")
    run.add_argument("--workers", type=int, default=None)

    ver = sub.add_parser("verify", help="re-check a finished run")
    ver.add_argument("--out", default="out", help="run directory")
    ver.add_argument("--r-star", type=float, help="known optimal radius (skips the oracle)")

    tr = sub.add_parser("train", help="distributed SVM training with holdout accuracy")
    _add_common(tr)
    tr.add_argument("--holdout", type=float, default=0.25, help="fraction held out")

    gen = sub.add_parser("gen", help="write a seeded synthetic dataset")
    gen.add_argument("--kind", choices=("two-gaussians", "normal", "uniform"),
                     default="two-gaussians")
    gen.add_argument("--points", type=int, default=40)
    gen.add_argument("--dim", type=int, default=2)
    gen.add_argument("--separation", type=float, default=1.0)
    gen.add_argument("--std", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="CSV path")
    return parser


def _config(args, problem: str) -> ExperimentConfig:
    kernel = args.kernel or ("gaussian:0.5" if problem in ("svm", "svdd", "oneclass") else "linear")
    return ExperimentConfig(
        problem=problem, nodes=args.nodes, points=getattr(args, "points", None),
        dim=getattr(args, "dim", 50), distribution=getattr(args, "distribution", "normal"),
        dataset=args.dataset, kernel=kernel, C=args.C, epsilon=args.epsilon, graph=args.graph,
        activity=args.activity, max_rounds=args.max_rounds, seed=args.seed, tol=args.tol,
        max_iter=args.max_iter, r_star=getattr(args, "r_star", None),
        holdout=getattr(args, "holdout", 0.25), out=args.out)


def _report(summary: dict) -> str:
    if not summary["converged"]:
        return f"TIMEOUT after {summary['rounds_run']} rounds"
    ver = summary["verification"]
    status = "PASS" if ver["passed"] and summary["fixed_point_ok"] else "FAIL"
    return (f"{status}, ratio={ver['ratio']:.6g}, consensus_round={summary['consensus_round']}, "
            f"rounds_run={summary['rounds_run']}, r2={summary['r2_final']:.6g}")


def _run_one(config: ExperimentConfig):
    code, summary = run_experiment(config)
    return config.seed, code, _report(summary)


def cmd_run(args) -> int:
    config = _config(args, args.problem).validate()
    if args.sweep <= 0:
        code, summary = run_experiment(config)
        print(_report(summary))
        return code
    configs = [replace(config, seed=config.seed + k, out=str(Path(config.out) / f"seed_{config.seed + k}"))
               for k in range(args.sweep)]
    worst = EXIT_OK
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        for seed, code, line in pool.map(_run_one, configs):
            print(f"seed {seed}: {line}")
            worst = max(worst, code)
    return worst


def cmd_verify(args) -> int:
    code, report = verify_run(args.out, args.r_star)
    status = "PASS" if code == EXIT_OK else "FAIL"
    print(f"{status}, ratio={report['ratio']:.6g}, fixed_point_ok={report['fixed_point_ok']}")
    return code


def cmd_train(args) -> int:
    if not args.dataset:
        raise ValueError("train needs --dataset PATH (a labeled CSV)")
    code, summary = train_svm(_config(args, "svm"))
    print(_report(summary))
    if summary["converged"]:
        hold = summary["holdout_accuracy"]
        print(f"train_accuracy={summary['train_accuracy']:.4f}, "
              f"holdout_accuracy={'n/a' if hold is None else format(hold, '.4f')}, "
              f"n_support={summary['n_support']}")
    return code


def cmd_gen(args) -> int:
    X, y = generate_dataset(args.kind, args.points, args.dim, args.seed, args.separation,
                            args.std)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_csv(args.out, X, y)
    print(json.dumps({"out": args.out, "points": int(X.shape[0]), "dim": int(X.shape[1]),
                      "labeled": y is not None}))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "verify": cmd_verify, "train": cmd_train, "gen": cmd_gen}
    try:
        return handler[args.command](args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
