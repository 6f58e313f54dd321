"""Seeded experiments: build a problem, simulate, verify, write artifacts.

Artifacts in the output directory:

* ``trace.csv``: ``t,node,r2,center_norm``, one row per node per round
* ``summary.json``: run outcome plus an echo of the configuration
* ``model.json``: trained classifier (``svm`` and ``oneclass`` problems)
* ``verify.json``: written by :func:`verify_run`

A configuration fully determines every byte written.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .consensus import (NodeState, Trace, fixed_point_check, round_robin, run_consensus,
                        verify_epsilon)
from .coreset import CoreSet
from .datasets import gaussian_points, two_gaussians, uniform_points
from .meb import BallCache, SolverConfig, solve_meb
from .netsim import joint_connectivity_window, parse_activity, parse_graph, stream
from .reductions import (SvmProblem, extract_classifier, oneclass_to_meb, svdd_to_meb,
                         svm2norm_to_meb)
from .space import Kernel, PointSpace, load_csv

logger = logging.getLogger(__name__)

PROBLEMS = ("meb", "svm", "svdd", "oneclass")
EXIT_OK, EXIT_TIMEOUT, EXIT_VERIFY_FAIL = 0, 2, 3
STREAM_SPLIT = 4


@dataclass
class ExperimentConfig:
    """Everything that defines a run. ``points`` defaults to ``nodes``."""

    problem: str = "meb"
    nodes: int = 100
    points: Optional[int] = None
    dim: int = 50
    distribution: str = "normal"
    dataset: Optional[str] = None
    kernel: str = "linear"
    C: float = 10.0
    epsilon: float = 0.1
    graph: str = "er:0.01"
    activity: str = "on"
    max_rounds: int = 10_000
    seed: int = 0
    tol: float = 1e-10
    max_iter: int = 100_000
    r_star: Optional[float] = None
    holdout: float = 0.25
    out: str = "out"

    def validate(self) -> "ExperimentConfig":
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.problem == "svm" and not self.dataset:
            raise ValueError("the svm problem needs --dataset PATH (a labeled CSV)")
        if self.dataset and not Path(self.dataset).is_file():
            raise FileNotFoundError(f"dataset not found: {self.dataset}")
        if not 0 < self.epsilon <= 1:
            raise ValueError("--epsilon must lie in (0, 1]")
        if self.nodes < 1:
            raise ValueError("--nodes must be at least 1")
        if self.max_rounds < 1:
            raise ValueError("--max-rounds must be at least 1")
        if self.distribution not in ("normal", "uniform"):
            raise ValueError("--distribution must be normal or uniform")
        if not 0 <= self.holdout < 1:
            raise ValueError("--holdout must lie in [0, 1)")
        Kernel.parse(self.kernel)
        parse_activity(self.activity)
        if not self.graph.startswith("file:"):
            parse_graph(self.graph, 1)
        return self

    def to_dict(self) -> dict:
        """Serializable echo; the output directory is left out so it cannot change artifact bytes."""
        d = asdict(self)
        d.pop("out")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def summary_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath(
        "schemas/summary.schema.json").read_text())


def _load_points(config: ExperimentConfig):
    if config.dataset:
        return load_csv(config.dataset)
    n = config.points or config.nodes
    if config.problem == "svm":
        raise ValueError("the svm problem needs a dataset")
    gen = gaussian_points if config.distribution == "normal" else uniform_points
    return gen(n, config.dim, config.seed), None


def split_holdout(n: int, fraction: float, seed: int):
    """Deterministic train/holdout index split."""
    perm = stream(seed, STREAM_SPLIT).permutation(n)
    k = int(round(n * fraction))
    return np.sort(perm[k:]), np.sort(perm[:k])


def build_space(config: ExperimentConfig, rows=None) -> PointSpace:
    """The point space a configuration describes (optionally restricted to ``rows``)."""
    kernel = Kernel.parse(config.kernel)
    if config.problem == "svm":
        X, y = load_csv(config.dataset, labeled=True)
        if rows is not None:
            X, y = X[rows], y[rows]
        return svm2norm_to_meb(SvmProblem(X, y, kernel, config.C))
    X, _ = _load_points(config)
    if rows is not None:
        X = X[rows]
    if config.problem == "meb":
        return PointSpace.explicit(X)
    if config.problem == "svdd":
        return svdd_to_meb(X, kernel)
    return oneclass_to_meb(X, kernel, config.C)


def _simulate(config: ExperimentConfig, space: PointSpace):
    n = config.nodes
    if n > space.n_points:
        raise ValueError(f"--nodes ({n}) exceeds the number of points ({space.n_points})")
    solver = SolverConfig(config.tol, config.max_iter)
    cache = BallCache(space, solver)
    parts = round_robin(space.n_points, n)
    graph = parse_graph(config.graph, n, config.seed)
    trace = run_consensus(space, parts, graph, parse_activity(config.activity, config.seed),
                          epsilon=config.epsilon, max_rounds=config.max_rounds,
                          seed=config.seed, cache=cache)
    # smallest window from round 0 whose union graph is strongly connected, within the run
    window = joint_connectivity_window(graph, 0, trace.rounds_run)
    logger.info("union graph strongly connected over the first %s rounds", window)
    return trace, window, cache


def _summary(config: ExperimentConfig, trace: Trace, window, report, extra=None) -> dict:
    out = {
        "version": __version__,
        "converged": trace.converged,
        "consensus_round": trace.consensus_round,
        "rounds_run": trace.rounds_run,
        "quiet_window": trace.quiet_window,
        "connectivity_window": window,
        "monotone": trace.is_monotone(),
        "fixed_point_ok": trace.fixed_point_ok,
        "coreset_size": trace.coreset_size,
        "coreset": list(trace.final.ids) if trace.final is not None else None,
        "r2_final": trace.final.r2 if trace.final is not None else None,
        "r_star2": report.r_star2 if report else None,
        "eps_ratio": report.ratio if report else None,
        "verification": report.to_dict() if report else None,
        "seed": config.seed,
        "config": config.to_dict(),
    }
    if extra:
        out.update(extra)
    return out


def run_experiment(config: ExperimentConfig):
    """Simulate one configuration and write its artifacts.

    Returns
    -------
    exit_code : int
        0 on consensus with a passing check, 2 on timeout, 3 when the
        epsilon or fixed-point check fails.
    summary : dict
    """
    config.validate()
    space = build_space(config)
    trace, window, cache = _simulate(config, space)
    out = Path(config.out)
    report = None
    if trace.converged:
        report = verify_epsilon(space, trace.final, np.arange(space.n_points), config.epsilon,
                                r_star2=None if config.r_star is None else config.r_star ** 2,
                                cache=cache)
        if space.kind == "augmented_svm":
            clf = extract_classifier(space, solve_meb(space, trace.final.unique_ids(),
                                                      cache.config))
            _atomic_write(out / "model.json", _dump(clf.to_dict()))
    summary = _summary(config, trace, window, report)
    _atomic_write(out / "trace.csv", trace.to_csv())
    _atomic_write(out / "summary.json", _dump(summary))
    if not trace.converged:
        return EXIT_TIMEOUT, summary
    if not (report.passed and trace.fixed_point_ok):
        return EXIT_VERIFY_FAIL, summary
    return EXIT_OK, summary


def verify_run(out_dir, r_star: Optional[float] = None):
    """Re-check a finished run from its artifacts and write ``verify.json``.

    Returns ``(exit_code, report_dict)``.
    """
    out = Path(out_dir)
    path = out / "summary.json"
    if not path.is_file():
        raise FileNotFoundError(f"no summary.json in {out}; run the experiment first")
    summary = json.loads(path.read_text())
    if not summary.get("coreset"):
        raise FileNotFoundError(f"{path} records no final core-set (the run did not converge)")
    config = ExperimentConfig.from_dict(summary["config"])
    rows = None
    if "train_rows" in summary:
        rows = np.asarray(summary["train_rows"], dtype=int)
    space = build_space(config, rows)
    cache = BallCache(space, SolverConfig(config.tol, config.max_iter))
    final = CoreSet.from_ids(summary["coreset"], cache)
    if r_star is None:
        r_star = config.r_star
    report = verify_epsilon(space, final, np.arange(space.n_points), config.epsilon,
                            r_star2=None if r_star is None else r_star ** 2, cache=cache)
    parts = round_robin(space.n_points, config.nodes)
    states = [NodeState(i, p, final) for i, p in enumerate(parts)]
    fixed = fixed_point_check(space, states, cache)
    result = report.to_dict()
    result["fixed_point_ok"] = fixed
    result["coreset"] = list(final.ids)
    _atomic_write(out / "verify.json", _dump(result))
    ok = report.passed and fixed
    return (EXIT_OK if ok else EXIT_VERIFY_FAIL), result


def train_svm(config: ExperimentConfig):
    """Distributed 2-norm SVM training with holdout evaluation.

    Writes ``model.json``, ``trace.csv`` and ``summary.json`` (the summary
    adds accuracies and the training row indices).
    """
    config.problem = "svm"
    config.validate()
    X, y = load_csv(config.dataset, labeled=True)
    train, hold = split_holdout(X.shape[0], config.holdout, config.seed)
    space = build_space(config, train)
    trace, window, cache = _simulate(config, space)
    out = Path(config.out)
    report = None
    extra = {"train_rows": train.tolist(), "holdout_rows": hold.tolist()}
    if trace.converged:
        report = verify_epsilon(space, trace.final, np.arange(space.n_points), config.epsilon,
                                cache=cache)
        clf = extract_classifier(space, solve_meb(space, trace.final.unique_ids(), cache.config))
        _atomic_write(out / "model.json", _dump(clf.to_dict()))
        extra["train_accuracy"] = float(np.mean(np.sign(clf.decision_function(X[train])) == y[train]))
        extra["holdout_accuracy"] = (float(np.mean(np.sign(clf.decision_function(X[hold])) == y[hold]))
                                     if hold.size else None)
        extra["n_support"] = clf.n_support
    summary = _summary(config, trace, window, report, extra)
    _atomic_write(out / "trace.csv", trace.to_csv())
    _atomic_write(out / "summary.json", _dump(summary))
    if not trace.converged:
        return EXIT_TIMEOUT, summary
    if not (report.passed and trace.fixed_point_ok):
        return EXIT_VERIFY_FAIL, summary
    return EXIT_OK, summary


def generate_dataset(kind: str, n_points: int, dim: int, seed: int, separation: float = 1.0,
                     std: float = 1.0):
    """``(X, y)`` for ``two-gaussians``; ``(X, None)`` for ``normal`` or ``uniform``."""
    if kind == "two-gaussians":
        return two_gaussians(n_points, dim, separation, std, seed)
    if kind == "normal":
        return gaussian_points(n_points, dim, seed), None
    if kind == "uniform":
        return uniform_points(n_points, dim, seed), None
    raise ValueError(f"unknown dataset kind {kind!r}")
