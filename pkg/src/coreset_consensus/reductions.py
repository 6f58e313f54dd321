"""Classification problems posed as minimum enclosing ball problems.

2-norm soft-margin SVM
    Dual weights live on the simplex and the dual objective is an MEB dual
    under ``K~(i, j) = l_i l_j (K(p_i, p_j) + 1) + [i == j] / C``.
    From optimal weights ``x``: ``w = sum x_i l_i phi(p_i)``,
    ``b = sum x_i l_i``, ``rho = x^T K~ x`` and slacks ``xi_i = x_i / C``.
SVDD
    Plain MEB in the kernel feature space.
One-class L2 SVM
    The SVM above with every label ``+1`` and no bias term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidProblemError, InvalidSolutionError
from .meb import Ball
from .space import AUGMENTED_SVM, Kernel, PointSpace


@dataclass(frozen=True)
class SvmProblem:
    X: np.ndarray
    labels: np.ndarray
    kernel: Kernel
    C: float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.labels, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise InvalidProblemError("X must be 2-D with one label per row")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise InvalidProblemError("labels must be -1 or +1")
        if not self.C > 0:
            raise InvalidProblemError("C must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", y)


def _space(build):
    try:
        return build()
    except InvalidProblemError:
        raise
    except ValueError as exc:
        raise InvalidProblemError(str(exc)) from exc


def svm2norm_to_meb(problem: SvmProblem) -> PointSpace:
    return _space(lambda: PointSpace.augmented_svm(problem.X, problem.labels,
                                                   problem.kernel, problem.C))


def svdd_to_meb(X, kernel: Kernel) -> PointSpace:
    return _space(lambda: PointSpace.svdd(X, kernel))


def oneclass_to_meb(X, kernel: Kernel, C: float) -> PointSpace:
    X = np.asarray(X, dtype=float)
    return _space(lambda: PointSpace.augmented_svm(X, np.ones(X.shape[0]), kernel, C,
                                                   bias=False))


@dataclass(frozen=True)
class Classifier:
    """Kernel expansion ``f(p) = sum_i x_i l_i (K(p_i, p) + beta)``.

    ``beta`` is 1 with a bias term and 0 for the one-class problem.
    """

    ids: np.ndarray
    weights: np.ndarray
    labels: np.ndarray
    inputs: np.ndarray
    b: float
    rho: float
    kernel: Kernel
    C: float
    bias: bool = True

    @property
    def n_support(self) -> int:
        return len(self.ids)

    def decision_function(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if P.shape[1] != self.inputs.shape[1]:
            raise ValueError(f"expected inputs of dimension {self.inputs.shape[1]}, got {P.shape[1]}")
        coef = self.weights * self.labels
        f = self.kernel(P, self.inputs) @ coef
        if self.bias:
            f = f + self.b
        return f

    def slacks(self) -> np.ndarray:
        return self.weights / self.C

    def to_dict(self) -> dict:
        return {
            "kernel": str(self.kernel),
            "C": self.C,
            "bias": self.bias,
            "support": [
                {"id": int(i), "x": float(w), "label": int(l), "p": [float(v) for v in p]}
                for i, w, l, p in zip(self.ids, self.weights, self.labels, self.inputs)
            ],
            "b": self.b,
            "rho": self.rho,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Classifier":
        sup = d["support"]
        return cls(
            ids=np.array([s["id"] for s in sup], dtype=int),
            weights=np.array([s["x"] for s in sup], dtype=float),
            labels=np.array([s["label"] for s in sup], dtype=float),
            inputs=np.array([s["p"] for s in sup], dtype=float).reshape(len(sup), -1),
            b=float(d["b"]), rho=float(d["rho"]), kernel=Kernel.parse(d["kernel"]),
            C=float(d["C"]), bias=bool(d.get("bias", True)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def extract_classifier(problem_or_space, ball: Ball) -> Classifier:
    """Turn MEB weights over an augmented space into a kernel classifier.

    Accepts either an :class:`SvmProblem` or the augmented
    :class:`PointSpace` built from it (the latter also covers one-class).
    """
    if isinstance(problem_or_space, SvmProblem):
        space = svm2norm_to_meb(problem_or_space)
    else:
        space = problem_or_space
    if space.kind != AUGMENTED_SVM:
        raise InvalidProblemError("classifier extraction needs an augmented SVM space")
    ids = np.asarray(ball.support, dtype=int)
    w = np.asarray(ball.weights, dtype=float)
    keep = w > 0
    ids, w = ids[keep], w[keep]
    if ids.size == 0:
        raise InvalidSolutionError("ball has no support points")
    w = w / w.sum()
    labels = space.labels[ids]
    b = float(w @ labels) if space.bias else 0.0
    rho = float(w @ space.block(ids, ids) @ w)
    return Classifier(ids, w, labels, space.X[ids].copy(), b, rho, space.kernel, space.C,
                      space.bias)


def predict(classifier: Classifier, p) -> float:
    """Decision value at a single input; its sign is the predicted label."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("predict takes a single input vector")
    return float(classifier.decision_function(p[None, :])[0])


def svdd_score(space: PointSpace, ball: Ball, P, kernel: Optional[Kernel] = None) -> np.ndarray:
    """Squared feature-space distance from new inputs to the SVDD center."""
    kernel = kernel or space.kernel
    P = np.atleast_2d(np.asarray(P, dtype=float))
    sup = np.asarray(ball.support, dtype=int)
    x = np.asarray(ball.weights)
    cc = x @ space.block(sup, sup) @ x
    return kernel.diag(P) - 2.0 * kernel(P, space.X[sup]) @ x + cc
