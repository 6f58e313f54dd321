"""Points and the inner-product geometry they live in.

Every MEB and core-set routine in this package talks to a :class:`PointSpace`
through dot products only, so the same code serves explicit vectors and
kernel feature spaces (including the label/bias/slack augmented space used
for 2-norm SVM training).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidProblemError

EXPLICIT = "explicit"
AUGMENTED_SVM = "augmented_svm"
SVDD = "svdd"

_CACHE_LIMIT = 4096
_DIAG_TOL = 1e-9
_CHUNK = 1 << 20  # max elements of a (rows, cols, dim) temporary


@dataclass(frozen=True)
class Kernel:
    """Linear or Gaussian kernel.

    Parameters
    ----------
    name : {"linear", "gaussian"}
    gamma : float, optional
        Bandwidth of the Gaussian kernel ``exp(-gamma * ||p - q||^2)``.
    """

    name: str = "linear"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.name not in ("linear", "gaussian"):
            raise ValueError(f"unknown kernel {self.name!r}")
        if self.name == "gaussian" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("gaussian kernel needs a positive gamma")

    @classmethod
    def parse(cls, text: str) -> "Kernel":
        """Build a kernel from ``"linear"`` or ``"gaussian:GAMMA"``."""
        name, _, arg = text.partition(":")
        name = name.strip().lower()
        if name == "linear":
            return cls("linear")
        if name in ("gaussian", "rbf"):
            if not arg:
                raise ValueError("expected gaussian:GAMMA")
            return cls("gaussian", float(arg))
        raise ValueError(f"unknown kernel spec {text!r}")

    def __str__(self):
        return "linear" if self.name == "linear" else f"gaussian:{self.gamma!r}"

    def __call__(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        out = np.empty((A.shape[0], B.shape[0]))
        # elementwise reduction (no BLAS) keeps K(p, q) == K(q, p) bit for bit
        step = max(1, _CHUNK // max(1, B.shape[0] * A.shape[1]))
        for lo in range(0, A.shape[0], step):
            a = A[lo:lo + step, None, :]
            if self.name == "linear":
                out[lo:lo + step] = (a * B[None, :, :]).sum(axis=-1)
            else:
                diff = a - B[None, :, :]
                out[lo:lo + step] = np.exp(-self.gamma * (diff * diff).sum(axis=-1))
        return out

    def diag(self, A) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if self.name == "linear":
            return (A * A).sum(axis=-1)
        return np.ones(A.shape[0])


class PointSpace:
    """Indexed points with a symmetric positive semidefinite dot product.

    Three geometries are supported:

    * ``explicit``: ``dot(i, j) = s_i . s_j``
    * ``augmented_svm``: ``l_i l_j (K(p_i, p_j) + beta) + [i == j] / C`` with
      ``beta = 1`` when the bias is augmented and ``0`` otherwise
    * ``svdd``: ``dot(i, j) = K(p_i, p_j)``

    Use the :meth:`explicit`, :meth:`augmented_svm` and :meth:`svdd`
    constructors. Instances are immutable.
    """

    def __init__(self, X, kind=EXPLICIT, labels=None, kernel=None, C=None,
                 bias=True, cache=True):
        X = np.array(X, dtype=float, copy=True)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("X must be a non-empty 2-D array")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        if kind not in (EXPLICIT, AUGMENTED_SVM, SVDD):
            raise ValueError(f"unknown space kind {kind!r}")
        X.setflags(write=False)
        self.X = X
        self.kind = kind
        self.kernel = Kernel("linear") if kind == EXPLICIT else (kernel or Kernel("linear"))
        self.C = None if C is None else float(C)
        self.bias = bool(bias)
        if labels is not None:
            labels = np.asarray(labels, dtype=float).ravel()
            if labels.shape[0] != X.shape[0]:
                raise ValueError("labels and X have different lengths")
            if not np.all(np.isin(labels, (-1.0, 1.0))):
                raise ValueError("labels must be -1 or +1")
            labels.setflags(write=False)
        self.labels = labels

        if kind == AUGMENTED_SVM:
            if self.C is None or not self.C > 0:
                raise ValueError("augmented space needs a positive C")
            if labels is None:
                raise ValueError("augmented space needs labels")
        if kind in (AUGMENTED_SVM, SVDD):
            kd = self.kernel.diag(X)
            if np.ptp(kd) > _DIAG_TOL * max(1.0, abs(kd[0])):
                raise InvalidProblemError(
                    "kernel diagonal is not constant; normalize the inputs "
                    "or use a gaussian kernel")

        self._gram = None
        self._cache = cache and X.shape[0] <= _CACHE_LIMIT

    # constructors

    @classmethod
    def explicit(cls, X, **kw) -> "PointSpace":
        return cls(X, kind=EXPLICIT, **kw)

    @classmethod
    def augmented_svm(cls, X, labels, kernel, C, bias=True, **kw) -> "PointSpace":
        return cls(X, kind=AUGMENTED_SVM, labels=labels, kernel=kernel, C=C,
                   bias=bias, **kw)

    @classmethod
    def svdd(cls, X, kernel, **kw) -> "PointSpace":
        return cls(X, kind=SVDD, kernel=kernel, **kw)

    # geometry

    @property
    def n_points(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n_points

    def __repr__(self):
        extra = ""
        if self.kind != EXPLICIT:
            extra = f", kernel={self.kernel}"
        if self.kind == AUGMENTED_SVM:
            extra += f", C={self.C!r}, bias={self.bias}"
        return f"PointSpace({self.kind}, n={self.n_points}, dim={self.dim}{extra})"

    def check_ids(self, ids) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.size and (ids.dtype.kind not in "iu" or ids.min() < 0
                         or ids.max() >= self.n_points):
            raise ValueError(f"point ids out of range for a space of {self.n_points} points")
        return ids.astype(np.intp, copy=False)

    def _raw_block(self, rows, cols) -> np.ndarray:
        G = self.kernel(self.X[rows], self.X[cols])
        if self.kind == AUGMENTED_SVM:
            if self.bias:
                G += 1.0
            G *= np.outer(self.labels[rows], self.labels[cols])
            G += (rows[:, None] == cols[None, :]) / self.C
        return G

    def gram(self) -> np.ndarray:
        """Full Gram matrix over all points (cached when small enough)."""
        if self._gram is not None:
            return self._gram
        ids = np.arange(self.n_points)
        G = self._raw_block(ids, ids)
        G.setflags(write=False)
        if self._cache:
            self._gram = G
        return G

    def block(self, rows, cols) -> np.ndarray:
        """Dot products between two lists of point ids."""
        rows = self.check_ids(np.atleast_1d(rows))
        cols = self.check_ids(np.atleast_1d(cols))
        if self._cache:
            return self.gram()[np.ix_(rows, cols)]
        return self._raw_block(rows, cols)

    def dot(self, i: int, j: int) -> float:
        return float(self.block([i], [j])[0, 0])

    def diag(self, ids) -> np.ndarray:
        ids = self.check_ids(np.atleast_1d(ids))
        if self._cache:
            return np.diagonal(self.gram())[ids].copy()
        d = self.kernel.diag(self.X[ids])
        if self.kind == AUGMENTED_SVM:
            d = d + (1.0 if self.bias else 0.0) + 1.0 / self.C
        return d

    def dist2(self, i: int, ball) -> float:
        """Squared distance from point ``i`` to the center of ``ball``."""
        return float(self.dist2_many([i], ball)[0])

    def dist2_many(self, ids, ball) -> np.ndarray:
        ids = self.check_ids(np.atleast_1d(ids))
        sup = np.asarray(ball.support, dtype=np.intp)
        x = np.asarray(ball.weights, dtype=float)
        cross = self.block(ids, sup) @ x
        cc = x @ self.block(sup, sup) @ x
        return self.diag(ids) - 2.0 * cross + cc

    def center_norm(self, ball) -> float:
        sup = np.asarray(ball.support, dtype=np.intp)
        x = np.asarray(ball.weights, dtype=float)
        return float(np.sqrt(max(0.0, x @ self.block(sup, sup) @ x)))

    def constant_diagonal(self, tol: float = _DIAG_TOL) -> Optional[float]:
        """Return ``c`` when ``dot(i, i) == c`` for every point, else ``None``."""
        d = self.diag(np.arange(self.n_points))
        if np.ptp(d) <= tol * max(1.0, abs(d[0])):
            return float(d[0])
        return None

    def center(self, ball) -> np.ndarray:
        """Explicit center coordinates; only defined for explicit spaces."""
        if self.kind != EXPLICIT:
            raise ValueError("center coordinates are only available in explicit spaces")
        sup = np.asarray(ball.support, dtype=np.intp)
        return np.asarray(ball.weights) @ self.X[sup]

    def raw(self, i: int):
        """The ``(input vector, label)`` pair stored for point ``i``."""
        i = int(self.check_ids([i])[0])
        label = None if self.labels is None else float(self.labels[i])
        return self.X[i], label


def load_csv(path, labeled: Optional[bool] = None):
    """Read a dataset with one point per row.

    Feature columns come first, then an optional final label column with
    values -1/+1. A header row is skipped when its first row is not numeric.
    With ``labeled=None`` the last column is taken as labels iff every entry
    is -1 or +1 and there is more than one column.

    Returns
    -------
    X : ndarray of shape (n_points, n_features)
    y : ndarray of shape (n_points,) or None
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value in data rows ({exc})") from None
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError(f"{path}: ragged or empty dataset")
    if labeled is None:
        labeled = data.shape[1] > 1 and bool(np.all(np.isin(data[:, -1], (-1.0, 1.0))))
    if labeled:
        y = data[:, -1]
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError(f"{path}: labels must be -1 or +1")
        return data[:, :-1], y
    return data, None


def save_csv(path, X, y=None, header: bool = True) -> None:
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            names = [f"x{k}" for k in range(X.shape[1])]
            w.writerow(names + (["label"] if y is not None else []))
        for i, row in enumerate(X):
            vals = [repr(float(v)) for v in row]
            if y is not None:
                vals.append(str(int(y[i])))
            w.writerow(vals)


def explicit_augmented_features(X, labels, C, bias=True) -> np.ndarray:
    """Explicit ``[l_i p_i; l_i; e_i / sqrt(C)]`` rows for a linear kernel.

    Only meaningful for the linear kernel; used to cross-check the implicit
    augmented dot product.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n = X.shape[0]
    parts = [labels[:, None] * X]
    if bias:
        parts.append(labels[:, None])
    parts.append(np.eye(n) / np.sqrt(C))
    return np.hstack(parts)
