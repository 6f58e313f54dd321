import json

import cvxpy as cp
import numpy as np
import pytest

from coreset_consensus.exceptions import InvalidProblemError
from coreset_consensus.meb import meb_oracle, solve_meb
from coreset_consensus.reductions import (Classifier, SvmProblem, extract_classifier,
                                          oneclass_to_meb, predict, svdd_score, svdd_to_meb,
                                          svm2norm_to_meb)
from coreset_consensus.space import Kernel, PointSpace, explicit_augmented_features


def unit_rows(rng, n, d):
    X = rng.normal(size=(n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def labeled(rng, n=20, d=3):
    X = unit_rows(rng, n, d)
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=n) > 0, 1.0, -1.0)
    return X, y


def primal_reference(X, y, C):
    """Linear 2-norm soft-margin primal, solved directly as a QP."""
    n, d = X.shape
    w, b, rho, xi = cp.Variable(d), cp.Variable(), cp.Variable(), cp.Variable(n)
    obj = cp.Minimize(cp.sum_squares(w) + b ** 2 - 2 * rho + C * cp.sum_squares(xi))
    cons = [cp.multiply(y, X @ w + b) >= rho - xi]
    cp.Problem(obj, cons).solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                                tol_feas=1e-12)
    return w.value, float(b.value), float(rho.value), xi.value


def test_diagonals():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 2))
    y = np.array([1, -1, 1, -1, 1, 1.0])
    sp = svm2norm_to_meb(SvmProblem(X, y, Kernel("gaussian", 1.0), C=1.0))
    np.testing.assert_allclose(sp.diag(range(6)), 3.0, rtol=0, atol=1e-15)
    Xn = unit_rows(rng, 6, 3)
    sp = svm2norm_to_meb(SvmProblem(Xn, y, Kernel("linear"), C=4.0))
    np.testing.assert_allclose(sp.diag(range(6)), 1 + 1 + 0.25, atol=1e-12)
    np.testing.assert_allclose(svdd_to_meb(X, Kernel("gaussian", 2.0)).diag(range(6)), 1.0)
    np.testing.assert_allclose(oneclass_to_meb(X, Kernel("gaussian", 2.0), 5.0).diag(range(6)), 1.2)


def test_problem_validation():
    with pytest.raises(InvalidProblemError):
        SvmProblem(np.zeros((3, 2)), [1, -1], Kernel("linear"), 1.0)
    with pytest.raises(InvalidProblemError):
        SvmProblem(np.zeros((2, 2)), [1, 2], Kernel("linear"), 1.0)
    with pytest.raises(InvalidProblemError):
        SvmProblem(np.zeros((2, 2)), [1, -1], Kernel("linear"), 0.0)
    with pytest.raises(InvalidProblemError):
        svm2norm_to_meb(SvmProblem([[1.0, 0], [3.0, 0]], [1, -1], Kernel("linear"), 1.0))


def test_meb_objective_equals_explicit_features():
    rng = np.random.default_rng(1)
    X, y = labeled(rng, 12, 3)
    sp = svm2norm_to_meb(SvmProblem(X, y, Kernel("linear"), C=2.0))
    Phi = explicit_augmented_features(X, y, 2.0)
    a = solve_meb(sp, range(12))
    b = meb_oracle(PointSpace.explicit(Phi), range(12))
    assert a.r2 == pytest.approx(b.r2, rel=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_recovery_matches_primal_qp(seed):
    rng = np.random.default_rng(seed)
    X, y = labeled(rng, 16, 3)
    C = 5.0
    problem = SvmProblem(X, y, Kernel("linear"), C)
    clf = extract_classifier(problem, meb_oracle(svm2norm_to_meb(problem), range(16)))
    w_ref, b_ref, rho_ref, xi_ref = primal_reference(X, y, C)
    # the primal is the dual scaled by the optimal multiplier sum, so compare normalized
    scale = rho_ref / clf.rho
    w = (clf.weights * clf.labels) @ clf.inputs
    np.testing.assert_allclose(w * scale, w_ref, atol=1e-6)
    assert clf.b * scale == pytest.approx(b_ref, abs=1e-6)
    xi = np.zeros(16)
    xi[clf.ids] = clf.slacks()
    np.testing.assert_allclose(xi * scale, xi_ref, atol=1e-6)


def test_kkt_slack_identity():
    rng = np.random.default_rng(7)
    X, y = labeled(rng, 25, 4)
    problem = SvmProblem(X, y, Kernel("linear"), 3.0)
    clf = extract_classifier(problem, solve_meb(svm2norm_to_meb(problem), range(25)))
    f = clf.decision_function(clf.inputs)
    np.testing.assert_allclose(clf.labels * f, clf.rho - clf.slacks(), atol=1e-6)


def test_symmetric_pair():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    problem = SvmProblem(X, [1, -1], Kernel("linear"), 10.0)
    clf = extract_classifier(problem, solve_meb(svm2norm_to_meb(problem), [0, 1]))
    np.testing.assert_allclose(clf.weights, [0.5, 0.5], atol=1e-9)
    assert clf.b == pytest.approx(0.0, abs=1e-9)
    assert predict(clf, [0.3, 5.0]) > 0 > predict(clf, [-0.3, 5.0])
    assert predict(clf, [0.0, 1.0]) == pytest.approx(0.0, abs=1e-9)


def test_label_flip_antisymmetry():
    rng = np.random.default_rng(3)
    X, y = labeled(rng, 14, 2)
    k = Kernel("gaussian", 0.8)
    P = rng.normal(size=(9, 2))
    f = [extract_classifier(p, solve_meb(svm2norm_to_meb(p), range(14))).decision_function(P)
         for p in (SvmProblem(X, y, k, 2.0), SvmProblem(X, -y, k, 2.0))]
    np.testing.assert_allclose(f[0], -f[1], atol=1e-7)


def test_dimension_mismatch():
    problem = SvmProblem([[1.0, 0.0], [-1.0, 0.0]], [1, -1], Kernel("linear"), 1.0)
    clf = extract_classifier(problem, solve_meb(svm2norm_to_meb(problem), [0, 1]))
    with pytest.raises(ValueError):
        clf.decision_function([[1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        predict(clf, [[1.0, 2.0]])


def test_extract_needs_augmented_space():
    sp = svdd_to_meb(np.eye(3), Kernel("gaussian", 1.0))
    with pytest.raises(InvalidProblemError):
        extract_classifier(sp, solve_meb(sp, range(3)))


def test_model_json_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    X, y = labeled(rng, 12, 2)
    problem = SvmProblem(X, y, Kernel("gaussian", 0.5), 10.0)
    clf = extract_classifier(problem, solve_meb(svm2norm_to_meb(problem), range(12)))
    path = tmp_path / "model.json"
    clf.save(path)
    back = Classifier.from_dict(json.loads(path.read_text()))
    P = rng.normal(size=(5, 2))
    np.testing.assert_array_equal(back.decision_function(P), clf.decision_function(P))
    assert back.kernel == clf.kernel and back.rho == clf.rho


def test_svdd_score_matches_space_distance():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(15, 2))
    sp = svdd_to_meb(X, Kernel("gaussian", 0.7))
    ball = solve_meb(sp, range(15))
    np.testing.assert_allclose(svdd_score(sp, ball, X), sp.dist2_many(range(15), ball), atol=1e-12)


def test_svdd_linear_is_plain_meb():
    X = unit_rows(np.random.default_rng(4), 10, 3)
    ball = solve_meb(svdd_to_meb(X, Kernel("linear")), range(10))
    center = ball.weights @ X[list(ball.support)]
    d2 = ((X - center) ** 2).sum(axis=1)
    assert d2.max() == pytest.approx(ball.r2, rel=1e-8)


def test_oneclass_has_no_bias():
    X = np.random.default_rng(2).normal(size=(10, 2))
    sp = oneclass_to_meb(X, Kernel("gaussian", 1.0), 5.0)
    clf = extract_classifier(sp, solve_meb(sp, range(10)))
    assert not clf.bias and clf.b == 0.0
    f = clf.decision_function(clf.inputs)
    np.testing.assert_allclose(f, clf.rho - clf.slacks(), atol=1e-6)
