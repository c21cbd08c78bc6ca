"""L2-regularized logistic regression and a linear hinge-loss SVM."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateTraining
from .base import class_weights


def _require_both_classes(y, name):
    if len(np.unique(y)) < 2:
        raise DegenerateTraining(f"{name} needs both classes in the training set")


# --- logistic regression -----------------------------------------------------

def logistic_loss(weights, X, y, l2=1e-2, sample_weight=None) -> float:
    """Mean weighted negative log-likelihood plus ``l2/2 * |w|^2``.

    ``weights[0]`` is the (unpenalized) intercept, ``weights[1:]`` the slopes.
    """
    s = np.ones(len(y)) if sample_weight is None else sample_weight
    z = weights[0] + X @ weights[1:]
    nll = np.logaddexp(0.0, z) - y * z
    return float(np.mean(s * nll) + 0.5 * l2 * np.dot(weights[1:], weights[1:]))


def loss_gradient(weights, X, y, l2=1e-2, sample_weight=None) -> np.ndarray:
    """Gradient of :func:`logistic_loss` with respect to ``weights``."""
    s = np.ones(len(y)) if sample_weight is None else sample_weight
    z = weights[0] + X @ weights[1:]
    r = s * (0.5 * (1.0 + np.tanh(0.5 * z)) - y) / len(y)
    g = np.empty_like(weights, dtype=float)
    g[0] = r.sum()
    g[1:] = X.T @ r + l2 * weights[1:]
    return g


def fit_logistic_regression(X, y, p, seed) -> dict:
    _require_both_classes(y, "logistic regression")
    s = class_weights(y, p["class_weight"])
    l2, tol = float(p["l2"]), float(p["tol"])
    w = np.zeros(X.shape[1] + 1)
    L = logistic_loss(w, X, y, l2, s)
    t = 1.0
    it = 0
    for it in range(1, int(p["max_iter"]) + 1):
        g = loss_gradient(w, X, y, l2, s)
        gg = float(g @ g)
        if np.sqrt(gg) <= tol:
            break
        # Armijo backtracking from twice the previous accepted step
        t *= 2.0
        while True:
            w_new = w - t * g
            L_new = logistic_loss(w_new, X, y, l2, s)
            if L_new <= L - 0.5 * t * gg or t < 1e-20:
                break
            t *= 0.5
        done = abs(L - L_new) <= tol * max(1.0, abs(L))
        w, L = w_new, L_new
        if done:
            break
    return {"weights": w, "iterations": it, "loss": L}


def decision_function_logistic(params, X) -> np.ndarray:
    w = params["weights"]
    return w[0] + X @ w[1:]


def predict_logistic_regression(params, X) -> np.ndarray:
    return (decision_function_logistic(params, X) > 0).astype(np.int64)


# --- linear SVM --------------------------------------------------------------

def svm_objective(w, b, X, y, C=1.0, sample_weight=None) -> float:
    """``|w|^2/2 + C * sum(hinge)`` with labels 0/1 mapped to -1/+1."""
    s = np.ones(len(y)) if sample_weight is None else sample_weight
    ys = 2.0 * y - 1.0
    hinge = np.maximum(0.0, 1.0 - ys * (X @ w + b))
    return float(0.5 * np.dot(w, w) + C * np.dot(s, hinge))


def fit_svm(X, y, p, seed) -> dict:
    """Full-batch subgradient descent with step ``step0 / t`` and suffix averaging.

    The objective is 1-strongly convex in ``w``, which is what the ``1/t``
    schedule relies on; ``w`` is kept inside the ball ``|w|^2 <= 2 C n``
    that contains the optimum. The returned iterate is the average over the
    second half of the run, or the best iterate seen if that is lower.
    """
    _require_both_classes(y, "svm")
    s = class_weights(y, p["class_weight"])
    C, step0 = float(p["C"]), float(p["step0"])
    T = int(p["max_iter"])
    n, d = X.shape
    ys = 2.0 * y - 1.0
    radius = np.sqrt(2.0 * C * s.sum())
    w, b = np.zeros(d), 0.0
    w_avg, b_avg, n_avg = np.zeros(d), 0.0, 0
    best = (svm_objective(w, b, X, y, C, s), w.copy(), b)
    for t in range(1, T + 1):
        active = ys * (X @ w + b) < 1.0
        coef = C * s[active] * ys[active]
        gw = w - X[active].T @ coef
        gb = -coef.sum()
        eta = step0 / t
        w = w - eta * gw
        b = b - eta * gb
        nw = np.linalg.norm(w)
        if nw > radius:
            w *= radius / nw
        J = svm_objective(w, b, X, y, C, s)
        if J < best[0]:
            best = (J, w.copy(), b)
        if t > T // 2:
            n_avg += 1
            w_avg += (w - w_avg) / n_avg
            b_avg += (b - b_avg) / n_avg
    J_avg = svm_objective(w_avg, b_avg, X, y, C, s)
    if best[0] < J_avg:
        J_avg, w_avg, b_avg = best
    return {"w": w_avg, "b": float(b_avg), "objective": float(J_avg)}


def predict_svm(params, X) -> np.ndarray:
    return (X @ params["w"] + params["b"] > 0).astype(np.int64)
