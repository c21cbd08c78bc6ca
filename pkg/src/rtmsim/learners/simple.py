"""k-nearest neighbours and Gaussian naive Bayes."""

from __future__ import annotations

import numpy as np


# --- k-nearest neighbours ----------------------------------------------------

def fit_knn(X, y, p, seed) -> dict:
    return {"X": X.copy(), "y": y.copy(), "k": int(p["k"])}


def knn_neighbors(train_X, X, k) -> np.ndarray:
    """Indices of the ``k`` nearest training rows; distance ties go to the lower index."""
    d2 = ((X[:, None, :] - train_X[None, :, :]) ** 2).sum(axis=2)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def predict_knn(params, X) -> np.ndarray:
    train_X, train_y = params["X"], params["y"]
    k = min(int(params["k"]), len(train_y))
    votes = train_y[knn_neighbors(train_X, X, k)].sum(axis=1)
    # strict majority for cancer; a tied vote goes to healthy
    return (2 * votes > k).astype(np.int64)


# --- Gaussian naive Bayes ----------------------------------------------------

def fit_naive_bayes(X, y, p, seed) -> dict:
    """Per-class means and variances (floored), with empirical priors.

    A class absent from the training set gets prior zero, so a single-class
    training set predicts that class everywhere.
    """
    d = X.shape[1]
    means = np.zeros((2, d))
    var = np.ones((2, d))
    prior = np.zeros(2)
    for c in (0, 1):
        Xc = X[y == c]
        prior[c] = len(Xc) / len(X)
        if len(Xc):
            means[c] = Xc.mean(axis=0)
            var[c] = Xc.var(axis=0)
    if p["fixed_variance"] is not None:
        var[:] = float(p["fixed_variance"])
    var = np.maximum(var, float(p["var_floor"]))
    return {"means": means, "var": var, "prior": prior}


def log_posterior_nb(params, X) -> np.ndarray:
    means, var, prior = params["means"], params["var"], params["prior"]
    out = np.empty((len(X), 2))
    for c in (0, 1):
        with np.errstate(divide="ignore"):
            lp = np.log(prior[c])
        out[:, c] = lp - 0.5 * np.sum(np.log(2 * np.pi * var[c])) \
            - 0.5 * np.sum((X - means[c]) ** 2 / var[c], axis=1)
    return out


def predict_naive_bayes(params, X) -> np.ndarray:
    lp = log_posterior_nb(params, X)
    return (lp[:, 1] > lp[:, 0]).astype(np.int64)
