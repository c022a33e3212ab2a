"""Mixed Naive Bayes: Gaussian likelihoods for continuous features,
Laplace-smoothed frequency tables for categorical and binary ones."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..dataset import Kind

VAR_FLOOR = 1e-9


def fit(X, y, kinds, alpha=1.0):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    counts = np.array([(y == 0).sum(), (y == 1).sum()], dtype=float)
    with np.errstate(divide="ignore"):
        log_prior = np.log(counts / counts.sum())
    features = []
    for j, kind in enumerate(kinds):
        col = X[:, j]
        if kind is Kind.CONTINUOUS:
            mu = np.zeros(2)
            var = np.ones(2)
            for c in (0, 1):
                if counts[c]:
                    vals = col[y == c]
                    mu[c] = vals.mean()
                    var[c] = max(vals.var(), VAR_FLOOR)
            features.append(("gauss", mu, var))
        else:
            cats = np.unique(col)
            # One extra slot for values never seen in training.
            table = np.zeros((2, len(cats) + 1))
            for c in (0, 1):
                hits = np.array([(col[y == c] == v).sum() for v in cats] + [0], dtype=float)
                table[c] = np.log((hits + alpha) / (counts[c] + alpha * (len(cats) + 1)))
            features.append(("table", cats, table))
    return {"log_prior": log_prior, "features": features}


def _log_likelihood(payload, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ll = np.tile(payload["log_prior"], (len(X), 1))
    for j, (kind, a, b) in enumerate(payload["features"]):
        col = X[:, j]
        if kind == "gauss":
            mu, var = a, b
            ll += -0.5 * (np.log(2 * np.pi * var)[None, :]
                          + (col[:, None] - mu[None, :]) ** 2 / var[None, :])
        else:
            cats, table = a, b
            pos = np.searchsorted(cats, col)
            pos = np.minimum(pos, len(cats) - 1)
            seen = cats[pos] == col
            slot = np.where(seen, pos, len(cats))
            ll += table[:, slot].T
    return ll


def proba(payload, X) -> np.ndarray:
    """Posterior probability of class 1."""
    ll = _log_likelihood(payload, X)
    # A class absent from training has log-prior -inf, which expit maps to 0 or 1.
    return expit(ll[:, 1] - ll[:, 0])
