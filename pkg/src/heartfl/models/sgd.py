"""Logistic regression, linear SVM and a one-hidden-layer network.

All three share one flat parameter vector ``theta`` so that federated
aggregation can treat them uniformly:

* LR, SVM: ``[w_1 .. w_p, b]``
* NN1:     ``[W1 (h x p, row-major), b1 (h), w2 (h), b2]``

Losses are means over the mini-batch. The SVM batch objective is
``||w||^2 / (2 n) + C * mean_batch(hinge)``, an unbiased per-sample scaling
of ``||w||^2 / 2 + C * sum(hinge)`` over a training set of ``n`` rows.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import UnsupportedFamilyError
from .base import DIFFERENTIABLE, Family, Hyperparams


def n_params(family: Family, p: int, hidden: int = 8) -> int:
    if family in (Family.LR, Family.SVM):
        return p + 1
    if family is Family.NN1:
        return hidden * p + 2 * hidden + 1
    raise UnsupportedFamilyError(f"{family.value} has no parameter vector")


def _check(family):
    if family not in DIFFERENTIABLE:
        raise UnsupportedFamilyError(
            f"{family.value} is not trained by gradient descent")


def init_params(family: Family, p: int, hp: Hyperparams, rng: np.random.Generator) -> np.ndarray:
    """Zeros for the linear models; He-scaled Gaussian input layer for NN1."""
    _check(family)
    if family is not Family.NN1:
        return np.zeros(p + 1)
    h = hp.hidden_units
    W1 = rng.normal(0.0, np.sqrt(2.0 / p), size=(h, p))
    w2 = rng.normal(0.0, np.sqrt(1.0 / h), size=h)
    return np.concatenate([W1.ravel(), np.zeros(h), w2, [0.0]])


def _unpack_nn(theta, p, h):
    W1 = theta[: h * p].reshape(h, p)
    b1 = theta[h * p: h * p + h]
    w2 = theta[h * p + h: h * p + 2 * h]
    b2 = theta[-1]
    return W1, b1, w2, b2


def hidden_size(theta: np.ndarray, p: int) -> int:
    return (len(theta) - 1) // (p + 2)


def svm_targets(y: np.ndarray) -> np.ndarray:
    """Map {0, 1} labels to {-1, +1}; labels already in {-1, +1} pass through."""
    y = np.asarray(y)
    return np.where(y > 0, 1.0, -1.0)


def scores(family: Family, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Raw model output: logit for LR/NN1, margin for SVM."""
    _check(family)
    X = np.atleast_2d(X)
    p = X.shape[1]
    if family is Family.NN1:
        W1, b1, w2, b2 = _unpack_nn(theta, p, hidden_size(theta, p))
        return np.maximum(X @ W1.T + b1, 0.0) @ w2 + b2
    return X @ theta[:-1] + theta[-1]


def loss_and_grad(family: Family, theta: np.ndarray, X: np.ndarray, y: np.ndarray,
                  C: float = 1.0, n_total: int | None = None):
    """Mini-batch objective and its (sub)gradient with respect to ``theta``.

    ``y`` is in {0, 1}; the SVM maps it internally. ``n_total`` is the size of
    the full training set and only scales the SVM regularizer.
    """
    _check(family)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    m, p = X.shape
    if family is Family.LR:
        z = X @ theta[:-1] + theta[-1]
        loss = np.mean(np.logaddexp(0.0, z) - y * z)
        r = (expit(z) - y) / m
        return loss, np.concatenate([X.T @ r, [r.sum()]])
    if family is Family.SVM:
        n_total = n_total or m
        t = svm_targets(y)
        w = theta[:-1]
        margin = t * (X @ w + theta[-1])
        slack = 1.0 - margin
        loss = w @ w / (2 * n_total) + C * np.mean(np.maximum(slack, 0.0))
        active = (slack > 0).astype(float)
        coef = -C * active * t / m
        return loss, np.concatenate([w / n_total + X.T @ coef, [coef.sum()]])
    h = hidden_size(theta, p)
    W1, b1, w2, b2 = _unpack_nn(theta, p, h)
    pre = X @ W1.T + b1
    act = np.maximum(pre, 0.0)
    z = act @ w2 + b2
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    dz = (expit(z) - y) / m
    dpre = np.outer(dz, w2) * (pre > 0)
    grad = np.concatenate([(dpre.T @ X).ravel(), dpre.sum(axis=0), act.T @ dz, [dz.sum()]])
    return loss, grad


def gradient(family, theta, X, y, C=1.0, n_total=None) -> np.ndarray:
    return loss_and_grad(family, theta, X, y, C=C, n_total=n_total)[1]


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of index batches: a fresh permutation per epoch, last partial batch kept."""
    while True:
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield perm[start:start + batch_size]


def fit_sgd(family: Family, X: np.ndarray, y: np.ndarray, hp: Hyperparams,
            seed: int, theta0: np.ndarray | None = None) -> np.ndarray:
    """Train for ``hp.epochs`` epochs of fixed-step mini-batch SGD; returns ``theta``."""
    family = Family.parse(family)
    _check(family)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n, p = X.shape
    rng = np.random.default_rng(seed)
    theta = init_params(family, p, hp, rng) if theta0 is None else np.array(theta0, dtype=float)
    batches = minibatches(n, hp.batch_size, rng)
    steps = hp.epochs * -(-n // hp.batch_size)
    for _ in range(steps):
        idx = next(batches)
        theta -= hp.learning_rate * gradient(family, theta, X[idx], y[idx], C=hp.C, n_total=n)
    return theta
