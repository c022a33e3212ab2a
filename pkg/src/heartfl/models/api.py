from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..dataset import TabularDataset, split_train_test, standardize
from ..errors import ContractError
from . import knn, naive_bayes, sgd, trees
from .base import DIFFERENTIABLE, Family, Hyperparams, TrainedModel


def train_model(hp: Hyperparams, train: TabularDataset, seed: int) -> TrainedModel:
    """Fit ``hp.family`` on ``train``; a pure function of ``(hp, train, seed)``.

    A single-class training set is allowed and yields a degenerate model.
    """
    if len(train) == 0:
        raise ContractError("training set is empty")
    fam = hp.family
    X, y = train.X, train.y
    p = X.shape[1]
    if fam in DIFFERENTIABLE:
        payload = {"theta": sgd.fit_sgd(fam, X, y, hp, seed)}
    elif fam is Family.NB:
        payload = naive_bayes.fit(X, y, train.schema.kinds, hp.alpha)
    elif fam is Family.DT:
        payload = trees.build_tree(X, y, hp.max_depth)
    elif fam is Family.RF:
        payload = trees.build_forest(X, y, hp.n_estimators, hp.max_depth, seed)
    else:
        payload = knn.fit(X, y, hp.k)
    return TrainedModel(fam, p, payload, hp)


def from_params(family: Family, theta: np.ndarray, n_features: int,
                hp: Hyperparams | None = None) -> TrainedModel:
    """Wrap a raw LR/NN1/SVM parameter vector (e.g. a federated global model)."""
    family = Family.parse(family)
    if family not in DIFFERENTIABLE:
        raise ContractError(f"{family.value} has no parameter vector")
    return TrainedModel(family, n_features, {"theta": np.asarray(theta, dtype=float)}, hp)


def decision_function(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`decision_value` over the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.n_features:
        raise ContractError(f"expected {m.n_features} features, got {X.shape[1]}")
    fam = m.family
    if fam in DIFFERENTIABLE:
        s = sgd.scores(fam, m.payload["theta"], X)
        return s if fam is Family.SVM else expit(s)
    if fam is Family.NB:
        return naive_bayes.proba(m.payload, X)
    if fam is Family.DT:
        return trees.tree_proba(m.payload, X)
    if fam is Family.RF:
        return trees.forest_proba(m.payload, X)
    return knn.proba(m.payload, X)


def decision_value(m: TrainedModel, x) -> float:
    """Class-1 probability, or the signed margin for SVM."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractError("decision_value takes a single feature vector")
    return float(decision_function(m, x[None, :])[0])


def labels_from_decision(family: Family, values: np.ndarray) -> np.ndarray:
    cut = 0.0 if family is Family.SVM else 0.5
    return (np.asarray(values) > cut).astype(np.int64)


def predict_labels(m: TrainedModel, X) -> np.ndarray:
    return labels_from_decision(m.family, decision_function(m, X))


def predict(m: TrainedModel, x) -> int:
    """0/1 label; a value exactly on the threshold resolves to 0."""
    return int(labels_from_decision(m.family, np.array([decision_value(m, x)]))[0])


def evaluate(m: TrainedModel, test: TabularDataset) -> float:
    if len(test) == 0:
        raise ContractError("test set is empty")
    return float(np.mean(predict_labels(m, test.X) == test.y))


def holdout_accuracy(hp: Hyperparams, ds: TabularDataset, seed: int,
                     train_frac: float = 0.66) -> float:
    """One pass of the local-classifier protocol: split, standardize, train, score."""
    train, test = split_train_test(ds, seed, train_frac)
    train, test, _ = standardize(train, test)
    return evaluate(train_model(hp, train, seed), test)
