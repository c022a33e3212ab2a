"""Shapley-value feature attribution.

Coalitions are encoded as bitmasks: feature ``i`` is present in coalition
``S`` when bit ``i`` of ``S`` is set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dataset import TabularDataset
from .errors import ConfigError, ContractError, EnumerationLimitError, RankDeficiencyError
from .models import TrainedModel, decision_function, predict_labels

MAX_EXACT_FEATURES = 20
INSTANCE_MARGINAL = "instance-marginal"
MASKED_ACCURACY = "masked-accuracy"
# Upper bound on hybrid rows pushed through the model in one call.
_ROW_BUDGET = 250_000


def coalition_masks(p: int) -> np.ndarray:
    """All 2**p coalitions as a boolean matrix; row ``s`` encodes bitmask ``s``."""
    s = np.arange(2 ** p)[:, None]
    return ((s >> np.arange(p)) & 1).astype(bool)


class ValueFunction:
    """Coalition payoff ``f(S)`` built from a trained model.

    ``instance-marginal``: mean over background rows ``b`` of the model's
    decision value on the hybrid row taking features in ``S`` from the target
    instance and the rest from ``b``.

    ``masked-accuracy``: accuracy on the target test set after replacing
    every feature outside ``S`` by its background mean.
    """

    def __init__(self, model: TrainedModel, background, target, mode: str = INSTANCE_MARGINAL):
        if mode not in (INSTANCE_MARGINAL, MASKED_ACCURACY):
            raise ConfigError(f"unknown value-function mode {mode!r}")
        bg = background.X if isinstance(background, TabularDataset) else np.asarray(background, dtype=float)
        bg = np.atleast_2d(bg)
        if len(bg) == 0:
            raise ContractError("background set is empty")
        self.model = model
        self.mode = mode
        self.background = bg
        self.p = bg.shape[1]
        if mode == INSTANCE_MARGINAL:
            x = np.asarray(target, dtype=float)
            if x.shape != (self.p,):
                raise ContractError(f"target instance must have shape ({self.p},)")
            self.target = x
        else:
            if not isinstance(target, TabularDataset) or len(target) == 0:
                raise ContractError("masked-accuracy mode needs a non-empty test set")
            self.target = target
            self._fill = bg.mean(axis=0)
        self.calls = 0

    def __call__(self, coalition) -> float:
        mask = np.zeros(self.p, dtype=bool)
        if isinstance(coalition, np.ndarray) and coalition.dtype == bool:
            mask[:] = coalition
        else:
            mask[list(coalition)] = True
        return float(self.batch(mask[None, :])[0])

    def batch(self, masks: np.ndarray) -> np.ndarray:
        """Evaluate ``f`` for every row of a boolean coalition matrix."""
        masks = np.atleast_2d(np.asarray(masks, dtype=bool))
        self.calls += len(masks)
        if self.mode == MASKED_ACCURACY:
            X, y = self.target.X, self.target.y
            return np.array([
                np.mean(predict_labels(self.model, np.where(m, X, self._fill)) == y)
                for m in masks])
        B = len(self.background)
        out = np.empty(len(masks))
        step = max(1, _ROW_BUDGET // B)
        for start in range(0, len(masks), step):
            chunk = masks[start:start + step]
            hybrid = np.where(chunk[:, None, :], self.target[None, None, :],
                              self.background[None, :, :])
            vals = decision_function(self.model, hybrid.reshape(-1, self.p))
            out[start:start + step] = vals.reshape(len(chunk), B).mean(axis=1)
        return out


def _evaluate_all(vf, p):
    masks = coalition_masks(p)
    if hasattr(vf, "batch"):
        return np.asarray(vf.batch(masks), dtype=float)
    return np.array([float(vf(tuple(np.flatnonzero(m)))) for m in masks])


def shapley_weights(p: int) -> np.ndarray:
    """``|S|! (p - |S| - 1)! / p!`` for ``|S| = 0 .. p-1``."""
    return np.array([math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p)
                     for s in range(p)])


def exact_shapley(vf: Callable, p: int) -> np.ndarray:
    """Shapley values by full enumeration of the 2**p coalitions.

    ``vf`` is called with a tuple of feature indices, or, if it has a
    ``batch`` method, once with the full boolean coalition matrix. Each
    coalition is evaluated exactly once.
    """
    if p < 1:
        raise ContractError("need at least one feature")
    if p > MAX_EXACT_FEATURES:
        raise EnumerationLimitError(
            f"exact enumeration over {p} features exceeds the limit of {MAX_EXACT_FEATURES}")
    values = _evaluate_all(vf, p)
    sizes = np.array([bin(s).count("1") for s in range(2 ** p)])
    w = shapley_weights(p)
    all_s = np.arange(2 ** p)
    phi = np.empty(p)
    for i in range(p):
        without = all_s[(all_s >> i) & 1 == 0]
        phi[i] = np.dot(w[sizes[without]], values[without | (1 << i)] - values[without])
    return phi


def kernel_weight(M: int, k: int) -> float:
    """Kernel SHAP weight ``(M-1) / (C(M,k) k (M-k))`` of a size-``k`` coalition.

    The empty and full coalitions carry infinite weight; they are enforced as
    constraints by :func:`kernel_shap` and rejected here.
    """
    if not 1 <= k <= M - 1:
        raise ContractError(
            f"coalition size {k} of {M} has infinite kernel weight; handle it as a constraint")
    return (M - 1) / (math.comb(M, k) * k * (M - k))


def _proper_coalitions(p):
    masks = coalition_masks(p)[1:-1]
    sizes = masks.sum(axis=1)
    return masks, np.array([kernel_weight(p, int(k)) for k in sizes])


def _sample_coalitions(p, nsamples, rng):
    ks = np.arange(1, p)
    size_prob = (p - 1) / (ks * (p - ks))
    size_prob /= size_prob.sum()
    sizes = rng.choice(ks, size=nsamples, p=size_prob)
    masks = np.zeros((nsamples, p), dtype=bool)
    for row, k in enumerate(sizes):
        masks[row, rng.choice(p, size=k, replace=False)] = True
    return masks, np.ones(nsamples)


def kernel_shap(vf: Callable, p: int, nsamples: int, seed: int = 0,
                feature_names: Sequence[str] | None = None) -> np.ndarray:
    """Kernel SHAP estimate of the Shapley values.

    When ``nsamples`` covers all ``2**p - 2`` proper coalitions they are
    enumerated with their exact kernel weights; otherwise coalition sizes
    are drawn with probability proportional to total kernel mass and members
    uniformly within a size. The additive surrogate is fit by weighted least
    squares with ``sum(phi) = f(full) - f(empty)`` imposed exactly.
    """
    if p < 2:
        if p == 1:
            return np.array([_call(vf, p, [True]) - _call(vf, p, [False])])
        raise ContractError("need at least one feature")
    if nsamples < p + 2:
        raise ContractError(f"nsamples must be >= p + 2 = {p + 2}")
    if nsamples >= 2 ** p - 2:
        masks, w = _proper_coalitions(p)
    else:
        masks, w = _sample_coalitions(p, nsamples, np.random.default_rng(seed))
    f_empty = _call(vf, p, np.zeros(p, dtype=bool))
    f_full = _call(vf, p, np.ones(p, dtype=bool))
    fz = (np.asarray(vf.batch(masks), dtype=float) if hasattr(vf, "batch")
          else np.array([float(vf(tuple(np.flatnonzero(m)))) for m in masks]))
    total = f_full - f_empty
    Z = masks.astype(float)
    # Substitute phi_last = total - sum(others) to impose efficiency exactly.
    A = Z[:, :-1] - Z[:, -1:]
    b = fz - f_empty - Z[:, -1] * total
    sw = np.sqrt(w)
    Aw, bw = A * sw[:, None], b * sw
    _, sv, vt = np.linalg.svd(Aw, full_matrices=True)
    tol = sv.max(initial=0.0) * max(Aw.shape) * np.finfo(float).eps
    rank = int((sv > tol).sum())
    if rank < p - 1:
        null = vt[rank:]
        bad = sorted(set(np.flatnonzero(np.abs(null).max(axis=0) > 1e-8)) | {p - 1})
        names = [feature_names[j] if feature_names else f"feature {j}" for j in bad]
        raise RankDeficiencyError(
            f"sampled coalitions do not separate features {names}; increase nsamples", names)
    head = np.linalg.lstsq(Aw, bw, rcond=None)[0]
    return np.append(head, total - head.sum())


def _call(vf, p, mask):
    mask = np.asarray(mask, dtype=bool)
    if hasattr(vf, "batch"):
        return float(vf.batch(mask[None, :])[0])
    return float(vf(tuple(np.flatnonzero(mask))))


def rank_features(mean_abs: np.ndarray) -> np.ndarray:
    """Rank 1 = largest value; exact ties keep feature order."""
    order = sorted(range(len(mean_abs)), key=lambda j: (-mean_abs[j], j))
    ranks = np.empty(len(mean_abs), dtype=np.int64)
    ranks[order] = np.arange(1, len(mean_abs) + 1)
    return ranks


@dataclass
class ShapReport:
    feature_names: tuple[str, ...]
    phi: np.ndarray
    mean_abs: np.ndarray
    ranks: np.ndarray
    label: str = ""

    def top(self, n: int) -> list[str]:
        order = np.argsort(self.ranks)
        return [self.feature_names[j] for j in order[:n]]

    def rank_of(self, name: str) -> int:
        return int(self.ranks[self.feature_names.index(name)])


def sample_background(train: TabularDataset, size: int = 100, seed: int = 0) -> np.ndarray:
    """``size`` training rows drawn without replacement (all rows if fewer)."""
    if size >= len(train):
        return train.X.copy()
    idx = np.sort(np.random.default_rng(seed).choice(len(train), size=size, replace=False))
    return train.X[idx]


def mean_abs_shap(model: TrainedModel, test: TabularDataset, background,
                  label: str = "") -> ShapReport:
    """Exact per-instance Shapley values over ``test`` and their mean magnitudes."""
    p = test.n_features
    phi = np.array([exact_shapley(ValueFunction(model, background, x), p) for x in test.X])
    phi = phi.reshape(len(test), p)
    mean_abs = np.abs(phi).mean(axis=0)
    return ShapReport(test.schema.names, phi, mean_abs, rank_features(mean_abs), label)
