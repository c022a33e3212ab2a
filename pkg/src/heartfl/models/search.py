"""Hyperparameter grids and seed-averaged grid search.

The grids discretize the tuning ranges (learning rate 0.001-0.1, batch size
4-64, hidden units 4-16, C 0.01-10, alpha 0.1-10, depth none-10,
100-500 trees, k 1-10).
"""
from __future__ import annotations

import itertools
from typing import Mapping, Sequence

import numpy as np

from ..dataset import TabularDataset
from ..errors import ConfigError
from .api import holdout_accuracy
from .base import Family, Hyperparams

_SGD_GRID = {"learning_rate": [0.001, 0.01, 0.1], "batch_size": [4, 16, 64]}

DEFAULT_GRIDS: dict[Family, dict[str, list]] = {
    Family.LR: dict(_SGD_GRID),
    Family.NN1: {**_SGD_GRID, "hidden_units": [4, 8, 16]},
    Family.SVM: {**_SGD_GRID, "C": [0.01, 0.1, 1.0, 10.0]},
    Family.NB: {"alpha": [0.1, 0.5, 1.0, 2.0, 5.0, 10.0]},
    Family.DT: {"max_depth": [None, 2, 3, 4, 5, 6, 7, 8, 9, 10]},
    Family.RF: {"n_estimators": [100, 200, 500]},
    Family.KNN: {"k": list(range(1, 11))},
}

# Starting configuration per family when no search is run.
DEFAULT_HYPERPARAMS: dict[Family, Hyperparams] = {
    Family.LR: Hyperparams(Family.LR, learning_rate=0.01, batch_size=16),
    Family.NN1: Hyperparams(Family.NN1, learning_rate=0.01, batch_size=16, hidden_units=8),
    Family.SVM: Hyperparams(Family.SVM, learning_rate=0.01, batch_size=16, C=1.0),
    Family.NB: Hyperparams(Family.NB, alpha=1.0),
    Family.DT: Hyperparams(Family.DT, max_depth=4),
    Family.RF: Hyperparams(Family.RF, n_estimators=100),
    Family.KNN: Hyperparams(Family.KNN, k=5),
}

FLAMBY_LR = Hyperparams(Family.LR, learning_rate=0.001, batch_size=4, epochs=30)


def expand_grid(family: Family, grid: Mapping[str, Sequence],
                base: Hyperparams | None = None) -> list[Hyperparams]:
    """Cartesian product of ``grid`` in key order, last key varying fastest."""
    family = Family.parse(family)
    if not grid:
        raise ConfigError("grid is empty")
    base = base or DEFAULT_HYPERPARAMS[family]
    keys = list(grid)
    for k in keys:
        if not hasattr(base, k) or k == "family":
            raise ConfigError(f"unknown hyperparameter {k!r}")
        if not len(grid[k]):
            raise ConfigError(f"grid for {k!r} has no values")
    return [base.replace(**dict(zip(keys, combo)))
            for combo in itertools.product(*(grid[k] for k in keys))]


def score_grid(family: Family, grid: Mapping[str, Sequence], seeds: Sequence[int],
               ds: TabularDataset, train_frac: float = 0.66,
               base: Hyperparams | None = None) -> list[tuple[Hyperparams, np.ndarray]]:
    """Per-seed holdout accuracies for every grid point, in enumeration order."""
    if not seeds:
        raise ConfigError("at least one seed is required")
    return [(hp, np.array([holdout_accuracy(hp, ds, s, train_frac) for s in seeds]))
            for hp in expand_grid(family, grid, base)]


def grid_search(family: Family, grid: Mapping[str, Sequence], seeds: Sequence[int],
                ds: TabularDataset, train_frac: float = 0.66,
                base: Hyperparams | None = None) -> tuple[Hyperparams, float]:
    """Pick the grid point with the best seed-averaged holdout accuracy.

    Each seed drives both the train/test split and training. Ties keep the
    earliest grid point.
    """
    best_hp, best = None, -np.inf
    for hp, accs in score_grid(family, grid, seeds, ds, train_frac, base):
        if accs.mean() > best:
            best_hp, best = hp, float(accs.mean())
    return best_hp, best
