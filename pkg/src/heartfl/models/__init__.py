"""From-scratch binary classifiers with one train/predict/evaluate interface."""
from .api import (decision_function, decision_value, evaluate, from_params,
                  holdout_accuracy, labels_from_decision, predict, predict_labels,
                  train_model)
from .base import ALL_FAMILIES, DIFFERENTIABLE, Family, Hyperparams, TrainedModel
from .search import (DEFAULT_GRIDS, DEFAULT_HYPERPARAMS, FLAMBY_LR, expand_grid,
                     grid_search, score_grid)
from .sgd import gradient, init_params, loss_and_grad, n_params

__all__ = [
    "ALL_FAMILIES", "DEFAULT_GRIDS", "DEFAULT_HYPERPARAMS", "DIFFERENTIABLE", "FLAMBY_LR",
    "Family", "Hyperparams", "TrainedModel", "decision_function", "decision_value",
    "evaluate", "expand_grid", "from_params", "gradient", "grid_search",
    "holdout_accuracy", "init_params", "labels_from_decision", "loss_and_grad",
    "n_params", "predict", "predict_labels", "score_grid", "train_model",
]
