from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Any

from ..errors import ConfigError


class Family(str, enum.Enum):
    LR = "LR"
    NN1 = "NN1"
    SVM = "SVM"
    NB = "NB"
    DT = "DT"
    RF = "RF"
    KNN = "KNN"

    @classmethod
    def parse(cls, text: "str | Family") -> "Family":
        if isinstance(text, Family):
            return text
        key = text.strip().upper()
        aliases = {"1LNN": "NN1", "NN": "NN1", "MLP": "NN1"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown model family {text!r}") from None


ALL_FAMILIES = tuple(Family)
# Families trained by (sub)gradient descent on a flat parameter vector.
DIFFERENTIABLE = (Family.LR, Family.NN1, Family.SVM)


@dataclass(frozen=True)
class Hyperparams:
    family: Family
    learning_rate: float = 0.01
    batch_size: int = 16
    epochs: int = 30
    hidden_units: int = 8
    C: float = 1.0
    alpha: float = 1.0
    max_depth: int | None = None
    n_estimators: int = 100
    k: int = 5

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.hidden_units < 1:
            raise ConfigError("hidden_units must be >= 1")
        if self.C <= 0:
            raise ConfigError("C must be positive")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0 or None")
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")

    def replace(self, **changes) -> "Hyperparams":
        return dataclasses.replace(self, **changes)

    def relevant(self) -> dict[str, Any]:
        """The fields that influence this family's training, for reports and hashing."""
        keys = {
            Family.LR: ("learning_rate", "batch_size", "epochs"),
            Family.NN1: ("learning_rate", "batch_size", "epochs", "hidden_units"),
            Family.SVM: ("learning_rate", "batch_size", "epochs", "C"),
            Family.NB: ("alpha",),
            Family.DT: ("max_depth",),
            Family.RF: ("n_estimators", "max_depth"),
            Family.KNN: ("k",),
        }[self.family]
        return {k: getattr(self, k) for k in keys}


@dataclass(eq=False)
class TrainedModel:
    """A fitted classifier.

    ``payload`` holds the family-specific parameters: a flat ``theta`` vector
    for LR/NN1/SVM, class priors and likelihood tables for NB, node arrays
    for DT, a list of trees for RF, and the stored training set for KNN.
    """

    family: Family
    n_features: int
    payload: dict[str, Any]
    hp: Hyperparams | None = None
    meta: dict[str, Any] = field(default_factory=dict)
