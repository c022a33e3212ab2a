"""Centralized and federated heart-disease classification with Shapley attribution."""
from .dataset import (CENTERS, Center, FeatureSchema, RawRecord, StandardizationStats,
                      TabularDataset, UCI_SCHEMA, load_uci, parse_uci_file,
                      partition_by_center, preprocess, split_train_test, standardize)
from .errors import (ConfigError, ContractError, EnumerationLimitError, HeartFLError,
                     ParseError, RankDeficiencyError, SplitError, UnsupportedFamilyError)
from .models import (Family, Hyperparams, TrainedModel, decision_value, evaluate,
                     grid_search, predict, train_model)

__version__ = "0.1.0"
