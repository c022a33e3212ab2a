"""
Four hospitals, four aggregation rules
======================================

Each center keeps its own split and normalization. Clients take a fixed number
of mini-batch steps per round and the server combines their moves with FedAvg,
FedAdam, FedYogi or SCAFFOLD.
"""
import sys

from heartfl.dataset import FEATURE_SETS, load_uci, preprocess
from heartfl.federation import FedConfig, Strategy, run_federated
from heartfl.models import DEFAULT_HYPERPARAMS, Family

records = load_uci(sys.argv[1] if len(sys.argv) > 1 else None)
ds = preprocess(records, subset=FEATURE_SETS["table4"])

for strategy in Strategy:
    cfg = FedConfig(Family.SVM, DEFAULT_HYPERPARAMS[Family.SVM], strategy, seeds=range(3))
    summary = run_federated(cfg, ds)
    per_center = summary.runs[0].accuracies
    print(f"{strategy.label:>8}  {summary.mean:.3f} ± {summary.std:.3f}  seed 0:",
          {c.value: round(a, 3) for c, a in per_center.items()})
