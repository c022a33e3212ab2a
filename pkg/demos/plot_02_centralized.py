"""
Pooled training of every model family
=====================================

Trains each classifier on the pooled data over a few seeds and prints mean
accuracy. The full ten-seed tuned run is ``bench centralized --tune``.
"""
import sys

import numpy as np

from heartfl.dataset import FEATURE_SETS, load_uci, preprocess
from heartfl.models import ALL_FAMILIES, DEFAULT_HYPERPARAMS, holdout_accuracy

records = load_uci(sys.argv[1] if len(sys.argv) > 1 else None)
ds = preprocess(records, subset=FEATURE_SETS["table4"])
seeds = range(3)

for fam in ALL_FAMILIES:
    hp = DEFAULT_HYPERPARAMS[fam]
    accs = [holdout_accuracy(hp, ds, s) for s in seeds]
    print(f"{fam.value:>4}  {np.mean(accs):.3f} ± {np.std(accs):.3f}   {hp.relevant()}")
