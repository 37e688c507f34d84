"""Bootstrap bags and the out-of-bag fraction.

Each sub-model trains on a bag drawn with replacement; the samples never
drawn form its out-of-bag (OOB) set.  For a bag the size of the dataset the
expected OOB fraction is 1/e ~ 0.368, and more generally e^(-ratio).  This
script draws many bags and compares the measured fractions with theory.
"""

import numpy as np

from baggedcnn import BaggingConfig, bootstrap_sample
from baggedcnn.bagging import assign_bags

n = 500
for ratio in (1.0, 0.8, 0.6):
    fractions = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        bag, oob = bootstrap_sample(n, ratio, rng)
        fractions.append(len(oob) / n)
    mean = float(np.mean(fractions))
    print(f"ratio {ratio:.1f}: mean OOB fraction {mean:.4f} "
          f"(theory e^-{ratio:.1f} = {np.exp(-ratio):.4f})")

# Bags are seeded per sub-model, so an assignment is reproducible:
a1 = assign_bags(n, BaggingConfig(n_models=3, bagging_ratio=0.7, seed=42))
a2 = assign_bags(n, BaggingConfig(n_models=3, bagging_ratio=0.7, seed=42))
same = all(np.array_equal(x, y) for x, y in zip(a1.bags, a2.bags))
print(f"\nsame seed, same bags: {same}")
for k, (bag, oob) in enumerate(zip(a1.bags, a1.oobs)):
    print(f"  model {k}: bag size {len(bag)}, oob size {len(oob)}, "
          f"unique in bag {len(np.unique(bag))}")
