"""Walk through the CNN architecture and its parameter budget.

The full-size network takes 224x224x3 images through four conv/pool stages
into a 512-unit dense layer and a classifier head.  This script prints the
keras-style summary table and shows how the parameter count decomposes,
then builds a scaled-down variant of the same shape family suitable for
quick experiments.
"""

import numpy as np

from baggedcnn import build_paper_cnn, build_scaled_cnn, count_params, init_params, summary

model = build_paper_cnn(n_classes=10)
print(summary(model))

print()
print(f"count_params: {count_params(model):,}")

# Initialization: hidden layers use uniform +-sqrt(6/fan_in); the classifier
# head starts at zero so the untrained network predicts uniform probabilities
# and the initial cross-entropy is exactly ln(n_classes).
params = init_params(model, seed=0)
total = sum(int(np.prod(v.shape)) for v in params.values())
print(f"initialized arrays: {len(params)}, total entries {total:,}")

print()
print("Scaled-down variant (32x32x1 inputs, widths 8/16):")
small = build_scaled_cnn((32, 32, 1), [8, 16], n_classes=5, dense_units=64)
print(summary(small))
