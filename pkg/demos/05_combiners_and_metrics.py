"""How the three combiners differ, plus the metrics toolbox.

Works on hand-made probability tensors so the behaviour is easy to follow:
averaging looks at mean confidence, voting at per-model argmax counts, and
stacking learns a mapping from the concatenated probability vectors.  All
ties resolve to the lowest class index.  The second half demonstrates
micro/macro metrics and class exclusion on a fixed confusion matrix.
"""

import numpy as np

from baggedcnn import combine_average, combine_vote, macro_metrics, micro_metrics
from baggedcnn.metrics import metrics_report

# probs has shape [n_models, batch, n_classes]
probs = np.array([
    [[0.9, 0.1], [0.4, 0.6], [0.5, 0.5]],   # model 0
    [[0.2, 0.8], [0.4, 0.6], [0.5, 0.5]],   # model 1
    [[0.2, 0.8], [0.9, 0.1], [0.5, 0.5]],   # model 2
])
print("sample 0: one confident model 0-vote outweighs two mild 1-votes on average")
print("  average:", combine_average(probs).tolist())
print("  vote:   ", combine_vote(probs).tolist())
print("sample 2 is an exact tie everywhere; both combiners pick class 0")

cm = np.array([
    [50,  2,  3],
    [ 4, 40,  6],
    [ 1,  5, 44],
])
print("\nconfusion matrix:")
print(cm)
p, r, f1 = micro_metrics(cm)
print(f"micro  P/R/F1: {p:.4f}/{r:.4f}/{f1:.4f}  (all equal accuracy by construction)")
p, r, f1 = macro_metrics(cm)
print(f"macro  P/R/F1: {p:.4f}/{r:.4f}/{f1:.4f}")
p, r, f1 = micro_metrics(cm, excluded_classes=(0,))
print(f"micro excluding class 0: {p:.4f}/{r:.4f}/{f1:.4f}")
print("\nfull report:", {k: round(v, 4) for k, v in metrics_report(cm).items()})
