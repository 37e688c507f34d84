"""Random forest classifier built from scratch: greedy Gini trees on
bootstrap row resamples with random per-split feature candidates.

All ties break deterministically: best splits keep the first candidate in
ascending feature order, and class votes go to the lowest class index.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InputError


def gini_impurity(label_counts):
    """1 - sum((count_k / total)^2) over classes."""
    counts = np.asarray(label_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise InputError("gini impurity of an empty node is undefined")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: int = -1  # child indices into the node list
    right: int = -1
    label: int = -1  # leaf class


@dataclass
class DecisionTree:
    nodes: list = field(default_factory=list)

    def predict_one(self, x):
        i = 0
        while True:
            node = self.nodes[i]
            if node.feature < 0:
                return node.label
            i = node.left if x[node.feature] <= node.threshold else node.right

    def predict(self, features):
        return np.array([self.predict_one(x) for x in features], dtype=np.int64)


def _majority(labels, n_classes):
    return int(np.bincount(labels, minlength=n_classes).argmax())


def _best_split(features, labels, candidates, n_classes):
    """Lowest weighted-Gini (feature, threshold) over candidate features.

    Thresholds are midpoints between consecutive distinct sorted values.
    Returns None when no candidate splits the node.
    """
    best = None
    best_score = np.inf
    n = len(labels)
    for f in candidates:
        col = features[:, f]
        order = np.argsort(col, kind="stable")
        sv, sl = col[order], labels[order]
        # cumulative class counts along the sorted column
        onehot = np.zeros((n, n_classes), dtype=np.int64)
        onehot[np.arange(n), sl] = 1
        cum = np.cumsum(onehot, axis=0)
        total = cum[-1]
        boundary = np.nonzero(sv[1:] > sv[:-1])[0]  # split after position i
        for i in boundary:
            left = cum[i]
            right = total - left
            nl = i + 1
            nr = n - nl
            score = (nl * gini_impurity(left) + nr * gini_impurity(right)) / n
            if score < best_score - 1e-15:
                best_score = score
                best = (int(f), float((sv[i] + sv[i + 1]) / 2.0))
    return best


def _grow(features, labels, n_classes, max_depth, n_candidates, rng, nodes, depth):
    node_id = len(nodes)
    nodes.append(TreeNode())
    counts = np.bincount(labels, minlength=n_classes)
    if depth >= max_depth or np.count_nonzero(counts) <= 1:
        nodes[node_id] = TreeNode(label=_majority(labels, n_classes))
        return node_id
    d = features.shape[1]
    if n_candidates >= d:
        candidates = np.arange(d)
    else:
        candidates = np.sort(rng.choice(d, size=n_candidates, replace=False))
    split = _best_split(features, labels, candidates, n_classes)
    if split is None:
        nodes[node_id] = TreeNode(label=_majority(labels, n_classes))
        return node_id
    f, thr = split
    mask = features[:, f] <= thr
    left = _grow(features[mask], labels[mask], n_classes, max_depth, n_candidates,
                 rng, nodes, depth + 1)
    right = _grow(features[~mask], labels[~mask], n_classes, max_depth, n_candidates,
                  rng, nodes, depth + 1)
    nodes[node_id] = TreeNode(feature=f, threshold=thr, left=left, right=right)
    return node_id


@dataclass
class RandomForest:
    trees: list
    n_classes: int
    n_features: int

    def predict(self, features):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise InputError(
                f"expected [B, {self.n_features}] features, got shape {features.shape}"
            )
        votes = np.stack([t.predict(features) for t in self.trees])  # [n_trees, B]
        return np.array(
            [np.bincount(votes[:, b], minlength=self.n_classes).argmax()
             for b in range(features.shape[0])],
            dtype=np.int64,
        )


def fit_forest(features, labels, n_trees=100, max_depth=12, seed=0,
               n_candidates=None, bootstrap=True, n_classes=None):
    """Fit a forest of Gini trees.

    n_candidates defaults to ceil(sqrt(d)); bootstrap=False uses every row
    once per tree (handy for oracle comparisons).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] == 0 or features.shape[1] == 0:
        raise InputError(f"features must be a non-empty 2-d matrix, got shape {features.shape}")
    if len(labels) != len(features):
        raise InputError("features and labels disagree in length")
    if labels.min() < 0:
        raise InputError("labels must be non-negative")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    d = features.shape[1]
    if n_candidates is None:
        n_candidates = math.ceil(math.sqrt(d))
    trees = []
    for k in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
        if bootstrap:
            rows = rng.integers(0, len(labels), size=len(labels))
        else:
            rows = np.arange(len(labels))
        nodes = []
        _grow(features[rows], labels[rows], n_classes, max_depth, n_candidates,
              rng, nodes, 0)
        trees.append(DecisionTree(nodes=nodes))
    return RandomForest(trees=trees, n_classes=n_classes, n_features=d)
