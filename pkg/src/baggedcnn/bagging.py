"""Bootstrap bagging: sampling with replacement and ensemble orchestration.

Each sub-model gets its own seed derived from (master seed, model index), so
results are identical no matter how many workers run the trainings.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import network, training
from .errors import DimensionError, InputError
from .layers import softmax


@dataclass(frozen=True)
class BaggingConfig:
    n_models: int = 10
    bagging_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_models < 1:
            raise InputError("n_models must be >= 1")
        if not 0 < self.bagging_ratio <= 1:
            raise InputError("bagging_ratio must be in (0, 1]")


def bootstrap_sample(n, ratio, rng):
    """round(ratio*n) uniform draws with replacement from [0, n).

    Returns (bag indices, sorted out-of-bag indices).
    """
    if n < 1:
        raise InputError("n must be >= 1")
    if not 0 < ratio <= 1:
        raise InputError("ratio must be in (0, 1]")
    size = int(round(ratio * n))
    bag = rng.integers(0, n, size=size)
    oob = np.setdiff1d(np.arange(n), bag)
    return bag, oob


@dataclass
class BagAssignment:
    """Per-sub-model bootstrap draws and their out-of-bag complements."""

    bags: list  # list of index arrays (with repetition)
    oobs: list  # list of sorted index arrays

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "sample_indices"])
            for k, bag in enumerate(self.bags):
                w.writerow([k, " ".join(str(i) for i in bag)])


def assign_bags(n, config: BaggingConfig):
    """Deterministic bag per sub-model, seeded by (master seed, model index)."""
    bags, oobs = [], []
    for k in range(config.n_models):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, k, 0)))
        bag, oob = bootstrap_sample(n, config.bagging_ratio, rng)
        bags.append(bag)
        oobs.append(oob)
    return BagAssignment(bags=bags, oobs=oobs)


@dataclass
class EnsembleModel:
    """Trained sub-models plus (optionally) a fitted combiner."""

    model: network.ModelSpec
    param_sets: list  # one param dict per sub-model
    n_classes: int
    combiner: str = "average"  # average | vote | stacking
    forest: object = None  # RandomForest when combiner == "stacking"

    @property
    def n_models(self):
        return len(self.param_sets)


def submodel_seed(master_seed, index):
    """Stable per-sub-model training seed."""
    return int(np.random.SeedSequence((master_seed, index, 1)).generate_state(1)[0])


def train_ensemble(images, labels, model, bagging: BaggingConfig,
                   train: training.TrainConfig, val=None, jobs=1):
    """Train n_models sub-models on their bags.

    Returns (EnsembleModel without combiner, BagAssignment, histories).
    Execution order and the jobs count do not affect the result.
    """
    if len(labels) == 0:
        raise InputError("dataset is empty")
    assignment = assign_bags(len(labels), bagging)
    labels = np.asarray(labels)

    def run(k):
        bag = assignment.bags[k]
        cfg = training.TrainConfig(
            epochs=train.epochs, batch_size=train.batch_size, eta=train.eta,
            beta1=train.beta1, beta2=train.beta2, epsilon=train.epsilon,
            seed=submodel_seed(bagging.seed, k),
        )
        try:
            return training.train_submodel(model, images[bag], labels[bag], cfg, val=val)
        except Exception as exc:
            raise type(exc)(f"sub-model {k}: {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, range(bagging.n_models)))
    else:
        results = [run(k) for k in range(bagging.n_models)]
    param_sets = [p for p, _ in results]
    histories = [h for _, h in results]
    ensemble = EnsembleModel(model=model, param_sets=param_sets, n_classes=model.n_classes)
    return ensemble, assignment, histories


def ensemble_predict_probs(ensemble: EnsembleModel, batch, batch_size=64):
    """Stacked softmax outputs of every sub-model: [n_models, B, C]."""
    if batch.ndim != 4 or tuple(batch.shape[1:]) != tuple(ensemble.model.input_shape):
        raise DimensionError(
            f"batch shape {batch.shape} does not match model input {ensemble.model.input_shape}"
        )
    out = np.empty((ensemble.n_models, batch.shape[0], ensemble.n_classes))
    for m, params in enumerate(ensemble.param_sets):
        for lo in range(0, batch.shape[0], batch_size):
            xb = batch[lo : lo + batch_size]
            out[m, lo : lo + batch_size] = softmax(
                network.forward_batch(ensemble.model, params, xb)
            )
    return out
