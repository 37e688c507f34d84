"""Single-model training: sparse categorical cross-entropy, Adam, epoch loop.

Loss is reported as the batch mean; gradients from the network are summed
over the batch, so the fused softmax+loss gradient is (probs - onehot)/B.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import network
from .errors import InputError, LabelError, NumericError
from .layers import softmax

PROB_FLOOR = 1e-12  # clamp before log so confident-wrong predictions stay finite


def _check_labels(labels, n_classes):
    labels = np.asarray(labels)
    bad = np.nonzero((labels < 0) | (labels >= n_classes))[0]
    if bad.size:
        raise LabelError(f"label {labels[bad[0]]} out of range [0, {n_classes}) at index {bad[0]}")
    return labels.astype(np.int64)


def sparse_cce(probs, labels):
    """Mean over the batch of -log(probs[i, labels[i]])."""
    probs = np.asarray(probs)
    labels = _check_labels(labels, probs.shape[-1])
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def softmax_cce(logits, labels):
    """Fused softmax + loss: (mean loss, probs, dLogits=(probs-onehot)/B)."""
    probs = softmax(logits)
    labels = _check_labels(labels, probs.shape[-1])
    b = len(labels)
    loss = sparse_cce(probs, labels)
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    return loss, probs, dlogits.astype(logits.dtype, copy=False)


@dataclass
class AdamState:
    """Per-parameter moment accumulators; t counts completed steps."""

    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eta: float = 0.001
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, params, beta1=0.9, beta2=0.999, eta=0.001, epsilon=1e-8):
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
            beta1=beta1, beta2=beta2, eta=eta, epsilon=epsilon,
        )


def adam_step(params, grads, state: AdamState):
    """One update: moment EMAs, bias correction, step of size
    eta/sqrt(vhat + eps) * mhat (epsilon inside the root)."""
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    out = {}
    for key, theta in params.items():
        g = grads[key]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {key!r}")
        m = state.m[key]
        v = state.v[key]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * np.square(g)
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        out[key] = (theta - state.eta * mhat / np.sqrt(vhat + state.epsilon)).astype(
            theta.dtype, copy=False
        )
    return out, state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    eta: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
            for i in range(len(self.train_loss)):
                vl = f"{self.val_loss[i]:.6f}" if i < len(self.val_loss) else ""
                va = f"{self.val_acc[i]:.6f}" if i < len(self.val_acc) else ""
                w.writerow([i + 1, f"{self.train_loss[i]:.6f}", f"{self.train_acc[i]:.6f}", vl, va])


def evaluate(model, params, images, labels, batch_size=64):
    """(mean loss, accuracy) over a labeled set."""
    labels = _check_labels(labels, model.n_classes)
    losses = []
    correct = 0
    for lo in range(0, len(labels), batch_size):
        xb = images[lo : lo + batch_size]
        yb = labels[lo : lo + batch_size]
        probs = softmax(network.forward_batch(model, params, xb))
        losses.append(sparse_cce(probs, yb) * len(yb))
        correct += int((probs.argmax(axis=1) == yb).sum())
    n = len(labels)
    return sum(losses) / n, correct / n


def train_submodel(model, images, labels, config: TrainConfig, val=None):
    """Train one CNN from scratch; returns (params, history).

    Fully deterministic given config.seed: initialization, per-epoch
    shuffling, and batching all derive from it.  The trailing partial batch
    is trained, not dropped.
    """
    if len(labels) == 0:
        raise InputError("training set is empty")
    labels = _check_labels(labels, model.n_classes)
    params = network.init_params(model, config.seed, dtype=images.dtype)
    state = AdamState.fresh(params, config.beta1, config.beta2, config.eta, config.epsilon)
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 1)))
    history = TrainHistory()
    n = len(labels)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        epoch_correct = 0
        for lo in range(0, n, config.batch_size):
            sel = order[lo : lo + config.batch_size]
            xb, yb = images[sel], labels[sel]
            logits, bwd = network.forward_vjp(model, params, xb)
            loss, probs, dlogits = softmax_cce(logits, yb)
            grads = bwd(dlogits)
            params, state = adam_step(params, grads, state)
            epoch_loss += loss * len(sel)
            epoch_correct += int((probs.argmax(axis=1) == yb).sum())
        history.train_loss.append(epoch_loss / n)
        history.train_acc.append(epoch_correct / n)
        if val is not None:
            vloss, vacc = evaluate(model, params, val[0], val[1])
            history.val_loss.append(vloss)
            history.val_acc.append(vacc)
    return params, history
