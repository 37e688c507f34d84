"""Verify the hand-written backward passes against finite differences.

Every layer returns its output together with a closure computing the
vector-Jacobian product.  Here we perturb each parameter of a tiny network,
measure the loss change numerically, and compare with the analytic gradient.
Agreement to ~1e-6 relative error means the chain of closures is wired
correctly end to end.
"""

import numpy as np

from baggedcnn import backward_batch, build_scaled_cnn, forward_batch, init_params, softmax_cce

rng = np.random.default_rng(0)

model = build_scaled_cnn((12, 12, 1), [3], n_classes=3, dense_units=6)
params = init_params(model, seed=0, dtype=np.float64)
# the classifier head starts at zero; nudge everything so no gradient vanishes
params = {k: v + 0.05 * rng.normal(size=v.shape) for k, v in params.items()}

images = rng.uniform(0, 1, size=(4, 12, 12, 1))
labels = np.array([0, 1, 2, 1])


def loss_at(p):
    logits = forward_batch(model, p, images)
    loss, _, _ = softmax_cce(logits, labels)
    return loss


logits = forward_batch(model, params, images)
loss, _, dlogits = softmax_cce(logits, labels)
grads = backward_batch(model, params, images, dlogits)
print(f"loss at start: {loss:.6f}")

h = 1e-6
worst = 0.0
for name, g in grads.items():
    flat = params[name].reshape(-1)
    # probe a handful of entries per tensor
    for i in rng.choice(flat.size, size=min(5, flat.size), replace=False):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_at(params)
        flat[i] = keep - h
        down = loss_at(params)
        flat[i] = keep
        numeric = (up - down) / (2 * h)
        analytic = g.reshape(-1)[i]
        rel = abs(analytic - numeric) / max(abs(numeric), 1.0)
        worst = max(worst, rel)
    print(f"  {name:12s} checked, worst so far {worst:.2e}")

print(f"worst relative error: {worst:.2e}")
assert worst < 1e-4
