# train_minimal_network.py
# Smallest useful tour of the network engine:
#   - draw a Gaussian-blob classification set
#   - train the default MLP with mini-batch SGD
#   - verify one analytic gradient against central differences
# Everything is float64 and seeded, so reruns print identical numbers.

import numpy as np

from pfedsim import (
    flatten_params,
    init_mlp,
    local_train,
    loss_and_grad,
    make_blobs,
    predict,
    stream,
    unflatten_params,
)
from pfedsim.nn import mean_loss

SEED = 7


def accuracy(model, data):
    return float(np.mean(predict(model, data.x) == data.y))


# -----------------------------
# Data and model
# -----------------------------
# One pooled draw, split by index, so train and test share class centers.
pool = make_blobs(classes=10, per_class=130, dim=20, cluster_spread=1.25,
                  rng=stream(SEED, "data"))
order = stream(SEED, "split").permutation(len(pool))
train = pool.subset(order[:1000])
test = pool.subset(order[1000:])
model = init_mlp(dim=20, hidden=(64, 32), classes=10, rng=stream(SEED, "init"))

print(f"model: 20 -> 64 -> 32 -> 10, {model.num_params} parameters")
print(f"untrained loss {mean_loss(model, train.x, train.y):.4f} "
      f"(uniform logits would give ln(10) = {np.log(10.0):.4f})")

# -----------------------------
# Training loop, one epoch at a time so we can watch the curve
# -----------------------------
sgd_rng = stream(SEED, "sgd")
for epoch in range(1, 16):
    model = local_train(model, train.x, train.y, epochs=1, batch_size=32,
                        lr=0.05, rng=sgd_rng)
    if epoch % 3 == 0 or epoch == 1:
        print(f"epoch {epoch:2d}: train acc {accuracy(model, train):.4f}  "
              f"test acc {accuracy(model, test):.4f}")

# -----------------------------
# Spot-check the backward pass against central differences
# -----------------------------
x, y = train.x[:16], train.y[:16]
_, grads = loss_and_grad(model, x, y)
analytic = np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])

h = 1e-5
flat = flatten_params(model)
probe = stream(SEED, "probe").choice(flat.size, size=25, replace=False)
numeric = np.empty(probe.size)
for slot, j in enumerate(probe):
    up, down = flat.copy(), flat.copy()
    up[j] += h
    down[j] -= h
    numeric[slot] = (loss_and_grad(unflatten_params(up, model), x, y)[0]
                     - loss_and_grad(unflatten_params(down, model), x, y)[0]) / (2 * h)

err = np.abs(analytic[probe] - numeric).max()
print(f"\ngradient check on 25 random entries: max abs difference {err:.2e}")
