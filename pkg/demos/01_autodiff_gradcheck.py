"""
Checking the tape against finite differences
=============================================

Every trainable quantity in the package flows through the small reverse-mode
tape in ``crossfuse.autodiff``.  This walk-through builds a two-layer network by
hand, differentiates it, and compares against central differences.
"""
# %%
#
import numpy as np

from crossfuse import autodiff as ad

rng = np.random.default_rng(0)
X = rng.normal(size=(6, 4))
params = {"W1": rng.normal(size=(4, 5)), "b1": rng.normal(size=(1, 5)),
          "W2": rng.normal(size=(5, 3))}


def loss_on(tape, values):
    w = {k: tape.param(v, name=k) for k, v in values.items()}
    h = ad.relu(ad.add_bias(ad.matmul(tape.constant(X), w["W1"]), w["b1"]))
    q = ad.row_softmax(ad.matmul(h, w["W2"]))
    return ad.sum_squares(q)


# %%
#
# One forward pass records the graph; ``backward`` walks it in reverse.

tape = ad.Tape()
loss = loss_on(tape, params)
grads = tape.backward(loss)
print("loss", loss.value[0, 0])
print("nodes on tape", len(tape))

# %%
#
# Central differences, one entry at a time.

h = 1e-6
for name, arr in params.items():
    numeric = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        orig = arr[idx]
        arr[idx] = orig + h
        up = loss_on(ad.Tape(), params).value[0, 0]
        arr[idx] = orig - h
        down = loss_on(ad.Tape(), params).value[0, 0]
        arr[idx] = orig
        numeric[idx] = (up - down) / (2 * h)
    err = np.abs(numeric - grads[name]).max() / max(np.abs(numeric).max(), 1e-12)
    print(f"{name}: relative error {err:.2e}")

# %%
#
# Adam with default settings moves every coordinate by about ``lr`` on the
# first step, whatever the gradient's scale.

opt = ad.Adam()
before = {k: v.copy() for k, v in params.items()}
opt.step(params, grads)
print("first-step |change|:", {k: float(np.abs(params[k] - before[k]).max()) for k in params})
