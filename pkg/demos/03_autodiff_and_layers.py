"""The numpy autodiff engine under the networks: record a tape, run
backward, and check the result against finite differences.

Run:  python demos/03_autodiff_and_layers.py
"""
import numpy as np

from loadsr.autodiff import Tape, Tensor, backward, square, tsum
from loadsr.layers import conv1d, conv1d_transpose, max_pool1d, relu

rng = np.random.default_rng(0)
x = Tensor(rng.normal(size=(1, 1, 8)))
w = Tensor(rng.normal(size=(3, 1, 3)), requires_grad=True)
up = Tensor(rng.normal(size=(3, 1, 2)), requires_grad=True)

with Tape() as tape:
    h = relu(conv1d(x, w, padding=1))
    y = conv1d_transpose(h, up, stride=2)
    loss = tsum(square(max_pool1d(y, 3, 1)))
grads = backward(tape, loss)
print(f"{len(tape)} recorded ops; output length {y.shape[-1]} from input length {x.shape[-1]}")


def loss_at(wdata):
    h = relu(conv1d(x, Tensor(wdata), padding=1))
    return float(tsum(square(max_pool1d(conv1d_transpose(h, up.data, stride=2), 3, 1))).data)


# Central differences on one weight
i = (1, 0, 2)
step = 1e-5
plus, minus = w.data.copy(), w.data.copy()
plus[i] += step
minus[i] -= step
numeric = (loss_at(plus) - loss_at(minus)) / (2 * step)
print(f"d loss / d w{list(i)}: tape {grads[w][i]:.8f}, finite difference {numeric:.8f}")

# Transposed convolution is the adjoint of convolution
a = rng.normal(size=(1, 3, 8))
b = rng.normal(size=(1, 1, 16))
lhs = np.sum(conv1d_transpose(Tensor(a), up, stride=2).data * b)
rhs = np.sum(a * conv1d(Tensor(b), up, stride=2).data)
print(f"<T a, b> = {lhs:.12f}, <a, C b> = {rhs:.12f}")
