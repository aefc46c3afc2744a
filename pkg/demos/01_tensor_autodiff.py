"""Tour of the tensor engine: build a tiny computation, backpropagate, and
check one gradient against finite differences."""

import numpy as np

from misskit import tensor as T

rng = np.random.default_rng(0)

# a two-layer scalar-output network in float64
w1 = T.Tensor(rng.standard_normal((3, 4)), requires_grad=True)
w2 = T.Tensor(rng.standard_normal((4, 1)), requires_grad=True)
x = T.Tensor(rng.standard_normal((5, 3)))


def loss_fn():
    h = T.gelu(T.matmul(x, w1))
    return T.tsum(T.matmul(h, w2))


loss = loss_fn()
T.backward(loss)
print(f"loss = {loss.item():.6f}")
print(f"dloss/dw1[0,0] (autodiff)  = {w1.grad[0, 0]:.8f}")

h = 1e-6
orig = w1.data[0, 0]
w1.data[0, 0] = orig + h
up = loss_fn().item()
w1.data[0, 0] = orig - h
down = loss_fn().item()
w1.data[0, 0] = orig
print(f"dloss/dw1[0,0] (finite diff) = {(up - down) / (2 * h):.8f}")

# Adam on a quadratic: walks to the minimizer at 3
p = T.parameter(np.array(-4.0), dtype=np.float64)
opt = T.Adam([p], lr=0.1)
for step in range(200):
    p.grad = None
    T.backward(T.mul(T.sub(p, 3.0), T.sub(p, 3.0)))
    opt.step()
print(f"adam minimizer after 200 steps: {p.item():.5f} (target 3.0)")
