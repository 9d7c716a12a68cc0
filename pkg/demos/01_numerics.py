"""
Autodiff, spectral correlation and Adam
=======================================

Every model component is built on a small reverse-mode engine over numpy.
This script shows the three pieces the rest of the package leans on.
"""

# %%
# Gradients by reverse mode, checked against central differences.
import numpy as np

from xfmnet.numerics import Adam, Tensor, check_gradients, freq_cross_correlate

p = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
(p * p).sum().backward()
print("d/dp sum(p*p) =", p.grad)  # [2, 4, 6]

rng = np.random.default_rng(0)
w = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
x = rng.standard_normal((5, 4))
errs = check_gradients(lambda: (Tensor(x) @ w).tanh().sum(), {"w": w})
print("relative error vs finite differences:", errs["w"])

# %%
# Circular cross-correlation in O(T log T).
# ``out[tau] = sum_t q[(t + tau) mod T] * k[t]``, per channel.
q = np.array([[1.0], [2.0], [3.0], [4.0]])
fast = freq_cross_correlate(Tensor(q), Tensor(q)).data[:, 0]
slow = [sum(q[(t + tau) % 4, 0] * q[t, 0] for t in range(4)) for tau in range(4)]
print("spectral:", fast.round(6), " loop:", slow)

# %%
# Adam on a convex bowl.
theta = Tensor(np.array([3.0, -2.0]), requires_grad=True)
opt = Adam({"theta": theta}, lr=0.1)
for step in range(200):
    opt.zero_grad()
    loss = (theta * theta).sum() * 0.5
    loss.backward()
    opt.step()
print("after 200 steps theta =", theta.data.round(4))
