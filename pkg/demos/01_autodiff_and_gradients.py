#!/usr/bin/env python3
"""Walk through the tensor engine: forward values, reverse-mode gradients,
and the finite-difference verification harness."""

import numpy as np

from condiv import autodiff as ad
from condiv.autodiff import Tensor, grad_check, parameter, primitive_set
from condiv.layers import AttentionParams, GruParams, additive_attention, gru_cell

print("=== primitives ===")
print("catalog:", ", ".join(sorted(primitive_set())))

x = Tensor([0.0, 0.0, 0.0])
print("softmax([0,0,0]) =", ad.softmax(x).data)
print("sigmoid(0)       =", ad.sigmoid(Tensor(0.0)).item())

print("\n=== gradients by hand vs tape ===")
w = parameter([1.0, 2.0], name="w")
loss = ad.sum_all(ad.mul(w, w))  # sum w^2
loss.backward()
print("d/dw sum(w^2) at [1,2] ->", w.grad, "(analytic: [2, 4])")

print("\n=== the verification harness ===")
w.zero_grad()
report = grad_check(lambda: ad.sum_all(ad.mul(w, w)), [w], tol=1e-6)
print("grad_check passed:", report.passed,
      "max rel err:", max(report.max_rel_err.values()))

print("\n=== a GRU cell and additive attention ===")
rng = np.random.default_rng(0)
cell = GruParams.init(input_dim=3, hidden_dim=4, rng=rng)
h = gru_cell(Tensor(rng.normal(size=3)), Tensor(np.zeros(4)), cell)
print("gru state:", np.round(h.data, 4))

head = AttentionParams.init(key_dim=4, query_dim=4, attn_dim=4, rng=rng)
keys = Tensor(rng.normal(size=(5, 4)))
weights, context = additive_attention(keys, h, head)
print("attention weights:", np.round(weights.data, 4), "sum:", weights.data.sum())

# every parameter of the cell passes the finite-difference check
inputs = cell.tensors()
for i, t in enumerate(inputs):
    t.name = t.name or f"cell{i}"
xvec = parameter(rng.normal(size=3), name="x")
report = grad_check(
    lambda: ad.sum_all(ad.mul(gru_cell(xvec, Tensor(np.zeros(4)), cell),
                              gru_cell(xvec, Tensor(np.zeros(4)), cell))),
    inputs + [xvec])
print("gru grad_check passed:", report.passed)
