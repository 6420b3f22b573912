"""
The model: hyperbolic space above a horosphere
==============================================

A tour of the background geometry.  We look at the upper half-space
metric, the static potentials and the conformal Killing fields that pair
with them, and at one place where the stated conformal factor is off.
"""

import math

import numpy as np

from horomass import halfspace as hs
from horomass.curvature import curvature_g
from horomass.killing import (
    conformal_factor,
    divergence,
    growth_norms,
    horosphere_restriction,
    potential,
    vector_field,
)
from horomass.perturbations import ZeroFamily, evaluate_jet

rng = np.random.default_rng(0)
n = 3

# b = |dx|^2 / (x^n)^2.  A few points, heights spread over two decades.
x = np.column_stack([rng.uniform(-2, 2, (6, n - 1)), np.geomspace(0.05, 5, 6)])
print("points\n", np.round(x, 3))

# The scalar curvature of b is -n(n-1), everywhere.
R = curvature_g(evaluate_jet(ZeroFamily(n), x)).R
print("R(b) =", R)

# Distance to o = (0, ..., 0, 1) grows like the log of 1/x^n near the boundary.
print("cosh r =", np.round(hs.cosh_r(x), 3))

# %%
# Static potentials: hess V = V b, and d_n V = -V on the horosphere.
for kind in range(n):
    V = potential(kind, x)
    res = np.abs(V.hess - V.value[:, None, None] * hs.metric_b(x)).max()
    print(f"V{kind}: max |hess V - V b| = {res:.1e}")

# %%
# Each potential has a conformal Killing partner with div X = n V.
for kind in range(n):
    name, k = ("Y", None) if kind == 0 else ("Y_k", kind)
    X = vector_field(name, x, k=k)
    print(f"{name:3s} k={k}: div X - n V = {np.abs(divergence(X) - n * potential(kind, x).value).max():.1e}")

# The partners are tangent to the horosphere and restrict to conformal fields of flat R^{n-1}.
on = np.column_stack([rng.uniform(-3, 3, (4, n - 1)), np.ones(4)])
r = horosphere_restriction(vector_field("Y_k", on, k=1), on)
print("div on the slice:", r.div, " (n - 1) V1:", (n - 1) * potential(1, on).value)

# %%
# The quadratic field X = <x,a> x - |x|^2 a / 2 is conformal with
# L_X b = <x,x> a^n / x^n b.  The factor quoted with an extra 1/2 is off by 2.
a = np.array([0.3, -0.2, 1.0])
X = vector_field("quadratic", x, a=a)
lam = conformal_factor(X)
print("factor / (<x,x> a^n / x^n):", np.round(lam / (np.sum(x * x, axis=1) * a[-1] / x[:, -1]), 12))

# %%
# Growth of the partners.  Towards the boundary point x = 0 the ratio
# (|Y| + |nabla Y|) / cosh r creeps up to 2 (1 + sqrt n), above 4.
t = np.geomspace(1e-1, 1e-6, 6)
axis = np.zeros((6, n))
axis[:, -1] = t
print("ratio on the axis:", np.round(growth_norms(vector_field("Y", axis), axis)[2], 4),
      " limit:", round(2 * (1 + math.sqrt(n)), 4))
