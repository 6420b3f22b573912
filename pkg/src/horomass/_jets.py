"""Second-order scalar jets with exact forward-mode arithmetic.

A jet carries ``(value, gradient, Hessian)`` of a scalar field at a batch of
points.  Products and compositions follow the Leibniz and chain rules, so the
families built from them have closed-form derivatives without any finite
differencing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScalarJet:
    val: np.ndarray
    d: np.ndarray
    dd: np.ndarray

    @classmethod
    def coordinate(cls, x, k):
        n = x.shape[-1]
        d = np.zeros(x.shape)
        d[..., k] = 1.0
        return cls(x[..., k].copy(), d, np.zeros(x.shape + (n,)))

    @classmethod
    def constant(cls, c, x):
        n = x.shape[-1]
        lead = x.shape[:-1]
        return cls(np.full(lead, float(c)), np.zeros(lead + (n,)), np.zeros(lead + (n, n)))

    def __add__(self, other):
        if not isinstance(other, ScalarJet):
            return ScalarJet(self.val + other, self.d, self.dd)
        return ScalarJet(self.val + other.val, self.d + other.d, self.dd + other.dd)

    __radd__ = __add__

    def __neg__(self):
        return ScalarJet(-self.val, -self.d, -self.dd)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, ScalarJet):
            return ScalarJet(self.val * other, self.d * other, self.dd * other)
        u, v = self, other
        d = u.d * v.val[..., None] + v.d * u.val[..., None]
        dd = (
            u.dd * v.val[..., None, None]
            + v.dd * u.val[..., None, None]
            + u.d[..., :, None] * v.d[..., None, :]
            + v.d[..., :, None] * u.d[..., None, :]
        )
        return ScalarJet(u.val * v.val, d, dd)

    __rmul__ = __mul__

    def compose(self, f0, f1, f2):
        """Jet of ``f(self)`` given ``f, f', f''`` evaluated at ``self.val``."""
        d = f1[..., None] * self.d
        dd = f2[..., None, None] * self.d[..., :, None] * self.d[..., None, :] + f1[..., None, None] * self.dd
        return ScalarJet(f0, d, dd)

    def power(self, p):
        v = self.val
        return self.compose(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def reciprocal(self):
        return self.power(-1.0)


def tensor_from_scalars(jets, mats):
    """Assemble ``sum_m jets[m] * mats[m]`` into component arrays.

    Returns ``(e, de, dde)`` with ``de[..., k, i, j] = d_k e_ij`` and
    ``dde[..., l, k, i, j] = d_l d_k e_ij``.
    """
    e = 0.0
    de = 0.0
    dde = 0.0
    for jet, m in zip(jets, mats):
        m = np.asarray(m, dtype=float)
        e = e + jet.val[..., None, None] * m
        de = de + jet.d[..., :, None, None] * m
        dde = dde + jet.dd[..., :, :, None, None] * m
    return e, de, dde
