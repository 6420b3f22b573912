"""Background geometry of hyperbolic space in the upper half-space chart.

Points are numpy arrays whose last axis holds the coordinates
``(x^1, ..., x^{n-1}, x^n)``; every function broadcasts over leading axes.
Index ``n - 1`` (zero based) is the distinguished normal direction, the
remaining indices are tangential to the horospheres ``x^n = const``.

The metric is ``b = (x^n)^{-2} delta``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DomainError",
    "as_points",
    "origin",
    "metric_b",
    "inverse_b",
    "volume_density_b",
    "christoffel_b",
    "christoffel_b_derivative",
    "christoffel_from_metric",
    "cosh_r",
    "distance_r",
    "cosh_r_jet",
    "bnorm",
    "geodesic_sphere_points",
]

ACOSH_CLAMP = 1e-14


class DomainError(ValueError):
    """Raised for points outside the open upper half-space."""


def as_points(x, n=None):
    """Return ``x`` as a float array of points and validate ``x^n > 0``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise DomainError("a point needs at least one coordinate axis")
    if n is not None and x.shape[-1] != n:
        raise DomainError(f"expected {n} coordinates, got {x.shape[-1]}")
    if x.shape[-1] < 2:
        raise DomainError("dimension must be at least 2")
    if np.any(~(x[..., -1] > 0)):
        bad = np.argwhere(~(x[..., -1] > 0))
        raise DomainError(f"x^n must be positive; offending index {bad[0].tolist()}")
    return x


def origin(n):
    """The base point ``o = (0, ..., 0, 1)``."""
    o = np.zeros(n)
    o[-1] = 1.0
    return o


def metric_b(x):
    x = as_points(x)
    n = x.shape[-1]
    return x[..., -1, None, None] ** -2 * np.eye(n)


def inverse_b(x):
    x = as_points(x)
    n = x.shape[-1]
    return x[..., -1, None, None] ** 2 * np.eye(n)


def volume_density_b(x):
    """``sqrt(det b) = (x^n)^{-n}``."""
    x = as_points(x)
    return x[..., -1] ** (-x.shape[-1])


def _christoffel_pattern(n):
    # Gamma^j_{ik} * x^n, indexed [..., j, i, k]
    p = np.zeros((n, n, n))
    nn = n - 1
    for i in range(n):
        p[i, i, nn] -= 1.0
        p[i, nn, i] -= 1.0
    # the (i, n, n) entry was decremented twice above
    p[nn, nn, nn] = -1.0
    for a in range(nn):
        p[nn, a, a] = 1.0
    return p


def christoffel_b(x):
    """Christoffel symbols of ``b`` as an array ``G[..., j, i, k] = Gamma^j_{ik}``.

    Nonzero entries: ``Gamma^j_{in} = Gamma^j_{ni} = -delta^j_i / x^n`` and
    ``Gamma^n_{ab} = delta_{ab} / x^n`` for tangential ``a, b``.
    """
    x = as_points(x)
    n = x.shape[-1]
    return _christoffel_pattern(n) / x[..., -1, None, None, None]


def christoffel_b_derivative(x):
    """``dG[..., l, j, i, k] = d_l Gamma^j_{ik}``; only ``l = n`` is nonzero."""
    x = as_points(x)
    n = x.shape[-1]
    out = np.zeros(x.shape[:-1] + (n, n, n, n))
    out[..., -1, :, :, :] = -_christoffel_pattern(n) / x[..., -1, None, None, None] ** 2
    return out


def christoffel_from_metric(ginv, dg):
    """Generic ``Gamma^c_{ab} = 1/2 g^{cd} (d_a g_{bd} + d_b g_{ad} - d_d g_{ab})``.

    ``dg[..., k, i, j] = d_k g_{ij}``.  Output indexed ``[..., c, a, b]``.
    """
    lower = 0.5 * (
        np.einsum("...abd->...dab", dg)
        + np.einsum("...bad->...dab", dg)
        - dg
    )
    return np.einsum("...cd,...dab->...cab", ginv, lower)


def cosh_r(x):
    """``cosh`` of the b-distance to ``o``: ``(|x^|^2 + (x^n)^2 + 1) / (2 x^n)``."""
    x = as_points(x)
    return (np.sum(x * x, axis=-1) + 1.0) / (2.0 * x[..., -1])


def distance_r(x):
    c = cosh_r(x)
    # rounding can push the argument marginally below one near o
    c = np.where((c < 1.0) & (c >= 1.0 - ACOSH_CLAMP), 1.0, c)
    return np.arccosh(c)


def cosh_r_jet(x):
    """Value, gradient and coordinate Hessian of ``W = cosh r``."""
    x = as_points(x)
    n = x.shape[-1]
    t = x[..., -1]
    w = cosh_r(x)
    grad = x / t[..., None]
    grad[..., -1] -= w / t
    hess = np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)) / t[..., None, None]
    hess = hess.copy()
    # d_n of x_k / t and of -W / t
    hess[..., :, -1] -= x / t[..., None] ** 2
    hess[..., -1, :] -= x / t[..., None] ** 2
    hess[..., -1, -1] += 2.0 * w / t**2
    return w, grad, hess


def bnorm(T, valence, x):
    """b-norm of a tensor given by coordinate components.

    ``valence = (p, q)`` means ``p`` upper indices followed by ``q`` lower
    ones, stacked in the trailing axes of ``T``.  Since ``b`` is conformal to
    ``delta`` the norm is ``(x^n)^{q - p}`` times the Euclidean norm of the
    component table.
    """
    x = as_points(x)
    T = np.asarray(T, dtype=float)
    p, q = valence
    n = x.shape[-1]
    rank = p + q
    lead = x.shape[:-1]
    if T.shape[T.ndim - rank:] != (n,) * rank:
        raise ValueError(f"component table of shape {T.shape} does not match valence {valence} in dimension {n}")
    flat = T.reshape(T.shape[: T.ndim - rank] + (-1,))
    euclid = np.sqrt(np.sum(flat * flat, axis=-1))
    return np.broadcast_to(x[..., -1] ** (q - p), lead) * euclid


def geodesic_sphere_points(r, directions):
    """Points at b-distance ``r`` from ``o`` along unit Euclidean ``directions``.

    The geodesic sphere is the Euclidean sphere of center ``(0, cosh r)`` and
    radius ``sinh r``.
    """
    r = np.asarray(r, dtype=float)
    d = np.asarray(directions, dtype=float)
    pts = np.sinh(r)[..., None] * d
    pts[..., -1] += np.cosh(r)
    return pts
