"""Static potentials and the conformal Killing fields of the half-space model.

Potentials: ``V_0 = 1/x^n`` and ``V_k = x^k / x^n`` for ``k = 1..n-1``.  They
satisfy ``nabla^2 V = V b`` and ``d_n V = -V`` on ``x^n = 1``.

Vector fields are given together with their background covariant derivative
``gradX[..., i, j] = nabla_i X^j`` written out case by case.  Supported kinds:

``dilation``        ``x^i d_i`` (Killing)
``translation``     ``d_k`` with ``k`` tangential (Killing)
``translation_n``   ``d_n`` (conformal, ``L_X b = -(2/x^n) b``)
``quadratic``       ``<x, a> x - |x|^2 a / 2`` for a constant vector ``a``
``rotation_kn``     ``x^n d_k - x^k d_n`` (conformal, ``L_X b = (2 x^k / x^n) b``)
``rotation``        ``x^k d_l - x^l d_k`` with ``k, l`` tangential (Killing)
``Y``               ``x - d_n``, tangent to the horosphere, ``div Y = n V_0``
``Y_k``             ``rotation_kn + quadratic(e_k)``, ``div Y_k = n V_k``

Tangential indices are ``1..n-1`` (one based, as in the ``k`` arguments) and
``n`` is the normal one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import halfspace as hs

__all__ = [
    "TangencyError",
    "Potential",
    "VectorFieldJet",
    "HorosphereRestriction",
    "potential",
    "vector_field",
    "conformal_deficit",
    "conformal_factor",
    "divergence",
    "horosphere_restriction",
    "growth_norms",
    "lie_derivative_b",
    "CATALOGUE",
]

CATALOGUE = ("dilation", "translation", "translation_n", "quadratic", "rotation_kn", "Y", "Y_k")


class TangencyError(ValueError):
    """The field is not tangent to the horosphere."""


@dataclass
class Potential:
    kind: int
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    coord_hess: np.ndarray


def _check_kind(kind, n):
    if not (isinstance(kind, (int, np.integer)) and 0 <= kind <= n - 1):
        raise ValueError(f"potential kind must be an integer in 0..{n - 1}, got {kind!r}")


def potential(kind, x):
    """``V_0`` (kind 0) or ``V_k`` (kind ``k``) with gradient and covariant Hessian."""
    x = hs.as_points(x)
    n = x.shape[-1]
    _check_kind(kind, n)
    t = x[..., -1]
    lead = x.shape[:-1]
    grad = np.zeros(lead + (n,))
    chess = np.zeros(lead + (n, n))
    if kind == 0:
        value = 1.0 / t
        grad[..., -1] = -(t**-2)
        chess[..., -1, -1] = 2.0 * t**-3
    else:
        k = kind - 1
        xk = x[..., k]
        value = xk / t
        grad[..., k] = 1.0 / t
        grad[..., -1] = -xk / t**2
        chess[..., k, -1] = chess[..., -1, k] = -(t**-2)
        chess[..., -1, -1] = 2.0 * xk / t**3
    gamma = hs.christoffel_b(x)
    hess = chess - np.einsum("...mij,...m->...ij", gamma, grad)
    return Potential(kind, value, grad, hess, chess)


@dataclass
class VectorFieldJet:
    kind: str
    X: np.ndarray
    gradX: np.ndarray
    dX: np.ndarray
    params: dict


def _fields(kind, x, k=None, a=None, l=None):
    """Components ``X``, coordinate gradient ``dX[i, j] = d_i X^j`` and ``nabla_i X^j``."""
    n = x.shape[-1]
    N = n - 1
    t = x[..., -1]
    lead = x.shape[:-1]
    eye = np.eye(n)
    X = np.zeros(lead + (n,))
    dX = np.zeros(lead + (n, n))
    grad = np.zeros(lead + (n, n))
    tt = t[..., None, None]

    if kind == "dilation":
        X[...] = x
        dX[...] = eye
        # nabla_i X^j = (x^i delta_jn - x^j delta_in) / x^n
        grad[..., :, N] += x / t[..., None]
        grad[..., N, :] -= x / t[..., None]
    elif kind == "translation":
        X[..., k] = 1.0
        grad[..., k, N] = 1.0 / t
        grad[..., N, k] = -1.0 / t
    elif kind == "translation_n":
        X[..., N] = 1.0
        grad[...] = -eye / tt
    elif kind == "quadratic":
        a = np.asarray(a, dtype=float)
        xa = x @ a
        xx = np.sum(x * x, axis=-1)
        X[...] = xa[..., None] * x - 0.5 * xx[..., None] * a
        dX[...] = a[:, None] * x[..., None, :] + xa[..., None, None] * eye - x[..., :, None] * a[None, :]
        an = a[N]
        T = slice(0, N)
        # tangential block: a_i x^j - x_i a^j + |x|^2 a^n / (2 x^n) delta_ij
        grad[..., T, T] = (
            a[:N, None] * x[..., None, :N]
            - x[..., :N, None] * a[None, :N]
            + (0.5 * xx * an / t)[..., None, None] * np.eye(N)
        )
        # nabla_n X^j, j tangential
        grad[..., N, T] = (
            an * x[..., :N]
            - t[..., None] * a[:N]
            - (xa / t)[..., None] * x[..., :N]
            + (0.5 * xx / t)[..., None] * a[:N]
        )
        # nabla_j X^n, j tangential
        grad[..., T, N] = (
            a[:N] * t[..., None]
            - x[..., :N] * an
            + (xa / t)[..., None] * x[..., :N]
            - (0.5 * xx / t)[..., None] * a[:N]
        )
        grad[..., N, N] = 0.5 * xx * an / t
    elif kind == "rotation_kn":
        xk = x[..., k]
        X[..., k] = t
        X[..., N] = -xk
        dX[..., N, k] = 1.0
        dX[..., k, N] = -1.0
        grad[...] = (xk / t)[..., None, None] * eye
    elif kind == "rotation":
        X[..., l] = x[..., k]
        X[..., k] = -x[..., l]
        dX[..., k, l] = 1.0
        dX[..., l, k] = -1.0
        grad[...] = dX
        grad[..., :N, N] += X[..., :N] / t[..., None]
        grad[..., N, :N] -= X[..., :N] / t[..., None]
    elif kind == "Y":
        Xd, dXd, gd = _fields("dilation", x)
        Xt, dXt, gt = _fields("translation_n", x)
        return Xd - Xt, dXd - dXt, gd - gt
    elif kind == "Y_k":
        e_k = np.zeros(n)
        e_k[k] = 1.0
        Xr, dXr, gr = _fields("rotation_kn", x, k=k)
        Xq, dXq, gq = _fields("quadratic", x, a=e_k)
        return Xr + Xq, dXr + dXq, gr + gq
    else:
        raise ValueError(f"unknown vector field kind {kind!r}")
    return X, dX, grad


def vector_field(kind, x, k=None, a=None, l=None):
    """Components and ``nabla_i X^j`` of a catalogued field.

    ``k`` and ``l`` are one-based tangential indices; ``a`` is the constant
    vector of the quadratic family.
    """
    x = hs.as_points(x)
    n = x.shape[-1]
    needs_k = kind in ("translation", "rotation_kn", "rotation", "Y_k")
    if needs_k and (k is None or not 1 <= k <= n - 1):
        raise ValueError(f"{kind} needs a tangential index k in 1..{n - 1}")
    if kind == "rotation" and (l is None or not 1 <= l <= n - 1 or l == k):
        raise ValueError("rotation needs a second tangential index l != k")
    if kind == "quadratic":
        if a is None or np.shape(a) != (n,) or not np.any(np.asarray(a) != 0):
            raise ValueError("quadratic needs a nonzero constant vector a of length n")
    elif a is not None:
        raise ValueError(f"{kind} takes no vector parameter")
    k0 = None if k is None else k - 1
    l0 = None if l is None else l - 1
    X, dX, grad = _fields(kind, x, k=k0, a=a, l=l0)
    return VectorFieldJet(kind, X, grad, dX, {"k": k, "a": a, "l": l})


def lie_derivative_b(field, x):
    """``(L_X b)_ij = b_jm nabla_i X^m + b_im nabla_j X^m``."""
    x = hs.as_points(x)
    w = x[..., -1] ** -2
    G = field.gradX
    return w[..., None, None] * (G + np.swapaxes(G, -1, -2))


def divergence(field, x=None):
    return np.trace(field.gradX, axis1=-2, axis2=-1)


def conformal_factor(field, x=None):
    """``lambda`` with ``L_X b = lambda b`` for a conformal Killing field: ``2 div X / n``."""
    n = field.gradX.shape[-1]
    return 2.0 * divergence(field) / n


def conformal_deficit(field, x):
    """``L_X b - (2/n)(div X) b``; vanishes exactly for conformal Killing fields."""
    x = hs.as_points(x)
    n = x.shape[-1]
    lam = conformal_factor(field)
    return lie_derivative_b(field, x) - (lam * x[..., -1] ** -2)[..., None, None] * np.eye(n)


@dataclass
class HorosphereRestriction:
    tangential: np.ndarray
    sym_grad: np.ndarray
    deficit: np.ndarray
    div: np.ndarray


def horosphere_restriction(field, x, tol=1e-12):
    """Restrict a field to ``x^n = 1``.

    On the horosphere the induced metric is flat and ``nabla_a X^b = d_a X^b``
    for tangent fields, so the tangential block of ``gradX`` is the intrinsic
    derivative.
    """
    x = hs.as_points(x)
    if np.any(np.abs(x[..., -1] - 1.0) > tol):
        raise ValueError("points must lie on the horosphere x^n = 1")
    if np.any(np.abs(field.X[..., -1]) > tol):
        raise TangencyError(f"{field.kind} has a normal component on the horosphere")
    N = x.shape[-1] - 1
    block = field.gradX[..., :N, :N]
    sym = block + np.swapaxes(block, -1, -2)
    div = np.trace(block, axis1=-2, axis2=-1)
    deficit = sym - (2.0 / N) * div[..., None, None] * np.eye(N)
    return HorosphereRestriction(field.X[..., :N].copy(), sym, deficit, div)


def growth_norms(field, x):
    """``(|X|_b, |nabla X|_b, (|X|_b + |nabla X|_b) / cosh r)``."""
    x = hs.as_points(x)
    nx = hs.bnorm(field.X, (1, 0), x)
    ng = hs.bnorm(field.gradX, (1, 1), x)
    return nx, ng, (nx + ng) / hs.cosh_r(x)
