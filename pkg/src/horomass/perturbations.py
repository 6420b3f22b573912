"""Metric perturbations ``e = g - b`` with analytic jets and decay audits.

Four built-in families are provided:

* :class:`ZeroFamily` -- ``e = 0``.
* :class:`BumpFamily` -- ``e_ij = A_ij exp(1/(q^2 - 1))`` for
  ``q = |x - c| / radius < 1``, optionally multiplied by ``(x^n)^{-2}`` so that
  ``A`` is read in a b-orthonormal frame.
* :class:`TailFamily` -- ``e_ij = cosh^{-tau}(r) (x^n)^{-2} S_ij(x^ / cosh r)``
  with ``S`` affine in its argument; ``|e|_b`` decays exactly like
  ``cosh^{-tau} r``.
* :class:`GaugeFamily` -- ``e = L_X b`` for ``X = psi v`` with ``psi`` a bump and
  ``v`` a constant vector.  Its linearised scalar curvature vanishes.

All jets are exact closed forms.  Arrays follow the layout
``de[..., k, i, j] = d_k e_ij`` and ``dde[..., l, k, i, j] = d_l d_k e_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import halfspace as hs
from ._jets import ScalarJet, tensor_from_scalars

__all__ = [
    "DegenerateMetricError",
    "Support",
    "MetricJet",
    "PerturbationFamily",
    "ZeroFamily",
    "BumpFamily",
    "TailFamily",
    "GaugeFamily",
    "ScaledFamily",
    "SumFamily",
    "MaskedFamily",
    "evaluate_jet",
    "covariant_jets",
    "DecayReport",
    "shell_points",
    "decay_audit",
    "bump_derivatives",
]


class DegenerateMetricError(ValueError):
    """``g = b + e`` failed to be positive definite."""


@dataclass(frozen=True)
class Support:
    kind: str = "everywhere"  # everywhere | ball | product
    center: tuple | None = None
    radius: float | None = None

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind != "ball":
            return np.ones(x.shape[:-1], dtype=bool)
        d = x - np.asarray(self.center)
        return np.sum(d * d, axis=-1) < self.radius**2


def _background_jet(x):
    """``b``, ``d b`` and ``d d b`` as full component arrays."""
    n = x.shape[-1]
    t = x[..., -1]
    eye = np.eye(n)
    b = t[..., None, None] ** -2 * eye
    db = np.zeros(x.shape[:-1] + (n, n, n))
    db[..., -1, :, :] = (-2.0 * t**-3)[..., None, None] * eye
    ddb = np.zeros(x.shape[:-1] + (n, n, n, n))
    ddb[..., -1, -1, :, :] = (6.0 * t**-4)[..., None, None] * eye
    return b, db, ddb


@dataclass
class MetricJet:
    """Second-order jet of ``g = b + e`` at a batch of points."""

    x: np.ndarray
    e: np.ndarray
    de: np.ndarray
    dde: np.ndarray

    @property
    def n(self):
        return self.x.shape[-1]

    @cached_property
    def _background(self):
        return _background_jet(self.x)

    @property
    def b(self):
        return self._background[0]

    @property
    def g(self):
        return self._background[0] + self.e

    @property
    def dg(self):
        return self._background[1] + self.de

    @property
    def ddg(self):
        return self._background[2] + self.dde

    @cached_property
    def ginv(self):
        return np.linalg.inv(self.g)

    @property
    def binv(self):
        return hs.inverse_b(self.x)

    @property
    def trace_b(self):
        """``E = tr_b e``."""
        return self.x[..., -1] ** 2 * np.trace(self.e, axis1=-2, axis2=-1)

    def scaled(self, s):
        return MetricJet(self.x, s * self.e, s * self.de, s * self.dde)


class PerturbationFamily:
    """Base class: subclasses implement :meth:`components`.

    ``tau`` is the declared decay exponent, ``support`` a :class:`Support`.
    """

    tau: float = np.inf
    support: Support = Support()
    label: str = "family"

    def components(self, x):
        raise NotImplementedError

    def __call__(self, x):
        x = hs.as_points(x)
        return self.components(x)

    def __add__(self, other):
        return SumFamily(self, other)

    def __mul__(self, s):
        return ScaledFamily(self, s)

    __rmul__ = __mul__


def _zeros(x):
    n = x.shape[-1]
    lead = x.shape[:-1]
    return np.zeros(lead + (n, n)), np.zeros(lead + (n, n, n)), np.zeros(lead + (n, n, n, n))


class ZeroFamily(PerturbationFamily):
    def __init__(self, n=3):
        self.n = n
        self.tau = np.inf
        self.support = Support("everywhere")
        self.label = "zero"

    def components(self, x):
        return _zeros(x)


def bump_derivatives(x, center, radius, order=3):
    """``psi = exp(1/(q^2 - 1))`` and its first three coordinate derivatives.

    Returns ``(psi, d psi, dd psi, ddd psi)``; all are exactly zero for
    ``q >= 1``.  With ``order=2`` the third derivative is left as ``None``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    lead = x.shape[:-1]
    psi = np.zeros(lead)
    d1 = np.zeros(lead + (n,))
    d2 = np.zeros(lead + (n, n))
    d3 = np.zeros(lead + (n, n, n)) if order >= 3 else None
    dvec = x - np.asarray(center, dtype=float)
    u = np.sum(dvec * dvec, axis=-1) / radius**2
    inside = u < 1.0
    if not np.any(inside):
        return psi, d1, d2, d3
    di = dvec[inside]
    s = 1.0 / (u[inside] - 1.0)
    beta = np.exp(s)
    b1 = -(s**2) * beta
    b2 = (s**4 + 2 * s**3) * beta
    b3 = -(s**6 + 6 * s**5 + 6 * s**4) * beta
    ui = 2.0 * di / radius**2
    uij = 2.0 * np.eye(n) / radius**2
    psi[inside] = beta
    d1[inside] = b1[:, None] * ui
    d2[inside] = b2[:, None, None] * ui[:, :, None] * ui[:, None, :] + b1[:, None, None] * uij
    if order < 3:
        return psi, d1, d2, d3
    outer3 = ui[:, :, None, None] * ui[:, None, :, None] * ui[:, None, None, :]
    sym = (
        uij[None, :, :, None] * ui[:, None, None, :]
        + uij[None, :, None, :] * ui[:, None, :, None]
        + uij[None, None, :, :] * ui[:, :, None, None]
    )
    d3[inside] = b3[:, None, None, None] * outer3 + b2[:, None, None, None] * sym
    return psi, d1, d2, d3


def _inverse_square_jet(x):
    """Jet of ``(x^n)^{-2}``."""
    n = x.shape[-1]
    t = x[..., -1]
    lead = x.shape[:-1]
    d = np.zeros(lead + (n,))
    d[..., -1] = -2.0 * t**-3
    dd = np.zeros(lead + (n, n))
    dd[..., -1, -1] = 6.0 * t**-4
    return ScalarJet(t**-2, d, dd)


class BumpFamily(PerturbationFamily):
    """Compactly supported bump ``amplitude * psi(x) * A`` (coordinate or frame)."""

    def __init__(self, center, radius, A=None, amplitude=1.0, frame=False, label="bump"):
        self.center = tuple(float(c) for c in center)
        self.n = len(self.center)
        self.radius = float(radius)
        if A is None:
            A = np.eye(self.n)
        A = np.asarray(A, dtype=float)
        if A.shape != (self.n, self.n) or not np.allclose(A, A.T):
            raise ValueError("A must be a symmetric n x n matrix")
        self.A = amplitude * A
        self.frame = frame
        self.tau = np.inf
        self.support = Support("ball", self.center, self.radius)
        self.label = label
        if self.center[-1] - self.radius <= 0:
            raise ValueError("bump support must stay inside the half-space")

    def components(self, x):
        psi, d1, d2, _ = bump_derivatives(x, self.center, self.radius, order=2)
        jet = ScalarJet(psi, d1, d2)
        if self.frame:
            jet = jet * _inverse_square_jet(x)
        return tensor_from_scalars([jet], [self.A])


def _default_tail_matrices(n, amplitude):
    m0 = np.eye(n)
    m0[0, -1] = m0[-1, 0] = 0.3
    m0[-1, -1] += 0.2
    m1 = []
    for a in range(n - 1):
        m = np.zeros((n, n))
        m[a, a] = 0.25
        m[a, -1] = m[-1, a] = 0.15
        m1.append(m)
    return amplitude * m0, [amplitude * m for m in m1]


class TailFamily(PerturbationFamily):
    """``e = cosh^{-tau}(r) (x^n)^{-2} (S0 + sum_a y_a S1[a])`` with ``y = x^/cosh r``."""

    def __init__(self, n=3, tau=None, amplitude=0.2, S0=None, S1=None, label="tail"):
        self.n = n
        self.tau = float(n / 2 + 0.6 if tau is None else tau)
        d0, d1 = _default_tail_matrices(n, amplitude)
        self.S0 = d0 if S0 is None else np.asarray(S0, dtype=float)
        self.S1 = d1 if S1 is None else [np.asarray(m, dtype=float) for m in S1]
        self.support = Support("everywhere")
        self.label = label

    def components(self, x):
        w, dw, ddw = hs.cosh_r_jet(x)
        W = ScalarJet(w, dw, ddw)
        profile = W.power(-self.tau) * _inverse_square_jet(x)
        winv = W.reciprocal()
        jets = [profile]
        mats = [self.S0]
        for a, m in enumerate(self.S1):
            jets.append(profile * (ScalarJet.coordinate(x, a) * winv))
            mats.append(m)
        return tensor_from_scalars(jets, mats)

    def closed_form(self, x):
        """Plain evaluation of ``e`` (no derivatives) for cross-checks."""
        x = hs.as_points(x)
        w = hs.cosh_r(x)
        y = x[..., :-1] / w[..., None]
        s = self.S0 + sum(y[..., a, None, None] * m for a, m in enumerate(self.S1))
        return (w**-self.tau * x[..., -1] ** -2)[..., None, None] * s


class GaugeFamily(PerturbationFamily):
    """``e = L_X b`` with ``X = amplitude * psi * v``; a pure-gauge perturbation."""

    def __init__(self, center, radius, v=None, amplitude=1.0, label="gauge"):
        self.center = tuple(float(c) for c in center)
        self.n = len(self.center)
        self.radius = float(radius)
        v = np.ones(self.n) if v is None else np.asarray(v, dtype=float)
        self.v = amplitude * v
        self.tau = np.inf
        self.support = Support("ball", self.center, self.radius)
        self.label = label

    def components(self, x):
        n = x.shape[-1]
        psi, p1, p2, p3 = bump_derivatives(x, self.center, self.radius)
        v = self.v
        t = x[..., -1]
        w0, w1, w2, w3 = t**-2, -2.0 * t**-3, 6.0 * t**-4, -24.0 * t**-5
        eye = np.eye(n)
        # e_ij = a psi delta_ij + w T_ij,  a = v^n w'(t),  T_ij = v^j d_i psi + v^i d_j psi
        a0, a1, a2 = v[-1] * w1, v[-1] * w2, v[-1] * w3
        T = p1[..., :, None] * v[None, :] + v[:, None] * p1[..., None, :]
        dT = p2[..., :, :, None] * v + np.einsum("...kj,i->...kij", p2, v)
        ddT = p3[..., :, :, :, None] * v + np.einsum("...lkj,i->...lkij", p3, v)

        e = (a0 * psi)[..., None, None] * eye + w0[..., None, None] * T

        dscal = a0[..., None] * p1
        dscal[..., -1] += a1 * psi
        de = dscal[..., :, None, None] * eye + w0[..., None, None, None] * dT
        de[..., -1, :, :] += w1[..., None, None] * T

        ddscal = a0[..., None, None] * p2
        ddscal[..., -1, :] += a1[..., None] * p1
        ddscal[..., :, -1] += a1[..., None] * p1
        ddscal[..., -1, -1] += a2 * psi
        dde = ddscal[..., :, :, None, None] * eye + w0[..., None, None, None, None] * ddT
        dde[..., -1, :, :, :] += w1[..., None, None, None] * dT
        dde[..., :, -1, :, :] += w1[..., None, None, None] * dT
        dde[..., -1, -1, :, :] += w2[..., None, None] * T
        return e, de, dde

    def vector_field(self, x):
        """``X`` and its coordinate gradient ``d_i X^j``."""
        x = hs.as_points(x)
        psi, p1, _, _ = bump_derivatives(x, self.center, self.radius, order=2)
        return psi[..., None] * self.v, p1[..., :, None] * self.v


class ScaledFamily(PerturbationFamily):
    def __init__(self, base, s):
        self.base = base
        self.s = float(s)
        self.n = getattr(base, "n", None)
        self.tau = base.tau
        self.support = base.support
        self.label = f"{self.s:g}*{base.label}"

    def components(self, x):
        e, de, dde = self.base.components(x)
        return self.s * e, self.s * de, self.s * dde


class SumFamily(PerturbationFamily):
    def __init__(self, f1, f2):
        self.parts = (f1, f2)
        self.n = getattr(f1, "n", None)
        self.tau = min(f1.tau, f2.tau)
        if f1.support.kind == "ball" and f2.support.kind == "ball":
            # conservative: a ball containing both
            c1, c2 = np.asarray(f1.support.center), np.asarray(f2.support.center)
            mid = 0.5 * (c1 + c2)
            rad = max(np.linalg.norm(c1 - mid) + f1.support.radius, np.linalg.norm(c2 - mid) + f2.support.radius)
            self.support = Support("ball", tuple(mid), float(rad))
        else:
            self.support = Support("everywhere")
        self.label = f"{f1.label}+{f2.label}"

    def components(self, x):
        a = self.parts[0].components(x)
        b = self.parts[1].components(x)
        return tuple(p + q for p, q in zip(a, b))


class MaskedFamily(PerturbationFamily):
    """``chi * e`` for a scalar jet ``chi`` supplied as a callable."""

    def __init__(self, base, chi, label=None, support=None):
        self.base = base
        self.chi = chi
        self.n = getattr(base, "n", None)
        self.tau = base.tau
        self.support = support or Support("product")
        self.label = label or f"masked {base.label}"

    def components(self, x):
        e, de, dde = self.base.components(x)
        c = self.chi(x)
        me = c.val[..., None, None] * e
        mde = c.val[..., None, None, None] * de + c.d[..., :, None, None] * e[..., None, :, :]
        mdde = (
            c.val[..., None, None, None, None] * dde
            + c.d[..., :, None, None, None] * de[..., None, :, :, :]
            + c.d[..., None, :, None, None] * de[..., :, None, :, :]
            + c.dd[..., :, :, None, None] * e[..., None, None, :, :]
        )
        return me, mde, mdde


def evaluate_jet(family, x, check=True):
    """Full :class:`MetricJet` of ``g = b + e`` at points ``x``.

    With ``check`` the metric is verified to be positive definite.
    """
    x = hs.as_points(x)
    e, de, dde = family.components(x)
    jet = MetricJet(x, e, de, dde)
    if check:
        scaled = x[..., -1, None, None] ** 2 * jet.g
        lam = np.linalg.eigvalsh(scaled)[..., 0]
        bad = ~(lam > 0)
        if np.any(bad):
            idx = tuple(np.argwhere(bad)[0])
            raise DegenerateMetricError(f"g is not positive definite at x = {x[idx].tolist()} ({family.label})")
    return jet


def covariant_jets(jet, zero_christoffel=False, order=2):
    """Background covariant derivatives ``(nabla e, nabla nabla e)``.

    ``nab[..., k, i, j] = nabla_k e_ij`` and
    ``nabnab[..., l, k, i, j] = nabla_l nabla_k e_ij``.  With
    ``zero_christoffel`` the background connection is dropped (test hook).
    With ``order=1`` only ``nab`` is computed and ``nabnab`` is ``None``.
    """
    x, e, de, dde = jet.x, jet.e, jet.de, jet.dde
    if zero_christoffel:
        return de.copy(), (dde.copy() if order == 2 else None)
    # Gamma = P / t with a constant pattern P, and d_l Gamma = -delta_ln Gamma / t
    P = hs._christoffel_pattern(jet.n)
    inv_t = 1.0 / x[..., -1]
    w1 = inv_t[..., None, None, None]

    def lower(T):
        # sum over both slots of Gamma^m_{k .} T_{.. m ..} for a 2-tensor slot pair
        a = np.einsum("mki,...mj->...kij", P, T, optimize=True)
        b = np.einsum("mkj,...im->...kij", P, T, optimize=True)
        return a + b

    ge = lower(e)
    nab = de - w1 * ge
    if order == 1:
        return nab, None
    gde = np.einsum("mki,...lmj->...lkij", P, de, optimize=True) + np.einsum(
        "mkj,...lim->...lkij", P, de, optimize=True
    )
    dnab = dde - w1[..., None] * gde
    dnab[..., -1, :, :, :] += (inv_t**2)[..., None, None, None] * ge
    nabnab = dnab - w1[..., None] * (
        np.einsum("mlk,...mij->...lkij", P, nab, optimize=True)
        + np.einsum("mli,...kmj->...lkij", P, nab, optimize=True)
        + np.einsum("mlj,...kim->...lkij", P, nab, optimize=True)
    )
    return nab, nabnab


def decay_quantity(jet):
    """``|e|_b + |nabla e|_b + |nabla nabla e|_b`` at each point."""
    nab, nabnab = covariant_jets(jet)
    x = jet.x
    return hs.bnorm(jet.e, (0, 2), x) + hs.bnorm(nab, (0, 3), x) + hs.bnorm(nabnab, (0, 4), x)


def shell_points(n, r, count, rng, side="below"):
    """Points at b-distance ``r`` from ``o`` inside ``{x^n <= 1}``.

    The height is ``t = exp(-lam r)`` for ``lam`` spread over ``[0, 1]`` so that
    both the horosphere end (``lam = 0``) and the deep end (``lam = 1``) of the
    shell are represented; the direction of ``x^`` is random.  ``side='above'``
    mirrors into the horoball ``{x^n >= 1}``.
    """
    lam = (np.arange(count) + 0.5) / count
    t = np.exp(-lam * r)
    if side == "above":
        t = 1.0 / t
    rad2 = np.maximum(2.0 * t * np.cosh(r) - t * t - 1.0, 0.0)
    dirs = rng.normal(size=(count, n - 1))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    pts = np.empty((count, n))
    pts[:, :-1] = np.sqrt(rad2)[:, None] * dirs
    pts[:, -1] = t
    return pts


@dataclass
class DecayReport:
    tau: float
    radii: np.ndarray
    shell_max: np.ndarray
    sup_weighted: float
    slope: float
    passed: bool
    slack: float = 0.3
    notes: list = field(default_factory=list)


def decay_audit(family, rmin, rmax, samples, tau=None, per_shell=24, seed=0, slack=0.3, n=None):
    """Audit ``|e|_b + |nabla e|_b + |nabla nabla e|_b = O(cosh^{-tau} r)``.

    ``samples`` radii are spaced evenly in ``[rmin, rmax]``; on each shell the
    maximum over ``per_shell`` points is recorded.  The fitted slope of
    ``log(max)`` against ``r`` must not exceed ``-tau + slack``.
    """
    if not rmin < rmax:
        raise ValueError("rmin must be below rmax")
    n = n or getattr(family, "n", None) or 3
    tau = family.tau if tau is None else tau
    rng = np.random.default_rng(seed)
    radii = np.linspace(rmin, rmax, samples)
    shell_max = np.empty(samples)
    sup = 0.0
    for j, r in enumerate(radii):
        pts = shell_points(n, r, per_shell, rng)
        q = decay_quantity(evaluate_jet(family, pts, check=False))
        shell_max[j] = q.max()
        sup = max(sup, float(np.max(np.cosh(r) ** tau * q))) if np.isfinite(tau) else sup
    notes = []
    positive = shell_max > 0
    if positive.sum() >= 2:
        slope = float(np.polyfit(radii[positive], np.log(shell_max[positive]), 1)[0])
    else:
        slope = -np.inf
        notes.append("perturbation vanishes on the sampled shells")
    passed = bool(np.isfinite(sup) and slope <= -tau + slack)
    return DecayReport(tau, radii, shell_max, sup, slope, passed, slack, notes)
