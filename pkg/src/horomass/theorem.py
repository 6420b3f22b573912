"""Executable versions of the divergence identities, the small-terms lemma,
the cutoff construction and the evaluation of the mass by ``G`` and ``W``.

``G = Ric - R g / 2 - c g`` with ``c = (n-1)(n-2)/2`` by default (the value
that makes ``G`` vanish on hyperbolic space); ``g_constant='paper'`` selects
``c = (n-1)(n-2)`` instead.  ``W = A - H rho - (n-2) rho`` on the horosphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import halfspace as hs
from ._jets import ScalarJet
from .curvature import (
    boundary_codazzi_divergence,
    boundary_data,
    curvature_g,
    horosphere_excess,
    mean_curvature_excess,
    ricci_excess,
    scalar_curvature_excess,
)
from .killing import potential, vector_field
from .mass import default_schedule, divergence_U, mass_at, mass_integrand_U
from .perturbations import (
    MaskedFamily,
    Support,
    covariant_jets,
    decay_audit,
    decay_quantity,
    evaluate_jet,
    shell_points,
)
from .quadrature import QuadratureSpec
from .regions import Frame, RegionSpec, density, region_quadrature, sphere_area, unit_normal

__all__ = [
    "G_CONSTANTS",
    "g_constant",
    "GTensor",
    "WTensor",
    "g_tensor",
    "w_tensor",
    "IdentityReport",
    "identity_residual_scalar",
    "identity_residual_horosphere",
    "check_scalar_divergence",
    "check_horosphere_identity",
    "scaling_slope",
    "SmallTermsRow",
    "SmallTermsReport",
    "small_terms_report",
    "small_terms_bounds",
    "smooth_step",
    "CutoffMetric",
    "build_cutoff_metric",
    "cutoff_audit",
    "gauss_codazzi_residual",
    "CrossCheckRow",
    "CrossCheckReport",
    "evaluation_crosscheck",
    "PAIRS",
]

G_CONSTANTS = ("corrected", "paper")
PAIRS = {0: "Y"}  # potential kind -> field; kind k >= 1 pairs with Y_k


def g_constant(n, which="corrected"):
    if which == "corrected":
        return 0.5 * (n - 1) * (n - 2)
    if which == "paper":
        return float((n - 1) * (n - 2))
    raise ValueError(f"g_constant must be one of {G_CONSTANTS}, got {which!r}")


@dataclass
class GTensor:
    components: np.ndarray
    model_constant: float


@dataclass
class WTensor:
    components: np.ndarray


def g_tensor(jet, curv=None, which="corrected"):
    """``G = Ric - R g / 2 - c g`` at the jet's points.

    Without ``curv`` the tensor is assembled from ``g - b``:
    ``G = (Ric_g - Ric_b) + (n - 1) e - (R_g + n(n - 1)) g / 2 + (c_0 - c) g``
    with ``c_0 = (n - 1)(n - 2) / 2``, which is exactly zero when ``e = 0`` and
    ``c = c_0``.  With ``curv`` the direct formula is used.
    """
    n = jet.n
    c = g_constant(n, which)
    if curv is not None:
        comp = curv.Ric - (0.5 * curv.R + c)[..., None, None] * jet.g
        return GTensor(comp, c)
    jets = covariant_jets(jet)
    dric = ricci_excess(jet, jets)
    exc = scalar_curvature_excess(jet, dric=dric)
    c0 = 0.5 * (n - 1) * (n - 2)
    comp = dric + (n - 1) * jet.e + (c0 - c - 0.5 * exc)[..., None, None] * jet.g
    return GTensor(comp, c)


def w_tensor(jet, bd=None):
    """``W = A - H rho - (n - 2) rho`` on the horosphere.

    Without ``bd`` it is assembled from ``g - b`` as
    ``-(lapse - 1) delta - lapse D^n - (H + n - 1) rho + e_T``, exactly zero for ``e = 0``.
    """
    n = jet.n
    if bd is not None:
        return WTensor(bd.A - (bd.H + n - 2)[..., None, None] * bd.rho)
    lapse_m1, Dn, H_exc = horosphere_excess(jet)
    eye = np.eye(n - 1)
    rho = jet.g[..., :-1, :-1]
    comp = (
        -lapse_m1[..., None, None] * eye
        - (1.0 + lapse_m1)[..., None, None] * Dn
        - H_exc[..., None, None] * rho
        + jet.e[..., :-1, :-1]
    )
    return WTensor(comp)


# ---------------------------------------------------------------------------
# divergence identities


@dataclass
class IdentityReport:
    name: str
    tau: float
    radii: np.ndarray
    shell_max: np.ndarray
    slope: float
    slope_se: float
    threshold: float
    passed: bool
    slack: float = 0.3
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "name": self.name,
            "tau": self.tau,
            "radii": [float(r) for r in self.radii],
            "shell_max": [float(v) for v in self.shell_max],
            "slope": self.slope,
            "slope_se": self.slope_se,
            "threshold": self.threshold,
            "passed": bool(self.passed),
            "notes": list(self.notes),
        }


def identity_residual_scalar(jet, V):
    """``V (R_g + n(n - 1)) - nabla_i U^i``, quadratic in ``e`` for static ``V``."""
    V = V if hasattr(V, "grad") else potential(V, jet.x)
    jets = covariant_jets(jet)
    excess = scalar_curvature_excess(jet, jets)
    return V.value * excess - divergence_U(jet, V, jets[1])


def identity_residual_horosphere(jet, V):
    """``2 V (H + n - 1) + U^n + d_a(V e_an)`` on ``x^n = 1``."""
    V = V if hasattr(V, "grad") else potential(V, jet.x)
    nab, _ = covariant_jets(jet, order=1)
    U = mass_integrand_U(jet, V, nab)
    T = np.arange(jet.n - 1)
    d_flux = np.einsum("...a,...a->...", V.grad[..., T], jet.e[..., T, -1]) + V.value * np.sum(
        jet.de[..., T, T, -1], axis=-1
    )
    return 2.0 * V.value * mean_curvature_excess(jet, nab) + U[..., -1] + d_flux


def _slope_fit(radii, values):
    pos = values > 0
    if pos.sum() < 3:
        return math.nan, math.nan
    coef, cov = np.polyfit(radii[pos], np.log(values[pos]), 1, cov=True)
    return float(coef[0]), float(np.sqrt(cov[0, 0]))


def _slice_points(n, r, count, rng):
    """Points of the horosphere at distance ``r`` from ``(0, 1)``."""
    rad = math.sqrt(max(2.0 * math.cosh(r) - 2.0, 0.0))
    dirs = rng.normal(size=(count, n - 1))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    pts = np.ones((count, n))
    pts[:, :-1] = rad * dirs
    return pts


def _identity_report(name, family, V, residual, sampler, radii, tau, per_shell, seed, slack):
    n = family.n
    tau = family.tau if tau is None else tau
    radii = np.geomspace(3.0, 8.0, 8) if radii is None else np.asarray(radii, dtype=float)
    if radii.size < 8:
        raise ValueError("slope fits need at least eight radii")
    rng = np.random.default_rng(seed)
    shell_max = np.empty(radii.size)
    for j, r in enumerate(radii):
        pts = sampler(n, r, per_shell, rng)
        shell_max[j] = np.abs(residual(evaluate_jet(family, pts), V)).max()
    slope, se = _slope_fit(radii, shell_max)
    threshold = -(2.0 * tau - 1.0) + slack
    notes = []
    if np.all(shell_max == 0):
        passed = True
        notes.append("residual vanishes identically on the samples")
    else:
        passed = bool(np.isfinite(slope) and slope <= threshold)
    return IdentityReport(name, tau, radii, shell_max, slope, se, threshold, passed, slack, notes)


def check_scalar_divergence(family, V, radii=None, tau=None, per_shell=24, seed=0, slack=0.3):
    """Decay of ``V (R_g + n(n-1)) - div U`` on geodesic shells below the horosphere.

    Passes iff the fitted slope of ``log max|residual|`` against ``r`` is at
    most ``-(2 tau - 1) + slack``.
    """
    return _identity_report(
        "scalar_divergence", family, V, identity_residual_scalar,
        lambda n, r, c, rng: shell_points(n, r, c, rng), radii, tau, per_shell, seed, slack,
    )


def check_horosphere_identity(family, V, radii=None, tau=None, per_shell=24, seed=0, slack=0.3):
    """Decay of ``2V(H + n - 1) + U^n + d_a(V e_an)`` along the horosphere."""
    return _identity_report(
        "horosphere_identity", family, V, identity_residual_horosphere,
        _slice_points, radii, tau, per_shell, seed, slack,
    )


def scaling_slope(family, V, points, residual="scalar", s_values=None):
    """Fitted exponent of ``max|residual(s e)|`` against ``s``; 2 for a quadratic remainder."""
    s_values = np.geomspace(1e-3, 1e-1, 7) if s_values is None else np.asarray(s_values)
    fn = identity_residual_scalar if residual == "scalar" else identity_residual_horosphere
    base = evaluate_jet(family, points, check=False)
    vals = np.array([np.abs(fn(base.scaled(s), V)).max() for s in s_values])
    slope = float(np.polyfit(np.log(s_values), np.log(vals), 1)[0])
    return slope, s_values, vals


# ---------------------------------------------------------------------------
# small-terms lemma


def _s_moment(lo, hi, m, n):
    """``int_lo^hi (s^2 + 1)^m s^(n-2) ds`` via the incomplete beta function."""
    a = 0.5 * (n - 1)
    b = -m - a
    if b <= 0:
        return math.inf
    full = special.beta(a, b)

    def F(s):
        if math.isinf(s):
            return 1.0
        u = s * s / (1.0 + s * s)
        return special.betainc(a, b, u)

    return 0.5 * full * (F(hi) - F(lo))


def _power_integral(lo, hi, q):
    """``int_lo^hi t^q dt``."""
    if abs(q + 1) < 1e-14:
        return math.log(hi / lo)
    if math.isinf(hi):
        return -(lo ** (q + 1)) / (q + 1) if q < -1 else math.inf
    return (hi ** (q + 1) - lo ** (q + 1)) / (q + 1)


def small_terms_bounds(k, eps1, eps2, tau, n, rho, p=None):
    """``(literal, corrected)`` closed-form bounds for ``int_{I_k} cosh^{1 - 2 tau} r dv``.

    ``literal`` evaluates the chain exactly as written in the lemma's proof
    (volume weight ``t^{1-n}``, constant ``2^{1-2 tau}``, no sphere area).
    ``corrected`` is the same chain redone with the volume ``t^{-n}``, the
    constant ``2^{2 tau - 1}`` coming from ``cosh r >= (s^2 + 1) / (2 t)`` and
    the area of the unit sphere; it is a true upper bound.  ``p`` is the
    exponent of the ``t`` integrals on ``I_3, I_4`` (default ``tau``).
    """
    r1, r2 = rho(eps1), rho(eps2)
    p = tau if p is None else p
    if not 1 < p < 2 * tau - 1:
        raise ValueError("p must lie in (1, 2 tau - 1)")
    om = sphere_area(n - 1)
    lit_c = 2.0 ** (1 - 2 * tau)
    cor_c = 2.0 ** (2 * tau - 1)
    m_paper = -2 * tau + 1 - 0.5 * (n - 2 * tau - p)
    if k == 1:
        s_int = _power_integral(r1, r2, n - 4 * tau)
        lit = lit_c / (2 * tau - n + 1) * s_int
        cor = cor_c * om / (2 * tau - n) * s_int
    elif k == 2:
        lit = lit_c * _power_integral(eps2, eps1, 2 * tau - n) * _s_moment(0.0, r2, 1 - 2 * tau, n)
        cor = cor_c * _power_integral(eps2, eps1, 2 * tau - 1 - n) * om * _s_moment(0.0, r2, 1 - 2 * tau, n)
    elif k == 3:
        lit = lit_c * _power_integral(1.0, 1.0 / eps1, -p) * _s_moment(r1, r2, m_paper, n)
        cor = cor_c * _power_integral(1.0, 1.0 / eps1, -1 - p) * om * _s_moment(r1, r2, m_paper, n)
    elif k == 4:
        lit = lit_c * _power_integral(1.0 / eps1, 1.0 / eps2, -p) * _s_moment(0.0, r2, m_paper, n)
        cor = cor_c * _power_integral(1.0 / eps1, 1.0 / eps2, -1 - p) * om * _s_moment(0.0, r2, m_paper, n)
    else:
        raise ValueError("k must be 1, 2, 3 or 4")
    return lit, cor


@dataclass
class SmallTermsRow:
    eps1: float
    eps2: float
    k: int
    value: float
    error: float
    literal_bound: float
    corrected_bound: float

    def as_list(self):
        return [self.eps1, self.eps2, self.k, self.value, self.error, self.literal_bound, self.corrected_bound]


SMALL_TERMS_COLUMNS = ["eps1", "eps2", "k", "integral", "quad_error", "literal_bound", "corrected_bound"]


@dataclass
class SmallTermsReport:
    tau: float
    n: int
    rows: list
    monotone: dict
    within_literal: bool
    within_corrected: bool
    offending: list

    @property
    def passed(self):
        return all(self.monotone.values()) and self.within_corrected

    def column(self, k):
        return np.array([r.value for r in self.rows if r.k == k])

    def to_dict(self):
        return {
            "tau": self.tau,
            "n": self.n,
            "columns": SMALL_TERMS_COLUMNS,
            "rows": [r.as_list() for r in self.rows],
            "monotone": {str(k): bool(v) for k, v in self.monotone.items()},
            "within_literal": bool(self.within_literal),
            "within_corrected": bool(self.within_corrected),
            "offending": self.offending,
        }


def small_terms_report(tau, n=3, alpha=1.5, rho_fn=None, schedule=None, spec=QuadratureSpec(rtol=1e-10)):
    """``int_{I_k} cosh^{1 - 2 tau} r dv`` for ``k = 1..4`` over ``(eps1, eps1 / 2)`` pairs."""
    if not tau > n / 2:
        raise ValueError("the lemma needs tau > n / 2")
    schedule = default_schedule(0.5, 6) if schedule is None else list(schedule)
    pairs = [(e, e / 2.0) for e in schedule]
    rows = []
    offending = []

    def integrand(frame):
        return hs.cosh_r(frame.x) ** (1.0 - 2.0 * tau) * frame.x[..., -1] ** (-n)

    for e1, e2 in pairs:
        for k in (1, 2, 3, 4):
            region = RegionSpec(f"I{k}", n=n, eps1=e1, eps2=e2, alpha=alpha, rho_fn=rho_fn)
            res = region_quadrature(region, integrand, spec, radial=True)
            lit, cor = small_terms_bounds(k, e1, e2, tau, n, region.rho)
            row = SmallTermsRow(e1, e2, k, float(res.value), res.error, lit, cor)
            rows.append(row)
            if row.value > lit:
                offending.append({"k": k, "eps1": e1, "eps2": e2, "value": row.value, "bound": lit, "chain": "literal"})
            if row.value > cor:
                offending.append({"k": k, "eps1": e1, "eps2": e2, "value": row.value, "bound": cor, "chain": "corrected"})
    monotone = {}
    for k in (1, 2, 3, 4):
        col = np.array([r.value for r in rows if r.k == k])
        # strictly decreasing, and shrinking geometrically: on average by at least 1/sqrt(2) per halving
        shrink = (col[-1] / col[0]) ** (1.0 / max(len(col) - 1, 1)) if col[0] > 0 else 0.0
        monotone[k] = bool(np.all(np.diff(col) < 0) and shrink <= 2**-0.5)
    within_lit = all(r.value <= r.literal_bound for r in rows)
    within_cor = all(r.value <= r.corrected_bound for r in rows)
    return SmallTermsReport(tau, n, rows, monotone, within_lit, within_cor, offending)


# ---------------------------------------------------------------------------
# cutoff construction


def _h(z):
    """``exp(-1/z)`` for ``z > 0`` with its first two derivatives; zero otherwise."""
    z = np.asarray(z, dtype=float)
    pos = z > 0
    zp = np.where(pos, z, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        v = np.where(pos, np.exp(-1.0 / zp), 0.0)
        pos &= v > 0  # below ~1/745 the value underflows and zp**4 can too
        zp = np.where(pos, zp, 1.0)
        d1 = v / zp**2
        d2 = v * (1.0 - 2.0 * zp) / zp**4
    return v, np.where(pos, d1, 0.0), np.where(pos, d2, 0.0)


def smooth_step(z):
    """``S(z) = h(z) / (h(z) + h(1 - z))`` with derivatives; ``0`` for ``z <= 0``, ``1`` for ``z >= 1``."""
    a, a1, a2 = _h(z)
    b, b1, b2 = _h(1.0 - np.asarray(z, dtype=float))
    b1 = -b1
    den = a + b
    S = a / den
    S1 = (a1 * den - a * (a1 + b1)) / den**2
    # quotient rule twice
    num = a1 * b - a * b1
    dnum = a2 * b - a * b2
    S2 = dnum / den**2 - 2.0 * num * (a1 + b1) / den**3
    z = np.asarray(z, dtype=float)
    S = np.where(z <= 0, 0.0, np.where(z >= 1, 1.0, S))
    S1 = np.where((z <= 0) | (z >= 1), 0.0, S1)
    S2 = np.where((z <= 0) | (z >= 1), 0.0, S2)
    return S, S1, S2


@dataclass
class CutoffMetric:
    eps: float
    alpha: float
    inner: float  # eps^(1/2): g_hat = b on C(inner)
    outer: float  # eps^(3/4): g_hat = g off C(outer)
    family: MaskedFamily
    rho: object
    bounds: dict = field(default_factory=dict)

    def chi(self, x):
        return _cutoff_jet(x, self.eps, self.alpha, self.rho)

    def in_inner(self, x):
        x = np.asarray(x)
        return (x[..., -1] >= self.inner) & (x[..., -1] <= 1.0) & (
            np.linalg.norm(x[..., :-1], axis=-1) <= self.rho(self.inner)
        )

    def off_outer(self, x):
        x = np.asarray(x)
        return (x[..., -1] < self.outer) | (np.linalg.norm(x[..., :-1], axis=-1) > self.rho(self.outer))


def _chi1(t, eps):
    """``chi_1(t) = f(-log t)``; ``f`` rises from 0 at ``-log(eps)/2`` to 1 at ``-3 log(eps)/4``."""
    L = -math.log(eps)
    a, w = 0.5 * L, 0.25 * L
    S, S1, S2 = smooth_step((-np.log(t) - a) / w)
    # d/dt f(-log t) = -f'/t,  d2/dt2 = (f'' + f') / t^2
    return S, -S1 / (w * t), (S2 / w**2 + S1 / w) / t**2


def _chi2(s, eps, alpha, rho):
    lo, hi = rho(math.sqrt(eps)), rho(eps**0.75)
    w = hi - lo
    S, S1, S2 = smooth_step((s - lo) / w)
    return S, S1 / w, S2 / w**2


def _cutoff_jet(x, eps, alpha, rho):
    """Scalar jet of ``chi = 1 - (1 - chi_1)(1 - chi_2)``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    t = x[..., -1]
    xh = x[..., :-1]
    s = np.linalg.norm(xh, axis=-1)
    c1, c1d, c1dd = _chi1(t, eps)
    j1d = np.zeros(x.shape)
    j1d[..., -1] = c1d
    j1dd = np.zeros(x.shape + (n,))
    j1dd[..., -1, -1] = c1dd
    J1 = ScalarJet(c1, j1d, j1dd)
    c2, c2d, c2dd = _chi2(s, eps, alpha, rho)
    safe = np.where(s > 0, s, 1.0)
    u = xh / safe[..., None]
    j2d = np.zeros(x.shape)
    j2d[..., :-1] = c2d[..., None] * u
    proj = np.eye(n - 1) - u[..., :, None] * u[..., None, :]
    j2dd = np.zeros(x.shape + (n,))
    j2dd[..., :-1, :-1] = c2dd[..., None, None] * u[..., :, None] * u[..., None, :] + (c2d / safe)[..., None, None] * proj
    J2 = ScalarJet(c2, j2d, j2dd)
    one = ScalarJet.constant(1.0, x)
    return one - (one - J1) * (one - J2)


def _scalar_bnorms(jet, x):
    """``|chi|``, ``|nabla chi|_b`` and ``|nabla^2 chi|_b`` for a scalar jet."""
    t = x[..., -1]
    G = hs.christoffel_b(x)
    hess = jet.dd - np.einsum("...kij,...k->...ij", G, jet.d)
    return np.abs(jet.val), t * np.linalg.norm(jet.d, axis=-1), t**2 * np.linalg.norm(hess, axis=(-2, -1))


def build_cutoff_metric(family, eps, alpha=1.5, rho_fn=None, grid=400, bound_cap=1e3):
    """Glue ``g_hat = chi g + (1 - chi) b`` with ``chi = 1 - (1 - chi_1)(1 - chi_2)``.

    ``chi_1`` depends on ``x^n`` only and switches on between ``eps^(3/4)``
    and ``eps^(1/2)``; ``chi_2`` depends on ``|x^|`` and switches on between
    ``rho(eps^(1/2))`` and ``rho(eps^(3/4))``.  The sup of ``|chi|``,
    ``|nabla chi|_b`` and ``|nabla^2 chi|_b`` is recorded on dense grids, as
    is ``log(1/eps) sup |nabla chi_1|_b``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    rho = rho_fn or (lambda e: e ** (-alpha))
    n = family.n

    def chi(x):
        return _cutoff_jet(x, eps, alpha, rho)

    masked = MaskedFamily(family, chi, label=f"cutoff({family.label})", support=Support("product"))
    masked.n = n
    cm = CutoffMetric(eps, alpha, math.sqrt(eps), eps**0.75, masked, rho)

    # chi_1 on a dense grid in t across its transition
    t = np.geomspace(eps**0.8, 1.0, grid)
    x1 = np.zeros((grid, n))
    x1[:, -1] = t
    v1, g1, h1 = _scalar_bnorms(chi(x1), x1)
    # chi_2 across its transition at a few heights, and the full chi on a 2-D grid
    s = np.linspace(0.0, 1.2 * rho(eps**0.75), grid)
    tt = np.geomspace(eps**0.8, 1.0, 24)
    S, T = np.meshgrid(s, tt, indexing="ij")
    x2 = np.zeros(S.shape + (n,))
    x2[..., 0] = S
    x2[..., -1] = T
    v2, g2, h2 = _scalar_bnorms(chi(x2.reshape(-1, n)), x2.reshape(-1, n))
    L = math.log(1.0 / eps)
    cm.bounds = {
        "sup_chi": float(max(v1.max(), v2.max())),
        "min_chi": float(min(chi(x1).val.min(), chi(x2.reshape(-1, n)).val.min())),
        "sup_grad_chi": float(max(g1.max(), g2.max())),
        "sup_hess_chi": float(max(h1.max(), h2.max())),
        "log_scaled_grad_chi1": float(L * g1.max()),
        "log_scaled_hess_chi1": float(L * h1.max()),
    }
    total = cm.bounds["sup_chi"] + cm.bounds["sup_grad_chi"] + cm.bounds["sup_hess_chi"]
    cm.bounds["C"] = float(total)
    if not np.isfinite(total) or total > bound_cap:
        raise ValueError(f"cutoff derivative bounds blew up: {total}")
    return cm


def cutoff_audit(cm, base_family, samples=2000, seed=0, per_shell=24, shells=12, slack=0.3):
    """Exactness of ``g_hat`` in the prescribed shells and its decay.

    Decay is certified in two parts.  Pointwise, ``e_hat = chi e`` gives
    ``Q(g_hat) <= (|chi| + 2 |nabla chi|_b + |nabla^2 chi|_b) Q(g)`` with
    ``Q = |e|_b + |nabla e|_b + |nabla^2 e|_b``; this is checked on geodesic
    shells reaching past the gluing region.  Beyond ``r_far`` every point is
    off ``C(eps^(3/4))`` and the usual slope audit is run on ``g_hat``.
    """
    rng = np.random.default_rng(seed)
    n = base_family.n
    eps = cm.eps
    tau = base_family.tau
    # points spread over the truncated region and beyond
    t = np.exp(rng.uniform(math.log(eps**1.2), 0.0, samples))
    s = cm.rho(eps**1.2) * rng.random(samples) ** 2
    dirs = rng.normal(size=(samples, n - 1))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    x = np.empty((samples, n))
    x[:, :-1] = s[:, None] * dirs
    x[:, -1] = t
    ghat = evaluate_jet(cm.family, x, check=False)
    g = evaluate_jet(base_family, x, check=False)
    inner = cm.in_inner(x)
    outer = cm.off_outer(x)
    eq_b = bool(np.all(ghat.e[inner] == 0.0) and np.all(ghat.de[inner] == 0.0))
    eq_g = bool(np.all(ghat.e[outer] == g.e[outer]) and np.all(ghat.de[outer] == g.de[outer]))
    chi = cm.chi(x).val

    r_far = math.acosh((cm.rho(cm.outer) ** 2 + 2.0) / (2.0 * cm.outer))
    radii = np.linspace(3.0, r_far + 2.0, shells)
    dominated = True
    worst = 0.0
    sup_hat = sup_g = 0.0
    for r in radii:
        pts = shell_points(n, r, per_shell, rng)
        q_hat = decay_quantity(evaluate_jet(cm.family, pts, check=False))
        q_g = decay_quantity(evaluate_jet(base_family, pts, check=False))
        v, d1, d2 = _scalar_bnorms(cm.chi(pts), pts)
        allowed = (v + 2.0 * d1 + d2) * q_g
        ratio = np.where(allowed > 0, q_hat / np.where(allowed > 0, allowed, 1.0), 0.0)
        worst = max(worst, float(ratio.max()))
        dominated &= bool(np.all(q_hat <= allowed * (1.0 + 1e-9) + 1e-300))
        w = np.cosh(r) ** tau
        sup_hat = max(sup_hat, float(w * q_hat.max()))
        sup_g = max(sup_g, float(w * q_g.max()))
    far = decay_audit(cm.family, r_far + 0.5, r_far + 6.0, 8, tau=tau, per_shell=per_shell, seed=seed,
                      slack=slack, n=n)
    return {
        "inner_points": int(inner.sum()),
        "outer_points": int(outer.sum()),
        "equals_b_inside": eq_b,
        "equals_g_outside": eq_g,
        "chi_in_unit_interval": bool(np.all((chi >= 0) & (chi <= 1))),
        "dominated": bool(dominated),
        "domination_ratio": worst,
        "weighted_sup_ghat": sup_hat,
        "weighted_sup_g": sup_g,
        "r_far": r_far,
        "far_decay_slope": far.slope,
        "decay_passed": bool(dominated and far.passed),
        "bounds": dict(cm.bounds),
    }


# ---------------------------------------------------------------------------
# Gauss-Codazzi on the horosphere


def _field_for(V):
    return ("Y", None) if V == 0 else ("Y_k", V)


def gauss_codazzi_residual(family, field_kind, patch, spec=QuadratureSpec(rtol=1e-6), k=None):
    """``|int G(X, eta) dsigma - int X^b D^a (A - H rho)_ab dsigma|`` over a patch of ``x^n = 1``.

    Both integrands use the induced ``g`` area.  Returns ``(gap, lhs, rhs, scale)``
    with ``scale`` the integral of ``|G(X, eta)|``.
    """
    n = family.n
    region = RegionSpec("patch", n=n, patch=patch)

    def lhs_fn(frame):
        jet = evaluate_jet(family, frame.x)
        curv = curvature_g(jet)
        G = g_tensor(jet, curv).components
        X = vector_field(field_kind, frame.x, k=k).X
        bd = boundary_data(jet, curv.Gamma)
        area = density(frame, jet.g)
        val = np.einsum("...ij,...i,...j->...", G, X, bd.eta)
        return np.stack([val * area, np.abs(val) * area], axis=-1)

    def rhs_fn(frame):
        jet = evaluate_jet(family, frame.x)
        div = boundary_codazzi_divergence(jet)
        X = vector_field(field_kind, frame.x, k=k).X
        return np.einsum("...b,...b->...", X[..., :-1], div) * density(frame, jet.g)

    focus = [(family.support.center, family.support.radius)] if family.support.kind == "ball" else []
    L = region_quadrature(region, lhs_fn, spec, focus=focus)
    R = region_quadrature(region, rhs_fn, spec, focus=focus)
    lhs, scale = (float(v) for v in L.value)
    rhs = float(R.value)
    return abs(lhs - rhs), lhs, rhs, scale


# ---------------------------------------------------------------------------
# evaluation of the mass by G and W


@dataclass
class CrossCheckRow:
    eps: float
    lhs: float
    rhs_G: float
    rhs_W: float
    gap: float
    rel_gap: float

    @property
    def rhs(self):
        return self.rhs_G + self.rhs_W

    def as_list(self):
        return [self.eps, self.lhs, self.rhs_G, self.rhs_W, self.rhs, self.gap, self.rel_gap]


CROSSCHECK_COLUMNS = ["eps", "lhs_half_2_minus_n_M", "rhs_G_flux", "rhs_W_boundary", "rhs_total", "gap", "rel_gap"]


@dataclass
class CrossCheckReport:
    potential: int
    field: str
    g_constant: str
    rows: list
    passed: bool
    rtol: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "potential": self.potential,
            "field": self.field,
            "g_constant": self.g_constant,
            "columns": CROSSCHECK_COLUMNS,
            "rows": [r.as_list() for r in self.rows],
            "passed": bool(self.passed),
            "rtol": self.rtol,
            "notes": list(self.notes),
        }


def _rhs_integrals(family, V, eps, spec, alpha, rho_fn, which, metric):
    """``int_{F u S} G(X, nu) dsigma_g`` and ``int_{s_eps} W(X, mu) dlambda_g``."""
    n = family.n
    kind, k = _field_for(V)
    src = family if metric == "g" else build_cutoff_metric(family, eps, alpha, rho_fn).family
    sup = getattr(family, "support", None)
    ball = sup is not None and sup.kind == "ball" and metric == "g"
    model = 0.5 * (n - 1) * (n - 2) - g_constant(n, which)

    def g_flux(frame):
        X = vector_field(kind, frame.x, k=k).X
        out = np.empty(frame.x.shape[0])
        mask = sup.contains(frame.x) if ball else np.ones(frame.x.shape[0], dtype=bool)
        if np.any(~mask):
            # unperturbed region: G = model * b exactly
            sub = Frame(frame.x[~mask], frame.codim, frame.normal[~mask], frame.piece)
            b = hs.metric_b(sub.x)
            cov, vec = unit_normal(sub, b)
            out[~mask] = model * np.einsum("...i,...i->...", X[~mask], cov) * density(sub, b)
        if np.any(mask):
            sub = Frame(frame.x[mask], frame.codim, frame.normal[mask], frame.piece)
            jet = evaluate_jet(src, sub.x)
            G = g_tensor(jet, which=which).components
            cov, vec = unit_normal(sub, jet.g)
            out[mask] = np.einsum("...ij,...i,...j->...", G, X[mask], vec) * density(sub, jet.g)
        return out

    def w_flux(frame):
        X = vector_field(kind, frame.x, k=k).X
        out = np.zeros(frame.x.shape[0])
        mask = sup.contains(frame.x) if ball else np.ones(frame.x.shape[0], dtype=bool)
        if np.any(mask):
            sub = Frame(frame.x[mask], frame.codim, frame.normal[mask], frame.piece)
            jet = evaluate_jet(src, sub.x)
            W = w_tensor(jet).components
            _, mu = unit_normal(sub, jet.g)
            out[mask] = np.einsum("...ab,...a,...b->...", W, X[mask][..., :-1], mu[..., :-1]) * density(sub, jet.g)
        return out

    focus = [(sup.center, sup.radius)] if sup is not None and sup.kind == "ball" else []
    vals = []
    for kind_r, fn in (("F", g_flux), ("S", g_flux), ("s", w_flux)):
        region = RegionSpec(kind_r, n=n, eps=eps, alpha=alpha, rho_fn=rho_fn)
        vals.append(region_quadrature(region, fn, spec, focus=focus))
    return math.fsum([float(vals[0].value), float(vals[1].value)]), float(vals[2].value), vals


def evaluation_crosscheck(family, V, schedule=None, spec=QuadratureSpec(), alpha=1.5, rho_fn=None,
                          g_constant_mode="corrected", measure="b", metric="g", rtol=1e-3, atol=1e-12):
    """Compare ``(2 - n) M_eps / 2`` with the ``G`` flux plus the ``W`` boundary term.

    ``V = 0`` pairs with ``Y``; ``V = k`` pairs with ``Y_k``.  ``metric='glued'``
    evaluates the right side with the cutoff metric instead of ``g``.
    The check passes when the relative gap at the smallest ``eps`` is below
    ``rtol`` and, for perturbations without compact support, the gap does
    not grow along the schedule.
    """
    if alpha <= 4.0 / 3.0 and rho_fn is None:
        raise ValueError("the evaluation needs rho(eps) = eps^-alpha with alpha > 4/3")
    schedule = default_schedule() if schedule is None else list(schedule)
    n = family.n
    rows = []
    for eps in schedule:
        Mrow = mass_at(family, V, eps, spec, n, alpha, rho_fn, measure)
        lhs = 0.5 * (2 - n) * Mrow.M
        G, W, _ = _rhs_integrals(family, V, eps, spec, alpha, rho_fn, g_constant_mode, metric)
        gap = abs(lhs - (G + W))
        scale = max(abs(lhs), abs(G + W))
        rel = gap / scale if scale > atol else (0.0 if gap <= atol else math.inf)
        rows.append(CrossCheckRow(eps, lhs, G, W, gap, rel))
    notes = []
    last = rows[-1]
    ok = last.rel_gap < rtol or last.gap <= atol
    compact = getattr(family, "support", Support()).kind == "ball"
    if not compact:
        gaps = np.array([r.gap for r in rows])
        if gaps[-1] > gaps[0]:
            ok = False
            notes.append("gap grows along the schedule")
    field_name = "Y" if V == 0 else f"Y_{V}"
    return CrossCheckReport(int(V), field_name, g_constant_mode, rows, bool(ok), rtol, notes)
