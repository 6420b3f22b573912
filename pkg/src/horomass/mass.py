"""The mass integrand, its facet fluxes and the mass as a limit over a schedule of ``eps``.

For a static potential ``V`` and ``g = b + e`` the integrand is

    U = V div e - V dE + E dV - e(grad V, .),     E = tr_b e,

with every contraction taken with ``b``; its divergence is
``V (div div e - Lap E) + E Lap V - <e, Hess V>``, which is ``V DR(e)`` for
static ``V``.  The mass at truncation ``eps`` is

    M_eps = int_{F_eps u S_eps} U . n dsigma - int_{s_eps} V e_an mu^a dlambda.

Measures and unit normals follow ``b`` by default; ``measure='g'`` switches
both to ``g``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import halfspace as hs
from .killing import potential
from .perturbations import MetricJet, covariant_jets, evaluate_jet
from .quadrature import QuadratureSpec
from .regions import Frame, RegionSpec, density, region_quadrature, unit_normal

__all__ = [
    "MassRow",
    "MassReport",
    "mass_integrand_U",
    "divergence_U",
    "flux_inner",
    "flux_facet",
    "boundary_correction",
    "volume_oracle",
    "mass_oracle",
    "mass_at",
    "mass",
    "family_focus",
    "on_support",
    "default_schedule",
    "MEASURES",
]

MEASURES = ("b", "g")


def default_schedule(eps0=0.5, points=6):
    return [eps0 * 2.0**-j for j in range(points)]


def family_focus(family):
    sup = getattr(family, "support", None)
    if sup is not None and sup.kind == "ball":
        return [(sup.center, sup.radius)]
    return []


def _as_potential(V, x):
    return V if hasattr(V, "grad") else potential(V, x)


@lru_cache(maxsize=None)
def _contractions(n):
    """Constant linear functionals giving the traces of the covariant jets.

    At a point of height ``t`` the background connection scales like
    ``1/t`` and its derivative like ``1/t^2``, so
    ``sum_a nab[a, a, i] = c_div[i] . (de, e / t)`` and
    ``sum nabnab[l, k, k, l] - sum nabnab[l, l, i, i] = c2 . dde + c1 . de / t + c0 . e / t^2``.
    The coefficients are read off by pushing unit jets through
    :func:`covariant_jets` at ``t = 1``.
    """
    sizes = (n * n, n**3, n**4)
    total = sum(sizes)
    basis = np.eye(total)
    e = basis[:, : sizes[0]].reshape(total, n, n)
    de = basis[:, sizes[0] : sizes[0] + sizes[1]].reshape(total, n, n, n)
    dde = basis[:, sizes[0] + sizes[1] :].reshape(total, n, n, n, n)
    x = np.zeros((total, n))
    x[:, -1] = 1.0
    nab, nabnab = covariant_jets(MetricJet(x, e, de, dde))
    div = np.einsum("...aai->...i", nab)
    grad_tr = np.einsum("...iaa->...i", nab)
    dd = np.einsum("...lkkl->...", nabnab) - np.einsum("...llii->...", nabnab)
    first = slice(0, sizes[0] + sizes[1])
    return div[first], grad_tr[first], dd, sizes


def _apply_first(op, jet, sizes):
    t = jet.x[..., -1]
    lead = jet.x.shape[:-1]
    e = jet.e.reshape(lead + (sizes[0],))
    de = jet.de.reshape(lead + (sizes[1],))
    return de @ op[sizes[0]:] + (e @ op[: sizes[0]]) / t[..., None]


def mass_integrand_U(jet, V, nab=None):
    """``U^i`` (index raised with ``b``) at the jet's points.

    ``V`` is a potential kind (``0..n-1``) or a :class:`Potential` evaluated at
    the same points.  Passing ``nab`` uses the full covariant jet instead of
    the precomputed traces.
    """
    V = _as_potential(V, jet.x)
    t2 = jet.x[..., -1] ** 2
    if nab is None:
        c_div, c_grad, _, sizes = _contractions(jet.n)
        div_e = _apply_first(c_div, jet, sizes)
        dtr = _apply_first(c_grad, jet, sizes)
    else:
        div_e = np.einsum("...aai->...i", nab)
        dtr = np.einsum("...iaa->...i", nab)
    v = V.value[..., None]
    E = jet.trace_b[..., None]
    e_dV = np.einsum("...ij,...j->...i", jet.e, V.grad)
    lower = t2[..., None] * (v * (div_e - dtr) - e_dV) + E * V.grad
    return t2[..., None] * lower


def divergence_U(jet, V, nabnab=None):
    """``nabla_i U^i`` from the second jet of ``e`` and the Hessian of ``V``."""
    V = _as_potential(V, jet.x)
    t = jet.x[..., -1]
    t2 = t * t
    t4 = t2 * t2
    if nabnab is None:
        _, _, dd, sizes = _contractions(jet.n)
        lead = jet.x.shape[:-1]
        a, b = sizes[0], sizes[0] + sizes[1]
        second = (
            jet.dde.reshape(lead + (sizes[2],)) @ dd[b:]
            + (jet.de.reshape(lead + (sizes[1],)) @ dd[a:b]) / t
            + (jet.e.reshape(lead + (sizes[0],)) @ dd[:a]) / t2
        )
    else:
        second = np.einsum("...lkkl->...", nabnab) - np.einsum("...llii->...", nabnab)
    lapV = t2 * np.trace(V.hess, axis1=-2, axis2=-1)
    e_hess = t4 * np.einsum("...ij,...ij->...", jet.e, V.hess)
    return V.value * t4 * second + jet.trace_b * lapV - e_hess


def on_support(family, frame, fn):
    """Evaluate ``fn(frame)`` only where a ball-supported family is nonzero."""
    sup = getattr(family, "support", None)
    if sup is None or sup.kind != "ball":
        return fn(frame)
    mask = sup.contains(frame.x)
    out = np.zeros(frame.x.shape[0])
    if np.any(mask):
        normal = None if frame.normal is None else frame.normal[mask]
        out[mask] = fn(Frame(frame.x[mask], frame.codim, normal, frame.piece))
    return out


def _metric(frame, jet, measure):
    if measure == "b":
        return hs.metric_b(frame.x)
    if measure == "g":
        return jet.g
    raise ValueError(f"measure must be one of {MEASURES}, got {measure!r}")


def _flux_integrand(family, V, measure, orientation):
    def local(frame):
        jet = evaluate_jet(family, frame.x)
        U = mass_integrand_U(jet, V)
        G = _metric(frame, jet, measure)
        cov, _ = unit_normal(frame, G)
        return orientation * np.einsum("...i,...i->...", U, cov) * density(frame, G)

    return lambda frame: on_support(family, frame, local)


def _region(kind, eps, n, alpha, rho_fn):
    return RegionSpec(kind, n=n, eps=eps, alpha=alpha, rho_fn=rho_fn)


def flux_facet(family, V, kind, eps, spec=QuadratureSpec(), n=None, alpha=1.5, rho_fn=None,
               measure="b", orientation=1.0, warn=True):
    """``int U . n dsigma`` over one facet (``F``, ``S``, ``c``, ``F_up``, ``S_up`` or ``a_strip``)."""
    n = n or family.n
    region = _region(kind, eps, n, alpha, rho_fn)
    return region_quadrature(region, _flux_integrand(family, V, measure, orientation), spec,
                             focus=family_focus(family), warn=warn)


def flux_inner(family, V, eps, spec=QuadratureSpec(), n=None, alpha=1.5, rho_fn=None,
               measure="b", orientation=1.0, warn=True):
    """Flux of ``U`` through ``F_eps`` and ``S_eps`` with the outward normal of ``C_eps``.

    ``orientation=-1`` declares the opposite normal.  Returns ``(value, error, parts)``
    with ``parts`` the two :class:`QuadratureResult` objects.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    rF = flux_facet(family, V, "F", eps, spec, n, alpha, rho_fn, measure, orientation, warn)
    rS = flux_facet(family, V, "S", eps, spec, n, alpha, rho_fn, measure, orientation, warn)
    return math.fsum([float(rF.value), float(rS.value)]), rF.error + rS.error, (rF, rS)


def boundary_correction(family, V, eps, spec=QuadratureSpec(), n=None, alpha=1.5, rho_fn=None,
                        measure="b", warn=True):
    """``int_{s_eps} V e_an mu^a dlambda`` on the sphere ``|x^| = rho(eps)`` of the horosphere."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    n = n or family.n
    region = _region("s", eps, n, alpha, rho_fn)

    def local(frame):
        jet = evaluate_jet(family, frame.x)
        Vp = _as_potential(V, frame.x)
        G = _metric(frame, jet, measure)
        _, mu = unit_normal(frame, G)
        ean = jet.e[..., :-1, -1]
        return Vp.value * np.einsum("...a,...a->...", ean, mu[..., :-1]) * density(frame, G)

    return region_quadrature(region, lambda frame: on_support(family, frame, local), spec, focus=family_focus(family), warn=warn)


def volume_oracle(family, V, eps, spec=QuadratureSpec(), n=None, alpha=1.5, rho_fn=None, kind="C", warn=True):
    """``int_{C_eps} nabla_i U^i dv`` with the ``b`` volume.

    By the divergence theorem this equals the outward flux of ``U`` through
    all of ``dC_eps``, i.e. ``flux_inner`` plus the flux through ``c_eps``.
    """
    n = n or family.n
    region = _region(kind, eps, n, alpha, rho_fn)

    def local(frame):
        jet = evaluate_jet(family, frame.x)
        return divergence_U(jet, V) * frame.x[..., -1] ** (-n)

    return region_quadrature(region, lambda frame: on_support(family, frame, local), spec, focus=family_focus(family), warn=warn)


def mass_oracle(family, V, eps, spec=QuadratureSpec(), n=None, alpha=1.5, rho_fn=None, warn=True):
    """``M_eps`` by the divergence theorem: ``int_C div U - flux through c_eps - correction``.

    Returns ``(value, scale)`` with ``scale`` the largest of ``int_C |div U|``
    and the two boundary terms, the natural size for a relative comparison.
    """
    vol = volume_oracle(family, V, eps, spec, n, alpha, rho_fn, warn=warn)
    top = float(flux_facet(family, V, "c", eps, spec, n, alpha, rho_fn, warn=warn).value)
    corr = float(boundary_correction(family, V, eps, spec, n, alpha, rho_fn, warn=warn).value)
    return math.fsum([float(vol.value), -top, -corr]), max(vol.abs_value, abs(top), abs(corr))


@dataclass
class MassRow:
    eps: float
    rho: float
    flux_F: float
    flux_S: float
    correction_s: float
    M: float
    error: float
    converged: bool

    def as_list(self):
        return [self.eps, self.rho, self.flux_F, self.flux_S, self.correction_s, self.M, self.error, int(self.converged)]


MASS_COLUMNS = ["eps", "rho", "flux_F", "flux_S", "correction_s", "M_eps", "quad_error", "quad_converged"]


@dataclass
class MassReport:
    potential: int
    family: str
    measure: str
    rows: list
    cauchy: np.ndarray
    M: float
    C: float
    beta: float
    status: str
    warnings: list = field(default_factory=list)

    @property
    def values(self):
        return np.array([r.M for r in self.rows])

    def table(self):
        return [r.as_list() for r in self.rows]

    def to_dict(self):
        return {
            "potential": self.potential,
            "family": self.family,
            "measure": self.measure,
            "columns": MASS_COLUMNS,
            "rows": self.table(),
            "cauchy": [float(c) for c in self.cauchy],
            "M": self.M,
            "C": self.C,
            "beta": self.beta,
            "status": self.status,
            "warnings": list(self.warnings),
        }


def mass_at(family, V, eps, spec=QuadratureSpec(), n=None, alpha=1.5, rho_fn=None, measure="b", warn=True):
    """One row ``(flux_F, flux_S, correction_s, M_eps)`` at truncation ``eps``."""
    n = n or family.n
    value, err, (rF, rS) = flux_inner(family, V, eps, spec, n, alpha, rho_fn, measure, warn=warn)
    rc = boundary_correction(family, V, eps, spec, n, alpha, rho_fn, measure, warn=warn)
    M = math.fsum([float(rF.value), float(rS.value), -float(rc.value)])
    rho = RegionSpec("C", n=n, eps=eps, alpha=alpha, rho_fn=rho_fn).rho(eps)
    ok = rF.converged and rS.converged and rc.converged
    return MassRow(eps, rho, float(rF.value), float(rS.value), float(rc.value), M, err + rc.error, ok)


def _fit_limit(eps, M, cauchy, atol, window=4):
    """Rate from the trailing Cauchy differences, then ``M_eps = M + C eps^beta`` on the last four points.

    Early entries of a schedule are often preasymptotic, so both fits use
    only the trailing ``window`` differences and the last four values.
    """
    eps = np.asarray(eps)
    M = np.asarray(M)
    tail_e, tail_M = eps[-4:], M[-4:]
    c_tail = cauchy[-window:]
    e_tail = eps[1:][-window:]
    if np.all(c_tail <= atol):
        return float(M[-1]), 0.0, math.nan
    pos = c_tail > atol
    if pos.sum() >= 2:
        beta = float(np.polyfit(np.log(e_tail[pos]), np.log(c_tail[pos]), 1)[0])
    else:
        beta = math.nan
    if not np.isfinite(beta) or beta <= 0:
        return float(M[-1]), math.nan, beta
    A = np.stack([np.ones_like(tail_e), tail_e**beta], axis=1)
    (Mlim, C), *_ = np.linalg.lstsq(A, tail_M, rcond=None)
    return float(Mlim), float(C), beta


def mass(family, V, schedule=None, spec=QuadratureSpec(), n=None, alpha=1.5, rho_fn=None,
         measure="b", atol=1e-10):
    """Evaluate ``M_eps`` along a strictly decreasing schedule and extrapolate ``eps -> 0``.

    ``status`` is ``'stable'`` when the trailing Cauchy differences are all
    below ``atol`` (a compactly supported perturbation swallowed by the
    region), ``'converging'`` when the trailing differences decrease with a
    positive fitted rate and ``'non-cauchy'`` otherwise.  Quadrature caps add ``'warn'``
    notes but never raise.
    """
    schedule = default_schedule() if schedule is None else list(schedule)
    if len(schedule) < 4:
        raise ValueError("the eps schedule needs at least four points")
    if any(b >= a for a, b in zip(schedule[:-1], schedule[1:])):
        raise ValueError("the eps schedule must be strictly decreasing")
    n = n or family.n
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = [mass_at(family, V, e, spec, n, alpha, rho_fn, measure) for e in schedule]
    notes += sorted({str(w.message) for w in caught})
    Ms = np.array([r.M for r in rows])
    cauchy = np.abs(np.diff(Ms))
    Mlim, C, beta = _fit_limit(schedule, Ms, cauchy, atol)
    window = cauchy[-4:]
    if np.all(cauchy[-3:] <= atol):
        status = "stable"
    elif np.isfinite(beta) and beta > 0 and np.all(np.diff(window) < 0):
        status = "converging"
    else:
        status = "non-cauchy"
    if not all(r.converged for r in rows):
        notes.append("quadrature did not reach tolerance on some facet")
    return MassReport(int(getattr(V, "kind", V)), family.label, measure, rows, cauchy, Mlim, C, beta, status, notes)
