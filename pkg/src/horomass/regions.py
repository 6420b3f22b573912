"""Integration regions of the truncated half-space and their parametrisations.

Every region is a union of *pieces* in cylindrical coordinates
``x = (s * omega, t)`` with ``t = x^n``, ``s = |x^|`` and ``omega`` on the unit
sphere of the ``x^`` factor.  A piece fixes none, one or both of ``t`` and
``s``; the fixed coordinates determine the codimension and the outward
Euclidean conormal handed to integrands.

Integrands receive a :class:`Frame` and return values per point; they are
integrated against the *Euclidean* element of the piece, so metric
measures are applied through :func:`density`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import QuadratureResult, QuadratureSpec, compensated_sum, integrate_box

__all__ = [
    "RegionSpec",
    "Piece",
    "Frame",
    "rho_power",
    "region_pieces",
    "region_quadrature",
    "density",
    "unit_normal",
    "sphere_area",
    "REGION_KINDS",
]

REGION_KINDS = (
    "C", "F", "S", "c", "s", "annulus", "a_strip",
    "I1", "I2", "I3", "I4", "C_up", "F_up", "S_up", "patch",
)


def rho_power(alpha):
    """``rho(eps) = eps^{-alpha}``."""
    def rho(eps):
        return eps ** (-alpha)
    rho.alpha = alpha
    return rho


def sphere_area(m):
    """Area of the unit sphere in ``R^m``."""
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


@dataclass
class RegionSpec:
    kind: str
    n: int = 3
    eps: float | None = None
    eps1: float | None = None
    eps2: float | None = None
    alpha: float = 1.5
    rho_fn: Callable | None = None
    patch: tuple | None = None  # ((lo, hi), ...) per tangential axis, for kind 'patch'

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.n < 3:
            raise ValueError("dimension must be at least 3")
        if self.kind == "patch":
            if self.patch is None or len(self.patch) != self.n - 1:
                raise ValueError("a patch needs one (lo, hi) interval per tangential axis")
            return
        two = self.kind in ("annulus", "a_strip", "I1", "I2", "I3", "I4")
        if two:
            if self.eps1 is None or self.eps2 is None:
                raise ValueError(f"{self.kind} needs eps1 and eps2")
            if not (0 < self.eps2 <= self.eps1 < 1):
                raise ValueError("need 0 < eps2 <= eps1 < 1")
        else:
            if self.eps is None or not (0 < self.eps < 1):
                raise ValueError("eps must lie in (0, 1)")
        if self.rho(0.5) < self.rho(0.9):
            raise ValueError("rho must be decreasing in eps")

    def rho(self, eps):
        if self.rho_fn is not None:
            return float(self.rho_fn(eps))
        return float(eps ** (-self.alpha))


@dataclass
class Piece:
    t: tuple | float
    s: tuple | float | None
    sign: float = 1.0  # outward orientation of the fixed coordinate
    label: str = ""
    cartesian: tuple | None = None

    @property
    def t_fixed(self):
        return not isinstance(self.t, tuple)

    @property
    def s_fixed(self):
        return self.s is not None and not isinstance(self.s, tuple)

    @property
    def codim(self):
        return int(self.t_fixed) + int(self.s_fixed)


@dataclass
class Frame:
    x: np.ndarray
    codim: int
    normal: np.ndarray | None = None  # outward Euclidean unit conormal
    piece: Piece | None = None
    cache: dict = field(default_factory=dict)


def region_pieces(region):
    k = region.kind
    if k == "patch":
        return [Piece(1.0, None, 1.0, "patch", cartesian=tuple(tuple(p) for p in region.patch))]
    if k in ("annulus", "a_strip", "I1", "I2", "I3", "I4"):
        e1, e2 = region.eps1, region.eps2
        r1, r2 = region.rho(e1), region.rho(e2)
        if k == "annulus":
            return [Piece((e1, 1.0), (r1, r2), label="I1"), Piece((e2, e1), (0.0, r2), label="I2")]
        if k == "a_strip":
            return [Piece(1.0, (r1, r2), 1.0, "a")]
        if k == "I1":
            return [Piece((e1, 1.0), (r1, r2), label="I1")]
        if k == "I2":
            return [Piece((e2, e1), (0.0, r2), label="I2")]
        if k == "I3":
            return [Piece((1.0, 1.0 / e1), (r1, r2), label="I3")]
        return [Piece((1.0 / e1, 1.0 / e2), (0.0, r2), label="I4")]
    eps = region.eps
    rho = region.rho(eps)
    table = {
        "C": [Piece((eps, 1.0), (0.0, rho), label="C")],
        "F": [Piece(eps, (0.0, rho), -1.0, "F")],
        "S": [Piece((eps, 1.0), rho, 1.0, "S")],
        "c": [Piece(1.0, (0.0, rho), 1.0, "c")],
        "s": [Piece(1.0, rho, 1.0, "s")],
        "C_up": [Piece((1.0, 1.0 / eps), (0.0, rho), label="C_up")],
        "F_up": [Piece(1.0 / eps, (0.0, rho), 1.0, "F_up")],
        "S_up": [Piece((1.0, 1.0 / eps), rho, 1.0, "S_up")],
    }
    return table[k]


def _omega(angles, m):
    """Hyperspherical parametrisation of ``S^{m-1}`` and its Jacobian."""
    N = angles.shape[0]
    om = np.empty((N, m))
    jac = np.ones(N)
    sin_prod = np.ones(N)
    for i in range(m - 1):
        phi = angles[:, i]
        om[:, i] = sin_prod * np.cos(phi)
        jac *= np.sin(phi) ** (m - 2 - i) if i < m - 2 else 1.0
        sin_prod = sin_prod * np.sin(phi)
    om[:, m - 1] = sin_prod
    return om, jac


def _angles_of(v):
    """Inverse of :func:`_omega` for a single nonzero vector."""
    v = np.asarray(v, dtype=float)
    m = v.size
    ang = []
    for i in range(m - 2):
        rest = np.linalg.norm(v[i:])
        ang.append(math.acos(np.clip(v[i] / rest, -1, 1)) if rest > 0 else 0.0)
    ang.append(math.atan2(v[m - 1], v[m - 2]) % (2 * math.pi))
    return ang


def _axis_breaks(lo, hi, kind):
    if kind == "t":
        if hi / lo > 2.0:
            return np.geomspace(lo, hi, int(math.ceil(math.log2(hi / lo))) + 1)
        return np.array([lo, hi])
    # radial axis
    if lo == 0.0:
        if hi <= 0.5:
            return np.array([0.0, hi])
        k = int(math.ceil(math.log2(hi / 0.25)))
        return np.concatenate([[0.0], np.geomspace(hi / 2**k, hi, k + 1)])
    if hi / lo > 2.0:
        return np.geomspace(lo, hi, int(math.ceil(math.log2(hi / lo))) + 1)
    return np.array([lo, hi])


def _focus_breaks(piece, m, focus):
    """Extra breakpoints so that compact integrands are not missed by the initial grid."""
    tb, sb = [], []
    ab = [[] for _ in range(m - 1)]
    for center, radius in focus:
        c = np.asarray(center, dtype=float)
        tb += [c[-1] - radius, c[-1], c[-1] + radius]
        ch = c[:-1]
        cs = float(np.linalg.norm(ch))
        sb += [cs - radius, cs, cs + radius, max(cs - radius, 0) * 0.5 + 0.5 * (cs + radius)]
        if cs > radius:
            ang = _angles_of(ch)
            width = math.asin(min(1.0, radius / cs))
            for i, a in enumerate(ang):
                ab[i] += [a - width, a, a + width]
        else:
            sb += [0.25 * radius, 0.5 * radius]
    return tb, sb, ab


def _clip_breaks(base, extra):
    lo, hi = base[0], base[-1]
    extra = [e for e in extra if lo < e < hi]
    return np.unique(np.concatenate([base, extra]))


def region_quadrature(region, integrand, spec=QuadratureSpec(), focus=(), radial=False, warn=True):
    """Integrate ``integrand(frame)`` against the Euclidean element of ``region``.

    ``focus`` is a list of ``(center, radius)`` balls containing the support
    of compact integrands.  With ``radial`` the integrand is assumed to depend
    on ``(|x^|, x^n)`` only and the angular integral is done exactly.
    Returns a :class:`QuadratureResult` summed over the region's pieces.
    """
    n = region.n
    m = n - 1
    results = []
    for piece in region_pieces(region):
        results.append(_integrate_piece(piece, n, m, integrand, spec, focus, radial, warn))
    vals = np.array([np.asarray(r.value, dtype=float) for r in results])
    value = compensated_sum(vals, axis=0) if vals.shape[0] > 1 else vals[0]
    return QuadratureResult(
        value if np.ndim(value) else float(value),
        float(sum(r.error for r in results)),
        float(sum(r.abs_value for r in results)),
        all(r.converged for r in results),
        sum(r.cells for r in results),
        sum(r.evaluations for r in results),
        [nt for r in results for nt in r.notes],
    )


def _integrate_piece(piece, n, m, integrand, spec, focus, radial, warn):
    ranges = [r for r in (piece.t, piece.s) if isinstance(r, tuple)]
    if any(r[0] == r[1] for r in ranges):
        # empty piece, e.g. I_1 with eps1 = eps2
        return QuadratureResult(0.0, 0.0, 0.0, True, 0, 0, ["empty piece"])
    if piece.cartesian is not None:
        bounds = [np.array(b, dtype=float) for b in piece.cartesian]
        for center, radius in focus:
            for i in range(m):
                bounds[i] = _clip_breaks(bounds[i], [center[i] - radius, center[i], center[i] + radius])

        def func(u):
            x = np.empty((u.shape[0], n))
            x[:, :-1] = u
            x[:, -1] = piece.t
            normal = np.zeros((u.shape[0], n))
            normal[:, -1] = piece.sign
            return integrand(Frame(x, 1, normal, piece))

        return integrate_box(func, bounds, spec, warn=warn)

    tb, sb, ab = _focus_breaks(piece, m, focus) if focus else ([], [], [[] for _ in range(m - 1)])
    axes = []
    if not piece.t_fixed:
        axes.append(("t", _clip_breaks(_axis_breaks(*piece.t, "t"), tb)))
    if not piece.s_fixed:
        axes.append(("s", _clip_breaks(_axis_breaks(*piece.s, "s"), sb)))
    if not radial:
        for i in range(m - 1):
            top = 2 * math.pi if i == m - 2 else math.pi
            base = np.linspace(0.0, top, 5 if i == m - 2 else 3)
            extra = []
            for a in ab[i]:
                extra += [a, a - 2 * math.pi, a + 2 * math.pi] if i == m - 2 else [a]
            axes.append(("a", _clip_breaks(base, extra)))
    names = [a[0] for a in axes]
    area = sphere_area(m)

    def func(u):
        N = u.shape[0]
        col = 0
        if piece.t_fixed:
            t = np.full(N, float(piece.t))
        else:
            t = u[:, col]
            col += 1
        if piece.s_fixed:
            s = np.full(N, float(piece.s))
        else:
            s = u[:, col]
            col += 1
        if radial:
            om = np.zeros((N, m))
            om[:, 0] = 1.0
            jac = np.full(N, area)
        else:
            om, jac = _omega(u[:, col:], m)
        x = np.empty((N, n))
        x[:, :-1] = s[:, None] * om
        x[:, -1] = t
        weight = s ** (m - 1) * jac
        normal = None
        if piece.codim >= 1:
            normal = np.zeros((N, n))
            if piece.s_fixed:
                normal[:, :-1] = piece.sign * om
            else:
                normal[:, -1] = piece.sign
        vals = np.asarray(integrand(Frame(x, piece.codim, normal, piece)), dtype=float)
        return vals * weight.reshape((-1,) + (1,) * (vals.ndim - 1))

    assert len(names) == len(axes)
    return integrate_box(func, [a[1] for a in axes], spec, warn=warn)


def density(frame, G):
    """Ratio of the ``G``-measure of the frame's piece to the Euclidean one.

    ``G`` is the metric at ``frame.x`` as ``(N, n, n)``.  For codimension two
    (the sphere ``s_eps`` inside the horosphere) the induced metric of the
    horosphere is used.
    """
    if frame.codim == 0:
        return np.sqrt(np.linalg.det(G))
    if frame.codim == 1:
        Ginv = np.linalg.inv(G)
        nu = frame.normal
        return np.sqrt(np.linalg.det(G)) * np.sqrt(np.einsum("...ij,...i,...j->...", Ginv, nu, nu))
    rho = G[..., :-1, :-1]
    rinv = np.linalg.inv(rho)
    nu = frame.normal[..., :-1]
    return np.sqrt(np.linalg.det(rho)) * np.sqrt(np.einsum("...ij,...i,...j->...", rinv, nu, nu))


def unit_normal(frame, G):
    """Outward ``G``-unit conormal ``N_i`` and normal vector ``N^i``.

    For codimension two the normal lives inside the horosphere: it is the
    unit conormal of the sphere with respect to the induced metric, padded
    with a zero normal component.
    """
    if frame.codim == 1:
        Ginv = np.linalg.inv(G)
        nu = frame.normal
        norm = np.sqrt(np.einsum("...ij,...i,...j->...", Ginv, nu, nu))
        cov = nu / norm[..., None]
        return cov, np.einsum("...ij,...j->...i", Ginv, cov)
    if frame.codim == 2:
        rinv = np.linalg.inv(G[..., :-1, :-1])
        nu = frame.normal[..., :-1]
        norm = np.sqrt(np.einsum("...ij,...i,...j->...", rinv, nu, nu))
        cov = np.zeros_like(frame.normal)
        cov[..., :-1] = nu / norm[..., None]
        vec = np.zeros_like(frame.normal)
        vec[..., :-1] = np.einsum("...ij,...j->...i", rinv, cov[..., :-1])
        return cov, vec
    raise ValueError("solid pieces have no normal")
