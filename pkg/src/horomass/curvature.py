"""Curvature of ``g = b + e``, horosphere data and the linearised scalar curvature.

Conventions: ``Gamma[..., c, a, b] = Gamma^c_{ab}``,
``R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ce} Gamma^e_{db}
- Gamma^a_{de} Gamma^e_{cb}`` and ``Ric_{bd} = R^a_{bad}``, so the hyperbolic
metric has ``Ric = -(n - 1) b``.

The horosphere ``H = {x^n = 1}`` carries the outward normal
``eta^i = (g^{nn})^{-1/2} g^{ni}`` and ``A_{ab} = -(g^{nn})^{-1/2} Gamma^n_{ab}``;
with this sign the model horosphere has ``A = -delta`` and ``H = -(n - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import halfspace as hs
from .perturbations import DegenerateMetricError, covariant_jets

__all__ = [
    "CurvatureBundle",
    "BoundaryData",
    "christoffel_g",
    "christoffel_g_derivative",
    "curvature_g",
    "boundary_data",
    "boundary_codazzi_divergence",
    "mean_curvature_expansion_residual",
    "linearized_scalar",
    "connection_difference_residual",
    "scalar_curvature_excess",
    "mean_curvature_excess",
    "ricci_excess",
    "horosphere_excess",
]

SLICE_TOL = 1e-12


@dataclass
class CurvatureBundle:
    Gamma: np.ndarray
    dGamma: np.ndarray
    Ric: np.ndarray
    R: np.ndarray
    at: np.ndarray


@dataclass
class BoundaryData:
    A: np.ndarray
    H: np.ndarray
    eta: np.ndarray
    rho: np.ndarray
    rho_inv: np.ndarray


def christoffel_g(jet):
    return hs.christoffel_from_metric(jet.ginv, jet.dg)


def christoffel_g_derivative(jet):
    """``dGamma[..., l, c, a, b] = d_l Gamma^c_{ab}`` from the analytic second jet."""
    ginv, dg, ddg = jet.ginv, jet.dg, jet.ddg
    dginv = -np.einsum("...ce,...lef,...fd->...lcd", ginv, dg, ginv)
    lower = 0.5 * (np.einsum("...abd->...dab", dg) + np.einsum("...bad->...dab", dg) - dg)
    dlower = 0.5 * (
        np.einsum("...labd->...ldab", ddg) + np.einsum("...lbad->...ldab", ddg) - ddg
    )
    return np.einsum("...lcd,...dab->...lcab", dginv, lower) + np.einsum("...cd,...ldab->...lcab", ginv, dlower)


def curvature_g(jet, check=True):
    """Christoffel symbols, Ricci tensor and scalar curvature of ``g``."""
    if check:
        lam = np.linalg.eigvalsh(jet.x[..., -1, None, None] ** 2 * jet.g)[..., 0]
        if np.any(~(lam > 0)):
            idx = tuple(np.argwhere(~(lam > 0))[0])
            raise DegenerateMetricError(f"degenerate metric at {jet.x[idx].tolist()}")
    G = christoffel_g(jet)
    dG = christoffel_g_derivative(jet)
    # R^a_{bcd} contracted on a = c gives Ric_{bd}
    ric = (
        np.einsum("...aadb->...bd", dG)
        - np.einsum("...daab->...bd", dG)
        + np.einsum("...aae,...edb->...bd", G, G)
        - np.einsum("...ade,...eab->...bd", G, G)
    )
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    R = np.einsum("...bd,...bd->...", jet.ginv, ric)
    return CurvatureBundle(G, dG, ric, R, jet.x)


def _require_slice(x):
    if np.any(np.abs(x[..., -1] - 1.0) > SLICE_TOL):
        raise ValueError("boundary data requires points on the horosphere x^n = 1")


def boundary_data(jet, Gamma=None):
    """Second fundamental form, mean curvature, normal and induced metric on ``x^n = 1``."""
    _require_slice(jet.x)
    if Gamma is None:
        Gamma = christoffel_g(jet)
    ginv = jet.ginv
    gnn = ginv[..., -1, -1]
    lapse = gnn ** -0.5
    eta = lapse[..., None] * ginv[..., -1, :]
    rho = jet.g[..., :-1, :-1]
    lam = np.linalg.eigvalsh(rho)[..., 0]
    if np.any(~(lam > 0)):
        raise DegenerateMetricError("degenerate induced metric on the horosphere")
    rho_inv = np.linalg.inv(rho)
    A = -lapse[..., None, None] * Gamma[..., -1, :-1, :-1]
    H = np.einsum("...ab,...ab->...", rho_inv, A)
    return BoundaryData(A, H, eta, rho, rho_inv)


def boundary_codazzi_divergence(jet, curv=None):
    """``D^a (A - H rho)_{ab}`` on the horosphere, intrinsic to the induced metric.

    Returns an array with one tangential index ``b``.
    """
    _require_slice(jet.x)
    if curv is None:
        curv = curvature_g(jet, check=False)
    G, dG = curv.Gamma, curv.dGamma
    ginv, dg = jet.ginv, jet.dg
    T = slice(0, -1)
    bd = boundary_data(jet, G)
    gnn = ginv[..., -1, -1]
    dgnn = -np.einsum("...e,...lef,...f->...l", ginv[..., -1, :], dg, ginv[..., :, -1])[..., T]
    lapse = gnn**-0.5
    dlapse = -0.5 * gnn[..., None] ** -1.5 * dgnn
    Gn = G[..., -1, T, T]
    dGn = dG[..., T, -1, T, T]
    # d_c A_ab
    dA = -(dlapse[..., :, None, None] * Gn[..., None, :, :] + lapse[..., None, None, None] * dGn)
    rho_inv = bd.rho_inv
    drho = dg[..., T, T, T]
    lam = hs.christoffel_from_metric(rho_inv, drho)
    DA = dA - np.einsum("...dca,...db->...cab", lam, bd.A) - np.einsum("...dcb,...ad->...cab", lam, bd.A)
    divA = np.einsum("...ac,...cab->...b", rho_inv, DA)
    drho_inv = -np.einsum("...ae,...cef,...fb->...cab", rho_inv, drho, rho_inv)
    dH = np.einsum("...cab,...ab->...c", drho_inv, bd.A) + np.einsum("...ab,...cab->...c", rho_inv, dA)
    return divA - dH


def mean_curvature_expansion_residual(jet, H=None):
    """``2(H + n - 1) + sum_a (2 nabla_a e_an - nabla_n e_aa) + (n - 1) e_nn - 2 sum_a e_aa``.

    Vanishes to second order in ``e`` on the horosphere.
    """
    _require_slice(jet.x)
    n = jet.n
    if H is None:
        H = boundary_data(jet).H
    nab, _ = covariant_jets(jet)
    tang = np.arange(n - 1)
    first = np.sum(2.0 * nab[..., tang, tang, -1] - nab[..., -1, tang, tang], axis=-1)
    e_aa = np.sum(jet.e[..., tang, tang], axis=-1)
    return 2.0 * (H + n - 1) + first + (n - 1) * jet.e[..., -1, -1] - 2.0 * e_aa


def connection_difference_residual(jet, Gamma=None):
    """``Gamma^n_ab - delta_ab - 1/2 (nabla_a e_bn + nabla_b e_an - nabla_n e_ab)`` on ``x^n = 1``."""
    _require_slice(jet.x)
    if Gamma is None:
        Gamma = christoffel_g(jet)
    n = jet.n
    nab, _ = covariant_jets(jet)
    T = slice(0, -1)
    lin = 0.5 * (
        nab[..., T, T, -1] + np.swapaxes(nab[..., T, T, -1], -1, -2) - nab[..., -1, T, T]
    )
    return Gamma[..., -1, T, T] - np.eye(n - 1) - lin


def linearized_scalar(jet, nabnab=None):
    """``DR(e) = div(div e - dE) + (n - 1) E`` with respect to ``b``."""
    if nabnab is None:
        _, nabnab = covariant_jets(jet)
    n = jet.n
    t4 = jet.x[..., -1] ** 4
    divdiv = np.einsum("...lkkl->...", nabnab)
    lapE = np.einsum("...llii->...", nabnab)
    return t4 * (divdiv - lapE) + (n - 1) * jet.trace_b


def _difference_tensor(jet, nab):
    """``D^k_ij = Gamma(g)^k_ij - Gamma(b)^k_ij`` and the symmetrised derivative tensor ``T``."""
    T = nab + np.swapaxes(nab, -3, -2) - np.einsum("...lij->...ijl", nab)
    D = 0.5 * np.einsum("...kl,...ijl->...kij", jet.ginv, T)
    return D, T


def ricci_excess(jet, jets=None):
    """``Ric_g - Ric_b`` from the difference tensor ``D = Gamma(g) - Gamma(b)``:
    ``nabla_k D^k_ij - nabla_j D^k_ki + D^k_kp D^p_ij - D^k_jp D^p_ki``.
    """
    nab, nabnab = covariant_jets(jet) if jets is None else jets
    ginv = jet.ginv
    D, T = _difference_tensor(jet, nab)
    dT = nabnab + np.swapaxes(nabnab, -3, -2) - np.einsum("...mlij->...mijl", nabnab)
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, nab, ginv)
    dD = 0.5 * (np.einsum("...mkl,...ijl->...mkij", dginv, T) + np.einsum("...kl,...mijl->...mkij", ginv, dT))
    return (
        np.einsum("...kkij->...ij", dD)
        - np.einsum("...jkki->...ij", dD)
        + np.einsum("...kkp,...pij->...ij", D, D)
        - np.einsum("...kjp,...pki->...ij", D, D)
    )


def scalar_curvature_excess(jet, jets=None, dric=None):
    """``R_g + n(n - 1)`` without cancelling the background curvature.

    With ``Ric_b = -(n - 1) b`` one has
    ``R_g + n(n - 1) = (n - 1) g^ij e_ij + g^ij (Ric_g - Ric_b)_ij``.  Every term
    is first order in ``e`` and keeps full relative precision when ``e`` is tiny.
    """
    if dric is None:
        dric = ricci_excess(jet, jets)
    n = jet.n
    ginv = jet.ginv
    return (n - 1) * np.einsum("...ij,...ij->...", ginv, jet.e) + np.einsum("...ij,...ij->...", ginv, dric)


def horosphere_excess(jet, nab=None):
    """``(lapse - 1, D^n_ab, H + n - 1)`` on ``x^n = 1`` computed from ``g - b``.

    ``lapse = (g^nn)^(-1/2)``; ``A = -lapse (delta + D^n)`` since the background
    has ``Gamma^n_ab = delta_ab`` on the slice.
    """
    _require_slice(jet.x)
    if nab is None:
        nab, _ = covariant_jets(jet, order=1)
    n = jet.n
    D, _ = _difference_tensor(jet, nab)
    ginv = jet.ginv
    # g^{-1} - b^{-1} = -g^{-1} e b^{-1}; on the slice b = delta
    dnn = -np.einsum("...a,...a->...", ginv[..., -1, :], jet.e[..., :, -1])
    lapse_m1 = np.expm1(-0.5 * np.log1p(dnn))
    rho_inv = np.linalg.inv(jet.g[..., :-1, :-1])
    tr = np.trace(rho_inv, axis1=-2, axis2=-1)
    tr_m = -np.einsum("...ab,...ab->...", rho_inv, jet.e[..., :-1, :-1])
    Dn = D[..., -1, :-1, :-1]
    extra = np.einsum("...ab,...ab->...", rho_inv, Dn)
    H_exc = -(lapse_m1 * tr + tr_m) - (1.0 + lapse_m1) * extra
    return lapse_m1, Dn, H_exc


def mean_curvature_excess(jet, nab=None):
    """``H + n - 1`` on ``x^n = 1`` computed from ``g - b`` without cancellation."""
    return horosphere_excess(jet, nab)[2]
