"""Globally adaptive tensor-product Gauss-Legendre quadrature on boxes.

Each cell is integrated with an order-``p`` and an order-``p - 2`` rule; their
difference is the cell error estimate.  Cells carrying the largest errors are
bisected along every axis until the summed estimate drops below
``max(rtol * integral of |f|, atol)`` or the depth cap is reached.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = ["QuadratureSpec", "QuadratureResult", "QuadratureWarning", "integrate_box", "compensated_sum"]


class QuadratureWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    order: int = 8
    subdivisions: int = 2
    rtol: float = 1e-8
    atol: float = 1e-14
    max_depth: int = 10
    max_cells: int = 20000
    chunk: int = 40000

    def __post_init__(self):
        if self.order < 3:
            raise ValueError("quadrature order must be at least 3")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")

    def replace(self, **kw):
        d = self.__dict__.copy()
        d.update(kw)
        return QuadratureSpec(**d)


@dataclass
class QuadratureResult:
    value: np.ndarray | float
    error: float
    abs_value: float
    converged: bool
    cells: int
    evaluations: int
    notes: list = field(default_factory=list)

    def __float__(self):
        return float(np.asarray(self.value).ravel()[0])


@lru_cache(maxsize=None)
def _tensor_rule(order, dim):
    x, w = np.polynomial.legendre.leggauss(order)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrid = np.meshgrid(*([w] * dim), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=-1), axis=-1)
    return nodes, weights


def compensated_sum(values, axis=0):
    """Order-fixed ``math.fsum`` reduction along ``axis``."""
    values = np.asarray(values, dtype=float)
    moved = np.moveaxis(values, axis, -1)
    flat = moved.reshape(-1, moved.shape[-1])
    out = np.array([math.fsum(row) for row in flat])
    return out.reshape(moved.shape[:-1]) if moved.ndim > 1 else float(out[0])


def _evaluate_cells(func, lo, hi, order, chunk):
    """Order-``p`` values, error estimates and ``|f|`` integrals per cell."""
    d = lo.shape[1]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    vol = np.prod(half, axis=1)
    sums = []
    nev = 0
    for p in (order, order - 2):
        nodes, weights = _tensor_rule(p, d)
        flat = (mid[:, None, :] + half[:, None, :] * nodes[None, :, :]).reshape(-1, d)
        nev += flat.shape[0]
        v = np.concatenate(
            [np.asarray(func(flat[s:s + chunk]), dtype=float) for s in range(0, flat.shape[0], chunk)],
            axis=0,
        )
        v = v.reshape((lo.shape[0], nodes.shape[0]) + v.shape[1:])
        scale = vol.reshape((-1,) + (1,) * (v.ndim - 2))
        q = np.einsum("p,cp...->c...", weights, v) * scale
        a = np.einsum("p,cp...->c...", weights, np.abs(v)) * scale
        sums.append((q, a))
    (q_hi, a_hi), (q_lo, _) = sums
    diff = np.abs(q_hi - q_lo)
    err = diff.reshape(diff.shape[0], -1).max(axis=1)
    absq = a_hi.reshape(a_hi.shape[0], -1).max(axis=1)
    return q_hi, err, absq, nev


def _split(lo, hi):
    d = lo.shape[1]
    mid = 0.5 * (lo + hi)
    corners = np.array(np.meshgrid(*([[0, 1]] * d), indexing="ij")).reshape(d, -1).T
    clo = np.where(corners[None, :, :] == 0, lo[:, None, :], mid[:, None, :])
    chi = np.where(corners[None, :, :] == 0, mid[:, None, :], hi[:, None, :])
    return clo.reshape(-1, d), chi.reshape(-1, d)


def integrate_box(func, breakpoints, spec=QuadratureSpec(), warn=True):
    """Integrate ``func`` over the box spanned by per-axis ``breakpoints``.

    ``func`` maps an ``(N, d)`` array of parameter points to ``(N,)`` or
    ``(N, k)`` values.  Each consecutive pair of breakpoints along an axis is
    further cut into ``spec.subdivisions`` equal pieces before refinement.
    """
    axes = []
    for bp in breakpoints:
        bp = np.unique(np.asarray(bp, dtype=float))
        if bp.size < 2:
            raise ValueError("each axis needs at least two distinct breakpoints")
        pieces = [np.linspace(a, b, spec.subdivisions + 1)[:-1] for a, b in zip(bp[:-1], bp[1:])]
        axes.append(np.append(np.concatenate(pieces), bp[-1]))
    d = len(axes)
    lows = np.meshgrid(*[a[:-1] for a in axes], indexing="ij")
    highs = np.meshgrid(*[a[1:] for a in axes], indexing="ij")
    lo = np.stack([g.ravel() for g in lows], axis=-1)
    hi = np.stack([g.ravel() for g in highs], axis=-1)
    depth = np.zeros(lo.shape[0], dtype=int)

    q, err, absq, nev = _evaluate_cells(func, lo, hi, spec.order, spec.chunk)
    notes = []
    converged = False
    while True:
        total_abs = absq.sum()
        target = max(spec.rtol * total_abs, spec.atol)
        total_err = err.sum()
        if total_err <= target:
            converged = True
            break
        splittable = depth < spec.max_depth
        if not np.any(splittable) or lo.shape[0] >= spec.max_cells:
            break
        order_idx = np.argsort(-np.where(splittable, err, -1.0), kind="stable")
        cum = np.cumsum(err[order_idx])
        # smallest set of worst cells whose removal would meet the target
        need = np.searchsorted(cum, total_err - 0.5 * target) + 1
        budget = max(1, (spec.max_cells - lo.shape[0]) // (2**d))
        take = order_idx[: min(need, budget, int(splittable.sum()))]
        take = take[splittable[take]]
        if take.size == 0:
            break
        keep = np.ones(lo.shape[0], dtype=bool)
        keep[take] = False
        clo, chi = _split(lo[take], hi[take])
        cq, cerr, cabs, cnev = _evaluate_cells(func, clo, chi, spec.order, spec.chunk)
        nev += cnev
        lo = np.concatenate([lo[keep], clo])
        hi = np.concatenate([hi[keep], chi])
        depth = np.concatenate([depth[keep], np.repeat(depth[take] + 1, 2**d)])
        q = np.concatenate([q[keep], cq])
        err = np.concatenate([err[keep], cerr])
        absq = np.concatenate([absq[keep], cabs])

    value = compensated_sum(q, axis=0)
    if not converged:
        msg = f"adaptive quadrature stopped at {lo.shape[0]} cells with error {err.sum():.3e}"
        notes.append(msg)
        if warn:
            warnings.warn(msg, QuadratureWarning, stacklevel=2)
    return QuadratureResult(value, float(err.sum()), float(absq.sum()), converged, lo.shape[0], nev, notes)
