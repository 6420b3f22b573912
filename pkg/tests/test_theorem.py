import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horomass.curvature import curvature_g
from horomass.halfspace import metric_b
from horomass.mass import default_schedule
from horomass.perturbations import BumpFamily, TailFamily, ZeroFamily, evaluate_jet, shell_points
from horomass.quadrature import QuadratureSpec
from horomass.theorem import (
    build_cutoff_metric,
    check_horosphere_identity,
    check_scalar_divergence,
    cutoff_audit,
    evaluation_crosscheck,
    g_constant,
    g_tensor,
    gauss_codazzi_residual,
    scaling_slope,
    small_terms_bounds,
    small_terms_report,
    smooth_step,
    w_tensor,
)
from conftest import random_points


@pytest.mark.parametrize("n", [3, 4, 5])
def test_G_vanishes_on_model_only_with_corrected_constant(n, rng):
    x = random_points(rng, 12, n)
    jet = evaluate_jet(ZeroFamily(n), x)
    assert not np.any(g_tensor(jet).components)
    assert np.allclose(g_tensor(jet, curvature_g(jet)).components, 0.0, atol=1e-10)
    paper = g_tensor(jet, which="paper").components
    assert np.allclose(paper, -0.5 * (n - 1) * (n - 2) * metric_b(x), rtol=1e-13)
    x[:, -1] = 1.0
    assert not np.any(w_tensor(evaluate_jet(ZeroFamily(n), x)).components)
    with pytest.raises(ValueError):
        g_constant(n, "other")


def test_G_excess_form_matches_direct_curvature(rng):
    x = random_points(rng, 30, 3, lo=0.3, hi=1.5)
    jet = evaluate_jet(TailFamily(3, amplitude=0.3), x)
    for which in ("corrected", "paper"):
        a = g_tensor(jet, which=which).components
        b = g_tensor(jet, curvature_g(jet), which=which).components
        assert np.allclose(a, b, rtol=1e-8, atol=1e-9)


@pytest.mark.parametrize("n", [3, 4])
def test_divergence_identities_decay_at_quadratic_rate(n):
    fam = TailFamily(n, tau=n / 2 + 0.6)
    for V in range(n):
        for check in (check_scalar_divergence, check_horosphere_identity):
            rep = check(fam, V)
            assert rep.passed, (check.__name__, V, rep.slope, rep.threshold)
            assert rep.slope < -(2 * fam.tau - 1) + rep.slack


def test_identities_vanish_for_model(rng):
    rep = check_scalar_divergence(ZeroFamily(3), 0)
    assert rep.passed and np.all(rep.shell_max == 0)
    with pytest.raises(ValueError):
        check_scalar_divergence(ZeroFamily(3), 0, radii=[1, 2, 3])


def test_residual_is_quadratic_in_e(rng):
    shell = shell_points(3, 2.0, 16, rng)
    slice_ = np.column_stack([rng.uniform(-3, 3, (16, 2)), np.ones(16)])
    for residual, pts in (("scalar", shell), ("horosphere", slice_)):
        slope, _, vals = scaling_slope(TailFamily(3, amplitude=1.0), 1, pts, residual)
        assert slope == pytest.approx(2.0, abs=0.05)


@given(st.floats(0.0, 1.0))
def test_smooth_step(z):
    S, S1, _ = smooth_step(np.array([z]))
    assert 0.0 <= S[0] <= 1.0 and S1[0] >= 0.0
    h = 1e-6
    if 1e-3 < z < 1 - 1e-3:
        fd = (smooth_step(np.array([z + h]))[0] - smooth_step(np.array([z - h]))[0]) / (2 * h)
        assert S1[0] == pytest.approx(fd[0], rel=1e-5, abs=1e-9)
    S0, _, _ = smooth_step(np.array([-0.5, 0.0, 1.0, 1.5]))
    assert list(S0) == [0.0, 0.0, 1.0, 1.0]


def test_cutoff_jet_matches_finite_differences(rng):
    cm = build_cutoff_metric(TailFamily(3), 1e-2)
    x = np.column_stack([rng.uniform(-900, 900, 40), rng.uniform(-900, 900, 40), np.exp(rng.uniform(-4.2, -2, 40))])
    jet = cm.chi(x)
    h = 1e-6
    for i in range(3):
        step = np.zeros(3)
        step[i] = h * (1.0 if i == 2 else 1e3)
        fd = (cm.chi(x + step).val - cm.chi(x - step).val) / (2 * step[i])
        assert np.allclose(jet.d[:, i], fd, rtol=1e-4, atol=1e-6 / (1e3 if i < 2 else 1))


@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_cutoff_metric_exact_and_bounded(eps):
    fam = TailFamily(3)
    cm = build_cutoff_metric(fam, eps)
    audit = cutoff_audit(cm, fam, samples=1500)
    assert audit["inner_points"] > 0 and audit["outer_points"] > 0
    assert audit["equals_b_inside"] and audit["equals_g_outside"]
    assert audit["chi_in_unit_interval"]
    assert audit["dominated"] and audit["decay_passed"]
    assert cm.bounds["C"] < 50
    assert cm.bounds["log_scaled_grad_chi1"] < 20


def test_cutoff_bounds_are_uniform_in_eps():
    a = build_cutoff_metric(TailFamily(3), 1e-2).bounds
    b = build_cutoff_metric(TailFamily(3), 1e-4).bounds
    assert b["log_scaled_grad_chi1"] == pytest.approx(a["log_scaled_grad_chi1"], rel=0.05)
    assert b["C"] <= a["C"] * 1.05


def test_small_terms_lemma():
    rep = small_terms_report(2.1, 3)
    assert all(rep.monotone.values())
    assert rep.within_corrected and rep.passed
    assert not rep.within_literal
    assert all(o["chain"] == "literal" for o in rep.offending)
    with pytest.raises(ValueError):
        small_terms_report(1.4, 3)


def test_small_terms_bounds_validation():
    rho = lambda e: e**-1.5
    lit, cor = small_terms_bounds(2, 0.5, 0.25, 2.1, 3, rho)
    assert cor > 0 and lit > 0
    with pytest.raises(ValueError):
        small_terms_bounds(5, 0.5, 0.25, 2.1, 3, rho)
    with pytest.raises(ValueError):
        small_terms_bounds(3, 0.5, 0.25, 2.1, 3, rho, p=4.0)


@pytest.mark.parametrize("field, k", [("Y", None), ("Y_k", 1), ("Y_k", 2)])
def test_gauss_codazzi_on_horosphere(field, k):
    fam = BumpFamily((0.1, -0.1, 1.0), 0.4, A=np.array([[1, 0.3, 0.5], [0.3, 2, -0.4], [0.5, -0.4, 1]]))
    gap, lhs, rhs, scale = gauss_codazzi_residual(fam, field, ((-0.6, 0.6), (-0.6, 0.6)), k=k)
    assert scale > 1e-3
    assert gap < 1e-6 * scale


def test_evaluation_model_metric_separates_constants():
    sched = default_schedule(0.5, 4)
    good = evaluation_crosscheck(ZeroFamily(3), 0, sched)
    assert good.passed and all(r.gap == 0.0 for r in good.rows)
    bad = evaluation_crosscheck(ZeroFamily(3), 0, sched, g_constant_mode="paper")
    assert not bad.passed
    with pytest.raises(ValueError):
        evaluation_crosscheck(ZeroFamily(3), 0, sched, alpha=4 / 3)


def test_evaluation_tail_agrees():
    rep = evaluation_crosscheck(TailFamily(3, tau=2.1), 1, default_schedule(0.25, 4), QuadratureSpec(rtol=1e-7))
    assert rep.passed, [r.as_list() for r in rep.rows]
    gaps = [r.gap for r in rep.rows]
    assert gaps[-1] < gaps[0]
