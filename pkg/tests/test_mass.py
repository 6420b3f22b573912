import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from horomass.killing import potential
from horomass.mass import (
    boundary_correction,
    default_schedule,
    divergence_U,
    flux_facet,
    flux_inner,
    mass,
    mass_at,
    mass_integrand_U,
    mass_oracle,
    volume_oracle,
)
from horomass.perturbations import BumpFamily, TailFamily, ZeroFamily, covariant_jets, evaluate_jet
from horomass.quadrature import QuadratureSpec
from horomass._jets import ScalarJet, tensor_from_scalars
from horomass.perturbations import PerturbationFamily, Support, bump_derivatives, _inverse_square_jet
from conftest import random_points

FAST = QuadratureSpec(rtol=1e-7)
CROSSING_F = BumpFamily((0.1, 0.0, 0.5), 0.2, A=np.diag([1.0, 0.5, 2.0]), amplitude=0.05)


class ConformalBump(PerturbationFamily):
    """``e = f b`` with ``f`` a bump."""

    def __init__(self, center, radius):
        self.center, self.radius, self.n = center, radius, len(center)
        self.tau = np.inf
        self.support = Support("ball", tuple(center), radius)
        self.label = "conformal"

    def components(self, x):
        psi, d1, d2, _ = bump_derivatives(x, self.center, self.radius, order=2)
        return tensor_from_scalars([ScalarJet(psi, d1, d2) * _inverse_square_jet(x)], [np.eye(self.n)])


def test_U_vanishes_for_zero_family(rng):
    x = random_points(rng, 10, 3)
    assert not np.any(mass_integrand_U(evaluate_jet(ZeroFamily(3), x), 0))


@pytest.mark.parametrize("n", [3, 4])
def test_U_closed_form_for_conformal_perturbation(n, rng):
    fam = ConformalBump((0.1,) * (n - 1) + (0.9,), 0.5)
    x = np.array(fam.center) + 0.3 * rng.uniform(-1, 1, size=(30, n))
    psi, d1, _, _ = bump_derivatives(x, fam.center, fam.radius, order=2)
    V = potential(0, x)
    t2 = x[:, -1] ** 2
    expect = (1 - n) * t2[:, None] * (V.value[:, None] * d1 - psi[:, None] * V.grad)
    got = mass_integrand_U(evaluate_jet(fam, x), V)
    assert np.allclose(got, expect, rtol=1e-12, atol=1e-14)


@given(st.floats(-1, 1), st.floats(-0.5, 0.5), st.integers(0, 2))
def test_U_linear_in_e(s, a, kind):
    x = np.array([[0.1 + a, 0.0, 0.6 + 0.2 * a], [a, -a, 1.1]])
    f1, f2 = TailFamily(3, amplitude=0.1), CROSSING_F
    j = evaluate_jet(f1 + s * f2, x, check=False)
    u = mass_integrand_U(j, kind)
    ref = mass_integrand_U(evaluate_jet(f1, x), kind) + s * mass_integrand_U(evaluate_jet(f2, x), kind)
    assert np.allclose(u, ref, rtol=1e-12, atol=1e-15)


def test_precomputed_traces_match_full_jets(rng):
    x = random_points(rng, 20, 4, lo=0.4, hi=1.5)
    jet = evaluate_jet(TailFamily(4, amplitude=0.3), x)
    nab, nabnab = covariant_jets(jet)
    for kind in range(4):
        assert np.allclose(mass_integrand_U(jet, kind), mass_integrand_U(jet, kind, nab), rtol=1e-12)
        assert np.allclose(divergence_U(jet, kind), divergence_U(jet, kind, nabnab), rtol=1e-10, atol=1e-14)


def test_flux_inner_matches_volume_oracle():
    spec = QuadratureSpec(rtol=1e-6)
    for V in (0, 1):
        val, err, (rF, rS) = flux_inner(CROSSING_F, V, 0.5, spec)
        vol = volume_oracle(CROSSING_F, V, 0.5, spec)
        assert abs(val) > 1e-4
        assert val == pytest.approx(float(vol.value), rel=1e-4)
        assert float(rS.value) == 0.0


def test_flux_zero_family_and_scaling():
    assert flux_inner(ZeroFamily(3), 0, 0.5, FAST)[0] == 0.0
    base = flux_inner(CROSSING_F, 0, 0.5, FAST)[0]
    assert flux_inner(CROSSING_F * 3.0, 0, 0.5, FAST)[0] == pytest.approx(3.0 * base, rel=1e-12)
    flipped = flux_inner(CROSSING_F, 0, 0.5, FAST, orientation=-1.0)[0]
    assert flipped == -base


def test_boundary_correction_cases():
    eps = 0.5
    rho = eps**-1.5
    assert float(boundary_correction(ZeroFamily(3), 0, eps, FAST).value) == 0.0
    diag = BumpFamily((rho, 0.0, 1.0), 0.3, A=np.diag([1.0, 2.0, 3.0]))
    assert float(boundary_correction(diag, 0, eps, FAST).value) == 0.0
    off = BumpFamily((rho, 0.0, 1.0), 0.3, A=np.array([[0, 0, 1.0], [0, 0, 0], [1.0, 0, 0]]))
    assert abs(float(boundary_correction(off, 0, eps, FAST).value)) > 1e-3


def test_boundary_correction_tail_dense_oracle():
    fam = TailFamily(3, tau=3.5)
    for eps in (0.5, 0.25, 0.125):
        rho = eps**-1.5

        def f(th):
            x = np.array([[rho * math.cos(th), rho * math.sin(th), 1.0]])
            e = fam.closed_form(x)[0]
            mu = np.array([math.cos(th), math.sin(th)])
            return potential(1, x).value[0] * (e[:2, 2] @ mu) * rho

        ref, _ = integrate.quad(f, 0, 2 * math.pi, epsabs=1e-15, epsrel=1e-12, limit=200)
        ours = float(boundary_correction(fam, 1, eps, QuadratureSpec(rtol=1e-10)).value)
        assert ours == pytest.approx(ref, rel=1e-8)


def test_mass_zero_family():
    rep = mass(ZeroFamily(3), 0, default_schedule(0.5, 4), FAST)
    assert np.all(np.abs(rep.values) < 1e-10)
    assert rep.status == "stable" and rep.M == 0.0


def test_mass_bump_stabilizes_and_matches_oracle():
    fam = BumpFamily((0.2, -0.1, 0.75), 0.3, amplitude=0.05)
    rep = mass(fam, 0, default_schedule(0.5, 5), FAST)
    assert rep.status == "stable"
    assert abs(rep.rows[0].M) > 1e-4
    assert np.ptp(rep.values[1:]) < 1e-6
    oracle, scale = mass_oracle(fam, 0, 0.0625, FAST)
    assert abs(rep.M - oracle) < 1e-4 * scale


def test_mass_row_invariant():
    row = mass_at(TailFamily(3, tau=3.5), 2, 0.25, FAST)
    assert row.M == pytest.approx(row.flux_F + row.flux_S - row.correction_s, rel=1e-14)


def test_mass_tail_converges():
    rep = mass(TailFamily(3, tau=3.5), 0, default_schedule(0.125, 5), FAST)
    assert rep.status == "converging"
    assert rep.beta > 0
    assert np.all(np.diff(rep.cauchy) < 0)


def test_mass_measure_g_agrees_in_the_limit():
    fam = TailFamily(3, tau=3.5)
    sched = default_schedule(0.125, 4)
    b = mass(fam, 1, sched, FAST)
    g = mass(fam, 1, sched, FAST, measure="g")
    gaps = np.abs(b.values - g.values)
    assert gaps[-1] < gaps[0]
    with pytest.raises(ValueError):
        mass_at(fam, 1, 0.25, FAST, measure="q")


def test_mass_schedule_validation():
    with pytest.raises(ValueError):
        mass(ZeroFamily(3), 0, [0.5, 0.25, 0.125])
    with pytest.raises(ValueError):
        mass(ZeroFamily(3), 0, [0.5, 0.25, 0.3, 0.1])
    with pytest.raises(ValueError):
        flux_inner(ZeroFamily(3), 0, 1.5)


def test_report_serialises():
    rep = mass(ZeroFamily(3), 1, default_schedule(0.5, 4), FAST)
    d = rep.to_dict()
    assert d["columns"][5] == "M_eps"
    assert len(d["rows"]) == 4 and d["status"] == "stable"
