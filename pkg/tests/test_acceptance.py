"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances.

Criteria that the mathematics does not support as literally stated are still
evaluated exactly as stated.  Their tests are marked ``xfail(strict=True)``
with the reason, so the printed line reads FAIL and the suite flags it if the
outcome ever changes.
"""

import filecmp
import math
import os
from fractions import Fraction

import numpy as np
import pytest

from horomass import halfspace as hs
from horomass.cli import main
from horomass.curvature import curvature_g, linearized_scalar
from horomass.killing import (
    CATALOGUE,
    conformal_deficit,
    conformal_factor,
    divergence,
    growth_norms,
    horosphere_restriction,
    potential,
    vector_field,
)
from horomass.mass import default_schedule, flux_facet, flux_inner, mass, mass_oracle, volume_oracle
from horomass.perturbations import BumpFamily, GaugeFamily, TailFamily, ZeroFamily, evaluate_jet, shell_points
from horomass.quadrature import QuadratureSpec
from horomass.theorem import (
    build_cutoff_metric,
    check_horosphere_identity,
    check_scalar_divergence,
    cutoff_audit,
    evaluation_crosscheck,
    scaling_slope,
    small_terms_report,
)

SEED = 20240611
DIMS = (3, 4)


@pytest.fixture
def announce(capsys):
    def _say(k, passed, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'} criterion {k:2d}: {detail}")
        return passed

    return _say


def _points(rng, count, n, lo=0.05, hi=5.0, spread=4.0):
    x = np.empty((count, n))
    x[:, :-1] = rng.uniform(-spread, spread, size=(count, n - 1))
    x[:, -1] = np.exp(rng.uniform(math.log(lo), math.log(hi), size=count))
    return x


def _catalogue(n):
    out = [("dilation", {}), ("translation_n", {}), ("Y", {})]
    out += [("quadratic", {"a": a}) for a in (np.arange(1.0, n + 1), np.eye(n)[-1], np.eye(n)[0])]
    for k in range(1, n):
        out += [("translation", {"k": k}), ("rotation_kn", {"k": k}), ("Y_k", {"k": k})]
    return out


# 1 -------------------------------------------------------------------------


def _christoffel_by_hand(x):
    n = x.shape[-1]
    G = np.zeros(x.shape[:-1] + (n, n, n))
    t = x[..., -1]
    for j in range(n):
        for i in range(n):
            for k in range(n):
                v = 0.0
                if k == n - 1 and i == j:
                    v -= 1.0
                if i == n - 1 and k == j:
                    v -= 1.0
                if j == n - 1 and i == k and i != n - 1:
                    v += 1.0
                if i == j == k == n - 1:
                    v = -1.0
                G[..., j, i, k] = v / t
    return G


def test_criterion_01_background(announce):
    rng = np.random.default_rng(SEED)
    worst_hand = worst_gen = worst_R = 0.0
    for n in DIMS:
        x = _points(rng, 1000, n)
        G = hs.christoffel_b(x)
        t = x[:, -1]
        dg = np.zeros((1000, n, n, n))
        dg[:, -1] = (-2.0 * t**-3)[:, None, None] * np.eye(n)
        generic = hs.christoffel_from_metric(hs.inverse_b(x), dg)
        scale = 1.0 / t[:, None, None, None]
        worst_hand = max(worst_hand, float(np.max(np.abs(G - _christoffel_by_hand(x)) / scale)))
        worst_gen = max(worst_gen, float(np.max(np.abs(G - generic) / scale)))
        R = curvature_g(evaluate_jet(ZeroFamily(n), x)).R
        worst_R = max(worst_R, float(np.max(np.abs(R + n * (n - 1)))))
    ok = worst_hand < 1e-12 and worst_gen < 1e-12 and worst_R < 1e-9
    assert announce(1, ok, f"Christoffel vs closed form {worst_hand:.1e}, vs generic {worst_gen:.1e} "
                           f"(relative to 1/x^n, tol 1e-12); |R(b) + n(n-1)| {worst_R:.1e} (tol 1e-9)")


# 2 -------------------------------------------------------------------------

QUADRATIC_REASON = (
    "L_X b for X = <x,a>x - |x|^2 a/2 is <x,x> a^n / x^n times b (checked symbolically); "
    "the stated 1/2 <x,x> a^n / x^n is off by a factor 2"
)


@pytest.mark.xfail(strict=True, reason=QUADRATIC_REASON)
def test_criterion_02_killing_catalogue(announce):
    rng = np.random.default_rng(SEED + 2)
    deficit = 0.0
    gaps = {}
    for n in DIMS:
        x = _points(rng, 200, n)
        t = x[:, -1]
        xx = np.sum(x * x, axis=-1)
        kinds = set()
        for kind, kw in _catalogue(n):
            f = vector_field(kind, x, **kw)
            kinds.add(kind)
            deficit = max(deficit, float(np.abs(conformal_deficit(f, x)).max() * np.min(t) ** 2))
            lam = conformal_factor(f)
            stated = {
                "dilation": 0.0 * t,
                "translation": 0.0 * t,
                "translation_n": -2.0 / t,
                "rotation_kn": 2.0 * x[:, kw.get("k", 1) - 1] / t,
                "quadratic": 0.5 * xx * kw.get("a", np.ones(n))[-1] / t,
            }
            if kind in stated:
                gap = float(np.max(np.abs(lam - stated[kind]) / (1 + np.abs(stated[kind]))))
                gaps[kind] = max(gaps.get(kind, 0.0), gap)
        assert kinds == set(CATALOGUE)
    bad = sorted(k for k, g in gaps.items() if g >= 1e-10)
    ok = deficit < 1e-10 and not bad
    detail = f"max conformal deficit {deficit:.1e} over {len(CATALOGUE)} kinds (tol 1e-10); "
    detail += "stated factors match" if not bad else (
        f"stated factor mismatch for {', '.join(bad)} (max gap {max(gaps[k] for k in bad):.2f}; "
        "the factor is <x,x>a^n/x^n, twice the stated value)")
    assert announce(2, ok, detail)


# 3 -------------------------------------------------------------------------


def _exact_potential(kind, p):
    t = p[-1]
    if kind == 0:
        return Fraction(1) / t, -Fraction(1) / t**2
    return p[kind - 1] / t, -p[kind - 1] / t**2


def test_criterion_03_static_potentials(announce):
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    exact = True
    for n in DIMS:
        x = _points(rng, 500, n, lo=0.2)
        for kind in range(n):
            V = potential(kind, x)
            res = V.hess - V.value[:, None, None] * hs.metric_b(x)
            worst = max(worst, float(np.abs(res).max()))
            for _ in range(50):
                p = [Fraction(int(rng.integers(-30, 31)), int(rng.integers(1, 17))) for _ in range(n - 1)]
                p.append(Fraction(1))
                value, dn = _exact_potential(kind, p)
                exact &= dn == -value
                # the package value agrees with the exact rational to rounding
                pf = np.array([float(c) for c in p])
                Vf = potential(kind, pf)
                exact &= abs(Vf.grad[-1] + Vf.value) == 0.0
    ok = worst < 1e-9 and exact
    assert announce(3, ok, f"max |hess V - V b| {worst:.1e} (tol 1e-9); d_n V = -V on x^n = 1 "
                           f"{'exact' if exact else 'violated'} at rational points for V0 and every Vk")


# 4 -------------------------------------------------------------------------


def _field_components(kind, p, k=None):
    """Euclidean components of ``Y = x - d_n`` or ``Y_k = x^n d_k - x^k d_n + x^k x - |x|^2 d_k / 2``."""
    n = len(p)
    if kind == "Y":
        return [c - (1 if i == n - 1 else 0) for i, c in enumerate(p)]
    j = k - 1
    xx = sum(c * c for c in p)
    X = [p[j] * c for c in p]
    X[j] += p[-1] - xx / 2
    X[-1] -= p[j]
    return X


def _exact_divergence(kind, p, k=None):
    """``d_i X^i - n X^n / x^n``, with exact central differences (the components are quadratic)."""
    n = len(p)
    d = Fraction(0)
    for i in range(n):
        up = list(p)
        dn = list(p)
        up[i] += 1
        dn[i] -= 1
        d += (_field_components(kind, up, k)[i] - _field_components(kind, dn, k)[i]) / 2
    return d - n * _field_components(kind, p, k)[-1] / p[-1]


def test_criterion_04_pairing(announce):
    rng = np.random.default_rng(SEED + 4)
    exact = True
    worst = 0.0
    horo = 0.0
    for n in DIMS:
        for _ in range(100):
            p = [Fraction(int(rng.integers(-30, 31)), int(rng.integers(1, 17))) for _ in range(n - 1)]
            p.append(Fraction(int(rng.integers(1, 40)), int(rng.integers(1, 9))))
            x = np.array([float(c) for c in p])
            for kind in range(n):
                name, k = ("Y", None) if kind == 0 else ("Y_k", kind)
                value = _exact_potential(kind, p)[0]
                exact &= _exact_divergence(name, p, k) == n * value
                got = float(divergence(vector_field(name, x, k=k)))
                worst = max(worst, abs(got - n * float(value)) / max(1.0, abs(n * float(value))))
        xs = _points(rng, 200, n)
        xs[:, -1] = 1.0
        for kind in range(n):
            name, k = ("Y", None) if kind == 0 else ("Y_k", kind)
            r = horosphere_restriction(vector_field(name, xs, k=k), xs)
            V = potential(kind, xs).value
            horo = max(horo, float(np.max(np.abs(r.div - (n - 1) * V) / (1 + np.abs(V)))))
    ok = exact and worst < 1e-13 and horo < 1e-13
    assert announce(4, ok, f"div Y = n V0, div Y_k = n Vk {'exact' if exact else 'violated'} in rationals "
                           f"(float64 package values within {worst:.1e}); div_H = (n-1) V within {horo:.1e}")


# 5 -------------------------------------------------------------------------

GROWTH_REASON = (
    "(|X|_b + |nabla X|_b) / cosh r is not bounded by 4: toward the boundary point x = 0 one has "
    "cosh r ~ 1/(2 x^n), |Y|_b ~ 1/x^n and |nabla Y|_b ~ sqrt(n)/x^n, so the ratio for Y tends to "
    "2(1 + sqrt(n)); for Y_k it stays near 3"
)


@pytest.mark.xfail(strict=True, reason=GROWTH_REASON)
def test_criterion_05_growth(announce):
    rng = np.random.default_rng(SEED + 5)
    sup = {}
    origin_gap = 0.0
    for n in DIMS:
        d = rng.normal(size=(10_000, n))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        x = hs.geodesic_sphere_points(rng.uniform(0.0, 10.0, 10_000), d)
        for kind in range(n):
            name, k = ("Y", None) if kind == 0 else ("Y_k", kind)
            _, _, ratio = growth_norms(vector_field(name, x, k=k), x)
            sup[(n, name)] = max(sup.get((n, name), 0.0), float(ratio.max()))
        t = np.exp(rng.uniform(-5, 5, 100))
        axis = np.zeros((100, n))
        axis[:, -1] = t
        _, ng, _ = growth_norms(vector_field("Y", axis), axis)
        origin_gap = max(origin_gap, float(np.max(np.abs(ng * t / math.sqrt(n) - 1.0))))
    worst = max(sup.values())
    ok = worst <= 4.0 and origin_gap < 1e-12
    top = ", ".join(f"{name}(n={n}) {v:.3f}" for (n, name), v in sorted(sup.items()) if v > 4.0)
    assert announce(5, ok, f"sup (|X|+|nabla X|)/cosh r = {worst:.3f} over 1e4 samples with r <= 10 (bound 4)"
                           f"{'; exceeded by ' + top if top else ''}; |nabla Y| = sqrt(n)/x^n on the axis "
                           f"to {origin_gap:.1e}")


# 6 -------------------------------------------------------------------------


def test_criterion_06_linearization(announce):
    rng = np.random.default_rng(SEED + 6)
    bump = BumpFamily((0.1, -0.1, 1.0), 0.6, A=np.array([[1.0, 0.2, 0.1], [0.2, 0.5, 0.3], [0.1, 0.3, 0.8]]),
                      amplitude=0.2, frame=True)
    x = np.array([0.1, -0.1, 1.0]) + 0.3 * rng.uniform(-1, 1, size=(50, 3))
    base = evaluate_jet(bump, x)
    DR = linearized_scalar(base)
    s = np.geomspace(1e-2, 1e-4, 5)
    err = np.array([np.abs((curvature_g(base.scaled(v)).R + 6.0) / v - DR).max() for v in s])
    order = float(np.polyfit(np.log(s), np.log(err), 1)[0])
    gauge = GaugeFamily((0.1, 0.2, 0.9), 0.5, v=[0.3, -0.4, 0.7], amplitude=1.0)
    xg = np.array([0.1, 0.2, 0.9]) + 0.4 * rng.uniform(-1, 1, size=(2000, 3))
    jg = evaluate_jet(gauge, xg, check=False)
    dr_gauge = float(np.abs(linearized_scalar(jg)).max())
    ok = abs(order - 1.0) <= 0.1 and dr_gauge < 1e-6
    assert announce(6, ok, f"observed order {order:.3f} (1.0 +- 0.1); max |DR(L_X b)| {dr_gauge:.1e} "
                           f"for the gauge family with |e| up to {np.abs(jg.e).max():.2f} (tol 1e-6)")


# 7 -------------------------------------------------------------------------


def test_criterion_07_divergence_identities(announce):
    rng = np.random.default_rng(SEED + 7)
    slopes = []
    fits = []
    for n in DIMS:
        fam = TailFamily(n, tau=n / 2 + 0.6)
        shell = shell_points(n, 2.0, 24, rng)
        sl = np.ones((24, n))
        sl[:, :-1] = rng.uniform(-3, 3, size=(24, n - 1))
        for V in range(n):
            for residual, pts in (("scalar", shell), ("horosphere", sl)):
                slopes.append(scaling_slope(fam, V, pts, residual)[0])
            for check in (check_scalar_divergence, check_horosphere_identity):
                fits.append(check(fam, V, seed=SEED))
    scale_ok = all(abs(v - 2.0) <= 0.2 for v in slopes)
    decay_ok = all(r.passed for r in fits)
    worst = max(fits, key=lambda r: r.slope - r.threshold)
    ok = scale_ok and decay_ok
    assert announce(7, ok, f"scaling slopes in [{min(slopes):.3f}, {max(slopes):.3f}] (2.0 +- 0.2); "
                           f"decay slopes all <= -(2 tau - 1) + 0.3, tightest {worst.slope:.2f} vs "
                           f"{worst.threshold:.2f} ({worst.name}, tau {worst.tau:g})")


# 8 -------------------------------------------------------------------------

BOUNDS_REASON = (
    "the closed-form bounds as written in the proof use the volume weight x^(1-n), the constant "
    "2^(1-2 tau) and no sphere area; they are exceeded, while the corrected chain holds"
)


@pytest.mark.xfail(strict=True, reason=BOUNDS_REASON)
def test_criterion_08_small_terms(announce):
    rep = small_terms_report(2.1, 3)
    mono = all(rep.monotone.values())
    lit = [o for o in rep.offending if o["chain"] == "literal"]
    worst = max((o["value"] / o["bound"] for o in lit), default=0.0)
    ok = mono and rep.within_literal
    assert announce(8, ok, f"I1..I4 decreasing to 0: {mono}; proof bounds exceeded in {len(lit)} of "
                           f"{len(rep.rows)} cases (worst ratio {worst:.2f}); corrected chain "
                           f"{'holds' if rep.within_corrected else 'also fails'}")


# 9 -------------------------------------------------------------------------


def test_criterion_09_mass_existence(announce):
    spec = QuadratureSpec(rtol=1e-7)
    zero = [mass(ZeroFamily(3), V, default_schedule(0.5, 6), spec) for V in range(3)]
    zero_max = max(float(np.abs(r.values).max()) for r in zero)

    bump = BumpFamily((0.2, -0.1, 0.75), 0.3, amplitude=0.05)
    reps = [mass(bump, V, default_schedule(0.5, 5), spec) for V in range(3)]
    spread = max(float(np.ptp(r.values[1:])) for r in reps)
    oracle_rel = 0.0
    for V, r in zip(range(3), reps):
        val, scale = mass_oracle(bump, V, r.rows[-1].eps, spec)
        oracle_rel = max(oracle_rel, abs(r.M - val) / scale)
    # at eps = 1/2 the bump crosses F and the flux is nonzero
    ospec = QuadratureSpec(rtol=1e-6)
    cross = flux_inner(bump, 0, 0.5, ospec)[0]
    cross_vol = float(volume_oracle(bump, 0, 0.5, ospec).value) - float(flux_facet(bump, 0, "c", 0.5, ospec).value)
    cross_rel = abs(cross - cross_vol) / abs(cross_vol)

    tail = [mass(TailFamily(3, tau=3.5), V, default_schedule(0.125, 6), spec) for V in range(3)]
    tail_ok = all(r.status == "converging" and r.beta > 0 and np.all(np.diff(r.cauchy) < 0) for r in tail)
    ok = (zero_max < 1e-10 and all(r.status == "stable" for r in reps) and spread < 1e-6
          and oracle_rel < 1e-4 and cross_rel < 1e-4 and tail_ok)
    assert announce(9, ok, f"zero family max |M| {zero_max:.1e}; bump M_eps spread {spread:.1e} once swallowed, "
                           f"oracle gap {oracle_rel:.1e} of the integral scale, inner flux vs volume "
                           f"{cross_rel:.1e} at eps 1/2; tail tau 3.5 betas "
                           f"{', '.join(f'{r.beta:.2f}' for r in tail)} with decreasing Cauchy columns")


# 10 ------------------------------------------------------------------------


def test_criterion_10_evaluation(announce):
    spec = QuadratureSpec(rtol=1e-7)
    sched = [0.5, 0.25, 0.125, 0.0625]
    # a bump straddling F at the smallest eps, amplitude in the b-orthonormal frame
    bump = BumpFamily((0.1, -0.05, 0.0625), 0.04, amplitude=1e-4, frame=True)
    reps = [evaluation_crosscheck(bump, V, sched, spec, alpha=1.5) for V in range(3)]
    rel = max(r.rows[-1].rel_gap for r in reps)
    nonzero = min(abs(r.rows[-1].lhs) for r in reps) > 0
    zero = [evaluation_crosscheck(ZeroFamily(3), V, sched, spec) for V in range(3)]
    both_zero = all(row.lhs == 0 and row.rhs == 0 for r in zero for row in r.rows)
    paper = [evaluation_crosscheck(ZeroFamily(3), V, sched, spec, g_constant_mode="paper") for V in range(3)]
    paper_bump = evaluation_crosscheck(bump, 0, sched, spec, g_constant_mode="paper")
    paper_fails = not any(r.passed for r in paper) and not paper_bump.passed
    ok = all(r.passed for r in reps) and rel < 1e-3 and nonzero and both_zero and paper_fails
    assert announce(10, ok, f"max rel gap {rel:.1e} at eps 0.0625 over (V0,Y), (V1,Y_1), (V2,Y_2) (tol 1e-3); "
                            f"e = 0 gives 0 = 0 with the corrected constant; the constant (n-1)(n-2) "
                            f"{'fails' if paper_fails else 'passes'} (e = 0 gap {paper[0].rows[-1].gap:.1e})")


# 11 ------------------------------------------------------------------------


def test_criterion_11_cutoff(announce):
    fam = TailFamily(3)
    audits = []
    for eps in (1e-2, 1e-3):
        cm = build_cutoff_metric(fam, eps, grid=800)
        audits.append(cutoff_audit(cm, fam, samples=4000, seed=SEED))
    exact = all(a["equals_b_inside"] and a["equals_g_outside"] and a["inner_points"] and a["outer_points"]
                for a in audits)
    decay = all(a["decay_passed"] for a in audits)
    b = [a["bounds"] for a in audits]
    bounded = all(x["sup_chi"] <= 1 and x["min_chi"] >= 0 and np.isfinite(x["C"]) for x in b)
    uniform = b[1]["C"] <= 1.05 * b[0]["C"] and abs(b[1]["log_scaled_grad_chi1"] / b[0]["log_scaled_grad_chi1"] - 1) < 0.05
    ok = exact and decay and bounded and uniform
    assert announce(11, ok, f"g_hat = b inside and = g outside exactly: {exact}; decay audit at tau {fam.tau:g}: "
                            f"{decay} (far slopes {audits[0]['far_decay_slope']:.2f}, "
                            f"{audits[1]['far_decay_slope']:.2f}); C = {b[0]['C']:.2f}, {b[1]['C']:.2f}; "
                            f"log(1/eps) sup|grad chi1| = {b[0]['log_scaled_grad_chi1']:.2f}, "
                            f"{b[1]['log_scaled_grad_chi1']:.2f}")


# 12 ------------------------------------------------------------------------


def test_criterion_12_determinism(announce, tmp_path, capsys):
    runs = []
    for label in ("a", "b"):
        out = tmp_path / label
        codes = [
            main(["all", "--family", "zero", "--seed", "5", "--out", str(out / "zero")]),
            main(["verify-identities", "--seed", "5", "--out", str(out / "tail")]),
            main(["decay-audit", "--seed", "5", "--out", str(out / "tail-decay")]),
        ]
        capsys.readouterr()
        runs.append((out, codes))
    compared = 0
    same = True
    for sub in ("zero", "tail", "tail-decay"):
        a, b = runs[0][0] / sub, runs[1][0] / sub
        names = sorted(f for f in os.listdir(a) if f.endswith(".csv") or f == "manifest.json")
        same &= names == sorted(f for f in os.listdir(b) if f.endswith(".csv") or f == "manifest.json")
        for name in names:
            compared += 1
            same &= filecmp.cmp(a / name, b / name, shallow=False)
    ok = same and runs[0][1] == runs[1][1] == [0, 0, 0]
    assert announce(12, ok, f"{compared} CSV and manifest files byte-identical across two runs with seed 5")
