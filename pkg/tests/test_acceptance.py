"""Acceptance suite: eight end-to-end criteria at their stated tolerances.

Each ``criterion_k`` returns ``(passed, detail)``; the pytest wrappers print
one ``PASS``/``FAIL`` line per criterion and then assert. Run this file as a
script to print the same lines without pytest.
"""
import math
import sys
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))
import oracles  # noqa: E402

from harmonic_visibility import harmonic as hm  # noqa: E402
from harmonic_visibility import montecarlo as mc  # noqa: E402
from harmonic_visibility import surfaces as sf  # noqa: E402
from harmonic_visibility.harmonic import BooleanModel  # noqa: E402
from harmonic_visibility.numerics import RngStream, dkw_epsilon  # noqa: E402

mpmath.mp.dps = 40


def _line(k, passed, detail):
    return f"criterion {k}: {'PASS' if passed else 'FAIL'} ({detail})"


# --- 1. exponential visible range -------------------------------------------------------


def criterion_1():
    model = BooleanModel(1.0, 0.5)
    trials, r_max = 100_000, 8.0
    ok, parts = True, []
    for space in (mc.Euclidean(2), mc.Hyperbolic(2)):
        start = time.perf_counter()
        emp = mc.run_experiment(space, model, trials, r_max, seed=1)
        elapsed = time.perf_counter() - start
        rate = model.lam * hm.tube_coefficient(space.harmonic_space, model.rho)
        ks = mc.ks_against_exponential(emp, rate, alpha=0.01)
        mean_err = abs(emp.mean_estimate() * rate - 1.0)
        passed = ks.passed and mean_err <= 0.02 and elapsed < 60.0
        ok &= passed
        parts.append(
            f"{space.harmonic_space.name}: D={ks.d_stat:.4g} < {ks.threshold:.4g}, "
            f"mean err {mean_err:.2%}, {elapsed:.1f}s"
        )
    return ok, "; ".join(parts)


# --- 2. formula goldens against high-precision evaluation -------------------------------


def _kappa(k):
    k = mpmath.mpf(k)
    return mpmath.pi ** (k / 2) / mpmath.gamma(k / 2 + 1)


def _reference_table():
    """``(space, a_rho(rho) as mp function, entropy)`` from the per-family displays."""
    sh, ch = mpmath.sinh, mpmath.cosh
    rows = []
    for n in range(2, 9):
        rows.append((hm.Flat(n), lambda r, n=n: _kappa(n - 1) * r ** (n - 1), 0))
    for n in range(2, 9):
        rows.append((hm.RH(n), lambda r, n=n: _kappa(n - 1) * sh(r) ** (n - 1), n - 1))
    for m in range(2, 5):
        rows.append((hm.CH(m), lambda r, m=m: _kappa(2 * m - 1) * sh(r) ** (2 * m - 1) * ch(r), 2 * m))
    rows.append((hm.HH(2), lambda r: _kappa(7) * sh(r) ** 7 * ch(r) ** 3, 10))
    rows.append((hm.OH2(), lambda r: _kappa(15) * sh(r) ** 15 * ch(r) ** 7, 22))
    return rows


def _rel(a, b):
    return abs(float(a) - float(b)) / abs(float(b))


def criterion_2():
    worst = 0.0
    for space, a_ref, h_ref in _reference_table():
        if hm.volume_entropy(space) != h_ref:
            return False, f"{space.name}: entropy {hm.volume_entropy(space)} != {h_ref}"
        for rho in (0.25, 0.5, 1.0, 2.0):
            a = a_ref(mpmath.mpf(rho))
            worst = max(worst, _rel(hm.tube_coefficient(space, rho), a))
            lam_c = hm.critical_intensity(space, rho)
            if h_ref == 0:
                if lam_c is not hm.ALWAYS_FINITE:
                    return False, f"{space.name}: expected always-finite threshold"
            else:
                worst = max(worst, _rel(lam_c, h_ref / a))
                if space.q == 0:
                    n = space.dim
                    closed = (n - 1) / (_kappa(n - 1) * mpmath.sinh(rho) ** (n - 1))
                    worst = max(worst, _rel(lam_c, closed))
    return worst <= 1e-12, f"max relative deviation {worst:.2e} over {len(_reference_table())} spaces"


# --- 3. threshold dichotomy --------------------------------------------------------------


def criterion_3():
    space, rho = hm.RH(2), 1.0
    lam_c = hm.critical_intensity(space, rho)
    below = hm.mean_visible_volume(space, BooleanModel(0.9 * lam_c, rho))
    above = hm.mean_visible_volume(space, BooleanModel(1.1 * lam_c, rho))
    c = 1.1 * lam_c * hm.tube_coefficient(space, rho)
    closed = 2 * math.pi / (c * c - 1)
    rel = abs(above.value - closed) / closed if above.finite else math.inf
    flat_ok = all(
        hm.mean_visible_volume(hm.Flat(n), BooleanModel(lam, rho)).finite
        for n in (2, 3, 4, 5)
        for lam in (1e-3, 1.0, 1e3)
    )
    passed = (not below.finite) and above.finite and rel <= 1e-6 and flat_ok
    return passed, f"0.9 lam_c infinite={not below.finite}, 1.1 lam_c rel err {rel:.2e}, flat finite={flat_ok}"


# --- 4. tube sandwich on ex1 -------------------------------------------------------------


def criterion_4():
    surface, rho, h = sf.Ex1(), 0.5, 0.01
    start = time.perf_counter()
    ok, parts = True, []
    for r in (1.0, 2.0, 5.0, 10.0):
        rep = sf.tube_volume_fmm(surface, rho, r, h, check=False)
        fine = sf.tube_volume_fmm(surface, rho, r, h / 2, check=False).fmm_volume
        inside = rep.lower_bound * 0.99 <= rep.fmm_volume <= rep.upper_bound * 1.01
        richardson = abs(rep.fmm_volume - fine) / fine
        ok &= inside and richardson <= 0.01
        parts.append(f"r={r:g}: {rep.lower_bound:.4f}<={rep.fmm_volume:.4f}<={rep.upper_bound:.4f}, h/2 {richardson:.2%}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120.0
    return ok, "; ".join(parts) + f"; {elapsed:.1f}s"


# --- 5. Weibull exponent of the ex1 survival curve ----------------------------------------


def criterion_5():
    model = BooleanModel(1.0, 0.5)
    surface, h = sf.Ex1(), 0.01
    r = np.arange(8.0, 20.5, 1.0)
    ball = sf.origin_ball_volume(surface, model.rho, h)
    vols = np.array([sf.tube_volume_fmm(surface, model.rho, x, h).fmm_volume for x in r])
    log_s = -model.lam * (vols - ball)
    fit = sf.fit_weibull_exponent(r, log_survival=log_s)
    coef = sf.fit_cubic_coefficient(r, log_survival=log_s)
    reference = model.lam * 2 * model.rho**3 / 9
    coef_err = abs(coef - reference) / reference
    passed = 2.8 <= fit.slope <= 3.2 and fit.r_squared >= 0.999 and coef_err <= 0.15
    return passed, f"slope {fit.slope:.4f}, r^2 {fit.r_squared:.5f}, cubic coefficient off by {coef_err:.1%}"


# --- 6. asymptotic rates on ex2 and ex3 ----------------------------------------------------


def criterion_6():
    eps = 0.1
    ex2 = sf.Ex2(eps)
    worst_strip = 0.0
    for rho in (0.5, 1.0):
        target = 2 * rho + 2 * eps * rho**3 / 3
        worst_strip = max(worst_strip, abs(sf.strip_tube_volume(ex2, rho, 200.0) / 200.0 / target - 1))
    rho = 0.5
    target = 2 * rho + 2 * eps * rho**3 / 3
    fmm_err = abs(sf.tube_volume_fmm(ex2, rho, 40.0, 0.02).fmm_volume / 40.0 / target - 1)
    ex3_rate = sf.asymptotic_rate(sf.Ex3(3, eps), BooleanModel(1.0, 1.0))
    ex3_err = abs(ex3_rate - math.pi * 1.05) / (math.pi * 1.05)
    passed = worst_strip <= 0.005 and fmm_err <= 0.05 and ex3_err <= 1e-12
    return passed, f"strip ratio err {worst_strip:.3%}, fmm ratio err {fmm_err:.2%}, ex3 rate err {ex3_err:.1e}"


# --- 7. oracle equivalences --------------------------------------------------------------


def _random_points(space, n, gen):
    """Points around the ray: uniform in a box (flat) or pushed onto the hyperboloid."""
    x = gen.uniform(-1.0, 4.0, size=(n, space.n))
    x[:, 1:] = gen.uniform(-1.0, 1.0, size=(n, space.n - 1))
    if not space.hyperbolic:
        return x
    return mc.project_to_hyperboloid(x)


def criterion_7():
    rho, r_max = 0.5, 4.0
    gen = RngStream(7).generator()
    worst_hit, mismatched = 0.0, 0
    for space in (mc.Euclidean(2), mc.Euclidean(3), mc.Hyperbolic(2), mc.Hyperbolic(3)):
        pts = _random_points(space, 10_000, gen)
        fast = mc.first_hit(space, pts, rho, r_max)
        u = list(space.default_direction())
        for p, f in zip(pts, fast):
            ref = oracles.first_hit_by_root(space.hyperbolic, list(p), u, rho, r_max)
            if math.isinf(ref) or math.isinf(f):
                mismatched += math.isinf(ref) != math.isinf(f)
                continue
            worst_hit = max(worst_hit, abs(f - ref))

    worst_scan = 0.0
    model = BooleanModel(1.0, rho)
    for space in (mc.Euclidean(2), mc.Hyperbolic(2)):
        for i in range(100):
            pts = mc.sample_configuration(space, model, r_max, RngStream(11, i), window="cone")
            fast = mc.visible_range(space, pts, rho, r_max)
            scan = oracles.visible_range_by_scan(space.hyperbolic, pts, space.default_direction(), rho, r_max)
            if math.isinf(fast) or math.isinf(scan):
                mismatched += math.isinf(fast) != math.isinf(scan)
                continue
            worst_scan = max(worst_scan, abs(fast - scan))

    h, r = 0.01, 2.0
    field = sf.solve_distance_field(None, r, rho, h, margin=0.5)
    ss, tt = np.meshgrid(field.s, field.t, indexing="ij")
    fmm_err = float(np.max(np.abs(field.values - oracles.stadium_distance(ss, tt, r))))

    passed = mismatched == 0 and worst_hit <= 1e-9 and worst_scan <= 2e-4 and fmm_err <= 1.5 * h
    return passed, (
        f"first_hit max diff {worst_hit:.1e}, scan max diff {worst_scan:.1e}, "
        f"hit/miss mismatches {mismatched}, FMM {fmm_err / h:.3f}h on {field.values.shape}"
    )


# --- 8. Monte Carlo against fast-marching geometry on ex1 ----------------------------------


def criterion_8():
    model = BooleanModel(2.0, 0.25)
    surface, h, trials = sf.Ex1(), 0.01, 10_000
    r = np.array([0.5, 1.0, 1.5, 2.0])
    emp = sf.simulate_visibility_ex1(model, 2.0, h, trials, seed=3, surface=surface)
    predicted = sf.deterministic_survival(surface, model, r, h)
    gap = np.max(np.abs(emp.survival(r) - predicted))
    eps = dkw_epsilon(trials, 0.01)
    return gap <= eps, f"max |S_hat - S_fmm| {gap:.4f} vs DKW half-width {eps:.4f}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.slow
@pytest.mark.parametrize("k", range(1, 9))
def test_criterion(k, capsys):
    passed, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + _line(k, passed, detail))
    assert passed, detail


if __name__ == "__main__":
    failures = 0
    for k, crit in enumerate(CRITERIA, start=1):
        passed, detail = crit()
        failures += not passed
        print(_line(k, passed, detail), flush=True)
    sys.exit(1 if failures else 0)
