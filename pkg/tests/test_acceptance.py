"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a one-line PASS/FAIL summary; pytest prints them at the end
of the run (see conftest.py) and ``python tests/test_acceptance.py`` prints
them directly.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from relscatter import asymptotics as asy
from relscatter import dynamics as dy
from relscatter import fields as fl
from relscatter import reconstruct as rc
from relscatter import verify as vf
from relscatter import xray as xr
from relscatter.xray import Ray

from conftest import mixed_field_3d

RESULTS = {}

LABELS = {
    1: "zero field gives zero scattering data",
    2: "energy and speed conserved along trajectories",
    3: "fixed-point and ODE scattering data agree",
    4: "randomized inequality suites have no violations",
    5: "finite-speed gaps under envelopes and shrinking",
    6: "V and B_12 reconstructed from simulated data",
    7: "radial fields invisible to the double-integral functionals",
    8: "functional identities and cross-formula agreement",
    9: "Fourier route from double integrals in d = 3",
    10: "X-ray transform and back-projection",
}


def record(n, ok, detail, t0):
    RESULTS[n] = (bool(ok), f"{detail} [{time.perf_counter() - t0:.1f} s]")
    assert ok, f"criterion {n}: {detail}"


def summary_lines():
    lines = []
    for n in sorted(LABELS):
        if n in RESULTS:
            ok, detail = RESULTS[n]
            lines.append(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {LABELS[n]}: {detail}")
        else:
            lines.append(f"criterion {n:2d} NOT RUN  {LABELS[n]}")
    return lines


def _ray_list(d, n, seed, scale=1.0):
    th, xs = rc.random_rays(d, n, seed=seed, scale=scale)
    return th, xs


# ---------------------------------------------------------------- 1

def test_zero_field_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(100):
        d = 2 + i % 2
        v = rng.normal(size=d)
        v *= rng.uniform(0.05, 0.999) / np.linalg.norm(v)
        x = rng.normal(size=d) * 3
        dat = dy.scattering_data(v, x, fl.zero_field(d))
        worst = max(worst, np.abs(dat.a_sc).max(), np.abs(dat.b_sc).max())
        xp, _ = dy.reduce_offset(v, x)
        res = dy.solve_deflection_picard(v, xp, fl.zero_field(d), check=False)
        worst = max(worst, np.abs(res.op.k).max(), np.abs(res.op.l).max())
    record(1, worst <= 1e-10, f"max |a_sc|, |b_sc| = {worst:.1e} over 100 draws, both routes", t0)


# ---------------------------------------------------------------- 2

def test_conservation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    cases = [fl.demo_field_2d(1.0), fl.inverse_power_electric(2, v0=0.02, alpha=2.5),
             fl.radial_magnetic_2d(b0=0.3), mixed_field_3d(0.1)]
    drift = speed = 0.0
    n = 0
    for field in cases:
        d = field.d
        for lo, hi in ((0.3, 0.9), (0.9, 0.999)):
            v = rng.normal(size=(50, d))
            v *= rng.uniform(lo, hi, (50, 1)) / np.linalg.norm(v, axis=1, keepdims=True)
            x = rng.normal(size=(50, d)) * 1.5
            tb = dy.integrate_batch(v, x, field, keep_path=False)
            drift = max(drift, tb.energy_drift.max())
            speed = max(speed, np.abs(np.linalg.norm(v + tb.ydot[-1], axis=-1) - np.linalg.norm(v, axis=-1)).max())
            n += 50
    record(2, drift < 1e-8 and speed < 1e-8,
           f"max relative energy drift {drift:.1e}, max ||v + a| - |v|| {speed:.1e} over {n} trajectories", t0)


# ---------------------------------------------------------------- 3

def test_method_agreement():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    fields_ = [fl.with_estimated_beta(fl.demo_field_2d(1e-10)), fl.with_estimated_beta(mixed_field_3d(1e-10))]
    points, worst_abs, worst_rel = 0, 0.0, 0.0
    while points < 24:
        field = fields_[points % 2]
        d = field.d
        th = rng.normal(size=d)
        th /= np.linalg.norm(th)
        x = rng.normal(size=d)
        x -= (x @ th) * th
        v = rng.uniform(0.6, 0.999) * th
        try:
            p = dy.scattering_data(v, x, field, method="picard")
        except dy.NotContractiveError:
            continue
        if not p.mu < 0.5:
            continue
        o = dy.scattering_data(v, x, field, method="ode")
        for a, b in ((p.a_sc, o.a_sc), (p.b_sc, o.b_sc)):
            worst_abs = max(worst_abs, np.abs(a - b).max())
            worst_rel = max(worst_rel, np.abs(a - b).max() / np.abs(b).max())
        points += 1
    dt = time.perf_counter() - t0
    record(3, worst_abs < 1e-6 and worst_rel < 1e-6 and dt < 60,
           f"{points} points with mu < 0.5: max abs diff {worst_abs:.1e}, max rel diff {worst_rel:.1e}", t0)


# ---------------------------------------------------------------- 4

def test_bound_suites():
    t0 = time.perf_counter()
    S = vf.run_all(n=1000, seed=0)
    dt = time.perf_counter() - t0
    print("\n" + S.report())
    viol = sum(s.violations for s in S.values())
    short = [s.name for s in S.values() if s.draws < 1000]
    worst = max(S.values(), key=lambda s: s.worst_ratio)
    record(4, S.all_passed() and not short and dt < 300,
           f"{len(S)} suites x 1000 draws, {viol} violations, largest lhs/rhs {worst.worst_ratio:.2e} ({worst.name})", t0)


# ---------------------------------------------------------------- 5

def test_finite_speed_sweep():
    t0 = time.perf_counter()
    field = fl.with_estimated_beta(fl.demo_field_2d(1e-10))
    th, xs = _ray_list(2, 3, seed=0)
    fractions = [0.9, 0.99, 0.999]
    ok, ratios_all = True, []
    for t, x in zip(th, xs):
        rows, info = asy.sweep_ray(field, Ray(t, x), fractions, method="picard")
        ga = np.array([r.gap_a for r in rows])
        gb = np.array([r.gap_b for r in rows])
        ok &= all(r.ok for r in rows)
        ok &= bool(np.all(np.diff(ga) < 0) and np.all(np.diff(gb) < 0))
        ratio = ga / np.sqrt(1 - np.array(fractions) ** 2)
        ok &= bool(ratio.max() <= 10 * ratio.min())
        ratios_all.append(ratio)
    ratios_all = np.concatenate(ratios_all)
    dt = time.perf_counter() - t0
    record(5, ok and dt < 300,
           f"3 rays x 3 speeds under envelopes, gaps decreasing, gap_a/sqrt(1-s^2) in "
           f"[{ratios_all.min():.2e}, {ratios_all.max():.2e}]", t0)


# ---------------------------------------------------------------- 6

def test_reconstruction():
    t0 = time.perf_counter()
    field = fl.demo_field_2d(1.0)
    errs = {}
    for s in (0.9, 0.99, 0.999):
        data = rc.simulate_plane(field, s, n_angles=120, n_offsets=129)
        errs[s] = (rc.reconstruct_B(data, field, n=129).error, rc.reconstruct_V(data, field, n=129).error)
    eb = [errs[s][0] for s in sorted(errs)]
    ev = [errs[s][1] for s in sorted(errs)]
    ok = errs[0.99][0] < 0.10 and errs[0.99][1] < 0.10
    ok &= eb[0] > eb[1] > eb[2] and ev[0] > ev[1] > ev[2]
    dt = time.perf_counter() - t0
    record(6, ok and dt < 600,
           "errors B_12 " + "/".join(f"{e:.3f}" for e in eb) + ", V " + "/".join(f"{e:.3f}" for e in ev)
           + " at s = 0.9/0.99/0.999 c", t0)


# ---------------------------------------------------------------- 7

def test_nonuniqueness():
    t0 = time.perf_counter()
    m = rc.nonuniqueness_demo("magnetic2d", 500)
    e = rc.nonuniqueness_demo("electric", 500)
    dt = time.perf_counter() - t0
    record(7, m["max_w4"] < 1e-8 and m["max_w3"] > 0 and e["max_w2"] < 1e-8 and dt < 60,
           f"radial B: max|w4| {m['max_w4']:.1e}, max|w3| {m['max_w3']:.2f}; radial V: max|w2| {e['max_w2']:.1e}", t0)


# ---------------------------------------------------------------- 8

def _identity_residuals(field, th, xs):
    R = {}
    w1p, w1m = asy.w1(field, (th, xs)), asy.w1(field, (-th, xs))
    w2p, w2m = asy.w2(field, (th, xs)), asy.w2(field, (-th, xs))
    w3p, w3m = asy.w3(field, (th, xs)), asy.w3(field, (-th, xs))
    R["magnetic = odd part of w1"] = np.abs(w3p - (w1p - w1m) / 2).max()
    R["w3 odd in theta"] = np.abs(w3p + w3m).max()
    R["P grad V = -even part of w1"] = np.abs(asy.xray_gradV(field, (th, xs)) + (w1p + w1m) / 2).max()
    R["w4 = even part of w2"] = np.abs(asy.w4(field, (th, xs)) - (w2p + w2m) / 2).max()
    R["electric = odd part of w2"] = np.abs(asy.electric_double_part(field, (th, xs)) - (w2p - w2m) / 2).max()
    rays = [Ray(t, x) for t, x in zip(th, xs)]
    pairs = [(0, 1)] if field.d == 2 else [(0, 1), (0, 2), (1, 2)]
    R["curl of w4 identity"] = max(rc.w4_identity_check(field, r, *pairs[j % len(pairs)])
                                   for j, r in enumerate(rays))
    return R


def _pb_cross(field, n, seed):
    rng = np.random.default_rng(seed)
    w1 = rc.exact_w1_sampler(field)
    w1t = lambda y, x: asy.w1_tilde(field, y, x)
    worst = 0.0
    d = field.d
    for j in range(n):
        i, k = [(0, 1), (0, 2), (1, 2)][j % 3] if d == 3 else (0, 1)
        phi = rng.uniform(0, 2 * np.pi)
        th = np.zeros(d)
        th[i], th[k] = np.cos(phi), np.sin(phi)
        x = rng.normal(size=d)
        ray = Ray(th, x - (x @ th) * th)
        quadv = asy.xray_B(field, ray)[i, k]
        a = rc.pb_from_w1_plane(w1, ray, i, k)
        b = rc.pb_from_w1_derivative(w1t, ray, i, k)
        worst = max(worst, abs(a - quadv), abs(b - quadv), abs(a - b))
    return worst


def test_identity_suites():
    t0 = time.perf_counter()
    worst = {}
    fields_ = [fl.demo_field_2d(1.0), mixed_field_3d()]
    for f in fields_:
        th, xs = rc.random_rays(f.d, 200, seed=5, scale=1.0)
        for k, v in _identity_residuals(f, th, xs).items():
            worst[k] = max(worst.get(k, 0.0), v)
    pb = max(_pb_cross(f, 200, 6) for f in fields_)
    ok = all(v < 1e-5 for v in worst.values()) and pb < 1e-5
    top = max(worst, key=worst.get)
    record(8, ok, f"largest identity residual {worst[top]:.1e} ({top}); PB plane/derivative/quadrature "
                  f"max difference {pb:.1e}; 200 rays each in d = 2, 3", t0)


@pytest.mark.xfail(strict=True, reason="with the parities swapped the split fails: w4 is the even "
                                       "part of w2, not the odd part")
def test_identity_suites_swapped_parity():
    f = fl.demo_field_2d(1.0)
    th, xs = rc.random_rays(2, 200, seed=5, scale=1.0)
    w2p, w2m = asy.w2(f, (th, xs)), asy.w2(f, (-th, xs))
    assert np.abs(asy.w4(f, (th, xs)) - (w2p - w2m) / 2).max() < 1e-5


# ---------------------------------------------------------------- 9

def test_fourier_route_three_dimensions():
    t0 = time.perf_counter()
    field = fl.localized_magnetic(3, b0=0.5, w=0.8, center=[-0.2, 0.4, 0.1])
    cache = rc.W4PlaneCache(field, n=48)
    cases = [(np.array([0.5, 0.0, 0.0]), 0), (np.array([0.0, 0.7, 0.3]), 1), (np.array([0.4, -0.3, 0.5]), 2),
             (np.array([1.0, 0.5, -0.2]), 0), (np.array([0.2, 0.9, 0.6]), 1)]
    worst_rel, worst_orth = 0.0, 0.0
    for p, l in cases:
        got = rc.fourier_B_derivs_from_w4(cache, p, l)
        ref = rc.fourier_B_derivs_direct(field, p, l, n=64)
        worst_rel = max(worst_rel, np.linalg.norm(got - ref) / np.linalg.norm(ref))
        worst_orth = max(worst_orth, abs(got @ p) / (np.linalg.norm(got) * np.linalg.norm(p)))
    dt = time.perf_counter() - t0
    record(9, worst_rel < 0.05 and worst_orth < 1e-9 and dt < 600,
           f"5 frequencies: max relative deviation from direct transform {worst_rel:.1e}, "
           f"max |result.p|/(|result||p|) {worst_orth:.1e}", t0)


# ---------------------------------------------------------------- 10

def test_xray_core():
    t0 = time.perf_counter()
    gauss = lambda x: np.exp(-np.sum(x * x, axis=-1))
    worst = 0.0
    for d in (2, 3):
        th, xs = rc.random_rays(d, 100, seed=7, scale=1.5)
        got = xr.integrate_lines(gauss, th, xs, 2.0, tol=1e-12)
        worst = max(worst, np.abs(got - np.sqrt(np.pi) * np.exp(-np.sum(xs * xs, -1))).max())
    rec = xr.invert_xray_2d(xr.sample_sinogram(gauss, 180, 257, 8.0), n=129, extent=4.0)
    err = xr.rel_l2(rec, xr.grid_like(gauss, 129, 4.0))
    record(10, worst < 1e-8 and err < 0.05,
           f"Gaussian line integrals max error {worst:.1e}; back-projection round trip L2 error {err:.3f}", t0)


if __name__ == "__main__":
    tests = [test_zero_field_identity, test_conservation, test_method_agreement, test_bound_suites,
             test_finite_speed_sweep, test_reconstruction, test_nonuniqueness, test_identity_suites,
             test_fourier_route_three_dimensions, test_xray_core]
    for t in tests:
        try:
            t()
        except AssertionError:
            pass
    print("\n".join(summary_lines()))
    sys.exit(0 if all(RESULTS.get(n, (False,))[0] for n in LABELS) else 1)
