import numpy as np
import pytest

from relscatter import asymptotics as asy
from relscatter import fields as fl
from relscatter import reconstruct as rc
from relscatter.xray import Plane, Ray, read_grid_csv

from conftest import mixed_field_3d

ELECTRIC = fl.gaussian_electric(2, v0=0.2, w=0.9, center=[0.3, -0.4])
MAGNETIC3 = fl.localized_magnetic(3, b0=0.5, w=0.8, center=[-0.2, 0.4, 0.1])


def _rays(d, n, seed=0):
    th, xs = rc.random_rays(d, n, seed=seed, scale=1.0)
    return [Ray(t, x) for t, x in zip(th, xs)]


def _plane_rays(d, i, k, n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        phi = rng.uniform(0, 2 * np.pi)
        th = np.zeros(d)
        th[i], th[k] = np.cos(phi), np.sin(phi)
        x = rng.normal(size=d)
        out.append(Ray(th, x - (x @ th) * th))
    return out


def tilde(fun, field):
    return lambda y, x: fun(field, y, x)


# ---------------------------------------------------------------- pointwise formulas

def test_even_part_recovers_gradient_transform():
    for f in (ELECTRIC, fl.demo_field_2d(1.0), mixed_field_3d()):
        w1 = rc.exact_w1_sampler(f)
        for ray in _rays(f.d, 10):
            np.testing.assert_allclose(rc.pgradv_from_w1(w1, ray), asy.xray_gradV(f, ray), atol=1e-9)
    w1 = rc.exact_w1_sampler(MAGNETIC3)
    assert max(np.abs(rc.pgradv_from_w1(w1, r)).max() for r in _rays(3, 10)) < 1e-14


def test_plane_formula_recovers_magnetic_transform():
    f = fl.demo_field_2d(1.0)
    w1 = rc.exact_w1_sampler(f)
    for ray in _rays(2, 10):
        assert rc.pb_from_w1_plane(w1, ray, 0, 1) == pytest.approx(asy.xray_B(f, ray)[0, 1], abs=1e-9)
    w1 = rc.exact_w1_sampler(ELECTRIC)
    assert max(abs(rc.pb_from_w1_plane(w1, r, 0, 1)) for r in _rays(2, 10)) < 1e-14


def test_plane_formula_rejects_rays_off_the_plane():
    w1 = rc.exact_w1_sampler(MAGNETIC3)
    ray = _rays(3, 1)[0]
    with pytest.raises(rc.OffManifoldError):
        rc.pb_from_w1_plane(w1, ray, 0, 1)
    with pytest.raises(rc.OffManifoldError):
        rc.pb_from_w1_plane(w1, _plane_rays(3, 0, 1, 1)[0], 1, 1)


def test_derivative_formula_agrees_with_plane_formula():
    f = mixed_field_3d()
    w1 = rc.exact_w1_sampler(f)
    wt = tilde(asy.w1_tilde, f)
    for ray in _plane_rays(3, 0, 2, 6):
        assert rc.pb_from_w1_derivative(wt, ray, 0, 2) == pytest.approx(rc.pb_from_w1_plane(w1, ray, 0, 2), abs=1e-5)


def test_derivative_formulas_match_quadrature_on_general_rays():
    f = mixed_field_3d()
    w1t, w3t = tilde(asy.w1_tilde, f), tilde(asy.w3_tilde, f)
    for ray in _rays(3, 8, seed=1):
        PB = asy.xray_B(f, ray)
        for i, k in ((0, 1), (0, 2), (1, 2)):
            assert rc.pb_from_w1_derivative(w1t, ray, i, k) == pytest.approx(PB[i, k], abs=1e-5)
            assert rc.pb_from_w3(w3t, ray, i, k) == pytest.approx(PB[i, k], abs=1e-5)


def test_derivative_formulas_vanish_without_magnetic_field():
    w1t, w3t = tilde(asy.w1_tilde, ELECTRIC), tilde(asy.w3_tilde, ELECTRIC)
    for ray in _rays(2, 5):
        assert abs(rc.pb_from_w1_derivative(w1t, ray, 0, 1)) < 1e-8
        assert rc.pb_from_w3(w3t, ray, 0, 1) == 0.0


def test_magnetic_only_field_gives_same_answer_from_both_functionals():
    w1t, w3t = tilde(asy.w1_tilde, MAGNETIC3), tilde(asy.w3_tilde, MAGNETIC3)
    for ray in _plane_rays(3, 1, 2, 4):
        a = rc.pb_from_w3(w3t, ray, 1, 2, form="plane")
        assert a == pytest.approx(rc.pb_from_w1_plane(rc.exact_w1_sampler(MAGNETIC3), ray, 1, 2), abs=1e-12)
        assert a == pytest.approx(rc.pb_from_w1_derivative(w1t, ray, 1, 2), abs=1e-6)
    with pytest.raises(ValueError):
        rc.pb_from_w3(w3t, ray, 1, 2, form="spline")


# ---------------------------------------------------------------- pipelines

def test_zero_field_reconstructs_to_zero():
    z = fl.zero_field(2)
    data = rc.simulate_plane(z, 0.99, n_angles=12, n_offsets=17)
    B = rc.reconstruct_B(data, z, n=17)
    V = rc.reconstruct_V(data, z, n=17)
    assert np.all(B.estimate.values == 0) and B.error == 0
    assert np.all(V.estimate.values == 0) and V.error == 0


@pytest.fixture(scope="module")
def demo_plane():
    f = fl.demo_field_2d(1.0)
    return f, rc.simulate_plane(f, 0.99, n_angles=48, n_offsets=65)


def test_coarse_reconstruction_of_demo_field(demo_plane, tmp_path):
    f, data = demo_plane
    assert data.drift < 1e-8
    B = rc.reconstruct_B(data, f, n=65)
    V = rc.reconstruct_V(data, f, n=65)
    assert B.error < 0.15 and V.error < 0.10
    assert V.meta["path_gap"] < 0.02
    B.write(tmp_path / "b")
    assert np.array_equal(read_grid_csv(tmp_path / "b.csv").values, B.estimate.values)
    assert "target = B_12" in (tmp_path / "b.txt").read_text()


def test_reconstruct_b_requires_matching_plane(demo_plane):
    f, data = demo_plane
    data3 = rc.simulate_plane(MAGNETIC3, 0.9, Plane.coordinate(3, 0, 1), n_angles=4, n_offsets=5, exact=False)
    with pytest.raises(rc.OffManifoldError):
        rc.reconstruct_B(data3, MAGNETIC3, 0, 2, n=9)
    with pytest.raises(ValueError):
        rc.simulate_plane(f, 1.0)


def test_radial_magnetic_field_is_recovered_at_high_speed():
    f = fl.radial_magnetic_2d(b0=0.5, sigma=1.5)
    data = rc.simulate_plane(f, 0.99, n_angles=48, n_offsets=65)
    assert rc.reconstruct_B(data, f, n=65).error < 0.10


def test_algebraically_decaying_potential_is_recovered():
    f = fl.inverse_power_electric(2, v0=0.1, alpha=4.0)
    data = rc.simulate_plane(f, 0.99, n_angles=48, n_offsets=65)
    V = rc.reconstruct_V(data, f, n=65)
    assert V.error < 0.10
    assert V.meta["path_gap"] < 0.02


# ---------------------------------------------------------------- double-integral identities

def test_double_integral_curl_identity():
    f = mixed_field_3d()
    for ray in _rays(3, 8, seed=2):
        for i, k in ((0, 1), (0, 2), (1, 2)):
            assert rc.w4_identity_check(f, ray, i, k) < 1e-5
    radial = fl.radial_magnetic_2d(b0=0.5)
    assert max(rc.w4_identity_check(radial, r, 0, 1) for r in _rays(2, 10)) < 1e-6
    assert max(rc.w4_identity_check(ELECTRIC, r, 0, 1) for r in _rays(2, 5)) == 0.0


def test_fourier_route_is_transversal_and_vanishes_without_b():
    p = np.array([0.4, -0.3, 0.5])
    cache = rc.W4PlaneCache(MAGNETIC3, n=16)
    out = rc.fourier_B_derivs_from_w4(cache, p, 0)
    assert abs(out @ p) < 1e-12 * np.linalg.norm(out) * np.linalg.norm(p)
    direct = rc.fourier_B_derivs_direct(MAGNETIC3, p, 0, n=48)
    assert abs(direct @ p) < 1e-9 * np.linalg.norm(direct) * np.linalg.norm(p)
    z = fl.gaussian_electric(3)
    assert np.all(rc.fourier_B_derivs_from_w4(rc.W4PlaneCache(z, n=8), p, 1) == 0)
    with pytest.raises(ValueError):
        rc.W4PlaneCache(fl.demo_field_2d())


@pytest.fixture(scope="module")
def field4():
    return fl.localized_magnetic(4, b0=0.5, w=1.0, center=[0.1, -0.2, 0.3, 0.0])


def test_four_dimensional_transform_from_double_integrals(field4):
    rng = np.random.default_rng(3)
    for _ in range(5):
        th = np.zeros(4)
        th[:2] = rng.normal(size=2)
        th /= np.linalg.norm(th)
        x = rng.normal(size=4)
        ray = Ray(th, x - (x @ th) * th)
        assert rc.pb_from_w4_d4(field4, ray, 2, 3) == pytest.approx(asy.xray_B(field4, ray)[2, 3], abs=1e-4)
    with pytest.raises(rc.OffManifoldError):
        rc.pb_from_w4_d4(field4, Ray(np.array([0, 0, 1.0, 0]), np.zeros(4)), 2, 3)
    with pytest.raises(ValueError):
        rc.pb_from_w4_d4(MAGNETIC3, _rays(3, 1)[0], 0, 1)


def test_four_dimensional_plane_reconstruction(field4):
    rep = rc.reconstruct_B_from_w4_d4(field4, 2, 3, Plane.coordinate(4, 0, 1), n_angles=32, n_offsets=49, n=49)
    assert rep.error < 0.15
    with pytest.raises(rc.OffManifoldError):
        rc.reconstruct_B_from_w4_d4(field4, 0, 3, Plane.coordinate(4, 0, 1))


# ---------------------------------------------------------------- non-uniqueness

def test_invisible_fields():
    m = rc.nonuniqueness_demo("magnetic2d", 200)
    assert m["max_w4"] < 1e-8 and m["max_w3"] > 0.01
    e = rc.nonuniqueness_demo("electric", 200)
    assert e["max_w2"] < 1e-8 and e["max_w1"] > 0.01
    assert rc.nonuniqueness_demo("zero", 20)["max_all"] == 0
    with pytest.raises(ValueError):
        rc.nonuniqueness_demo("gravity")
