"""High-energy functionals w1..w4, their homogeneous extensions and the
finite-speed comparators of the first-order scattering asymptotics.

Lines are parametrized as x + t theta. The past/future double integrals are
evaluated through the order-swapped identity

    int_{-inf}^0 int_{-inf}^tau f - int_0^inf int_tau^inf f = -int t f(t) dt,

and independently by iterated cumulative quadrature (``double_integral_iterated``).
"""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from . import bounds, dynamics
from .kinematics import gamma
from .xray import LineRule, Ray, integrate_lines

TOL = 1e-11


def _batch(rays):
    if isinstance(rays, Ray):
        return rays.theta[None], rays.x[None], True
    thetas, xs = rays
    return np.atleast_2d(np.asarray(thetas, float)), np.atleast_2d(np.asarray(xs, float)), False


def _out(val, single):
    return val[0] if single else val


def _bmul(Bm, theta, pts):
    th = np.broadcast_to(theta[..., None, :], pts.shape)
    return np.einsum("...ij,...j->...i", Bm, th)


def force_on_lines(field, thetas, speed, c=1.0):
    """Integrand F(p, speed theta) = -grad V(p) + (speed/c) B(p) theta for points p on each ray."""
    def fun(pts):
        out = -field.gradV(pts)
        if speed != 0:
            out = out + (speed / c) * _bmul(field.B(pts), thetas, pts)
        return out
    return fun


def magnetic_on_lines(field, thetas):
    return lambda pts: _bmul(field.B(pts), thetas, pts)


def line_rule(field, thetas, xs):
    """Compact rule for fields with an effective radius, else None (algebraic tails)."""
    R = field.effective_radius
    if R is None:
        return None
    T = (R + np.max(np.linalg.norm(xs, axis=-1))) / np.min(np.linalg.norm(thetas, axis=-1))
    return LineRule(du=0.125, umax=float(np.arcsinh(T)))


def _integrate(fun, thetas, xs, decay, weight=None, tol=TOL, field=None):
    rule = None if field is None else line_rule(field, thetas, xs)
    return integrate_lines(fun, thetas, xs, decay, weight=weight, tol=tol, rule=rule, relative=True)


def _minus_t(t):
    return -t


# ------------------------------------------------------------ the four functionals

def w1(field, rays, tol=TOL):
    """int F(tau theta + x, c theta) dtau."""
    th, xs, one = _batch(rays)
    c = field.params.c
    val = _integrate(force_on_lines(field, th, c, c), th, xs, field.alpha + 1, tol=tol, field=field)
    return _out(val, one)


def xray_V(field, rays, tol=TOL):
    th, xs, one = _batch(rays)
    return _out(_integrate(field.V, th, xs, field.alpha, tol=tol, field=field), one)


def xray_gradV(field, rays, tol=TOL):
    th, xs, one = _batch(rays)
    return _out(_integrate(field.gradV, th, xs, field.alpha + 1, tol=tol, field=field), one)


def xray_B(field, rays, tol=TOL):
    """P B_ik(theta, x) as an array (..., d, d)."""
    th, xs, one = _batch(rays)
    return _out(_integrate(field.B, th, xs, field.alpha + 1, tol=tol, field=field), one)


def xray_dB(field, rays, tol=TOL):
    """P (d_l B_ik)(theta, x) as (..., d, d, d)."""
    th, xs, one = _batch(rays)
    return _out(_integrate(field.dB, th, xs, field.alpha + 2, tol=tol, field=field), one)


def double_integral(fun, thetas, xs, decay, tol=TOL, field=None):
    """Past minus future double integral of ``fun`` along the rays, split at t = 0."""
    return _integrate(fun, thetas, xs, decay - 1, weight=_minus_t, tol=tol, field=field)


def w2(field, rays, tol=TOL):
    """Double integrals of F(., c theta) plus PV(theta, x) theta."""
    th, xs, one = _batch(rays)
    c = field.params.c
    D = double_integral(force_on_lines(field, th, c, c), th, xs, field.alpha + 1, tol, field)
    PV = _integrate(field.V, th, xs, field.alpha, tol=tol, field=field)
    return _out(D + PV[..., None] * th, one)


def w3(field, rays, tol=TOL):
    """int B(x + sigma theta) theta dsigma."""
    th, xs, one = _batch(rays)
    return _out(_integrate(magnetic_on_lines(field, th), th, xs, field.alpha + 1, tol=tol, field=field), one)


def w4(field, rays, tol=TOL):
    """Past minus future double integrals of B(x + sigma theta) theta."""
    th, xs, one = _batch(rays)
    return _out(double_integral(magnetic_on_lines(field, th), th, xs, field.alpha + 1, tol, field), one)


def electric_double_part(field, rays, tol=TOL):
    """PV theta + future minus past double integrals of grad V (the V-only combination)."""
    th, xs, one = _batch(rays)
    D = double_integral(field.gradV, th, xs, field.alpha + 1, tol, field)
    PV = _integrate(field.V, th, xs, field.alpha, tol=tol, field=field)
    return _out(PV[..., None] * th - D, one)


def double_integral_iterated(fun, theta, x, decay, split=0.0, du=0.005, tail=1e-12):
    """Iterated form: int_{-inf}^{split} int_{-inf}^tau f - int_{split}^inf int_tau^inf f.

    Inner integrals are cumulative Simpson sums on a sinh grid centred at the
    split point, then the outer integrals are taken on each half. Used only as
    an independent check of the order-swapped evaluation.
    """
    T = tail ** (-1.0 / (decay - 2.0)) if decay > 2 else tail ** -1.0
    U = np.arcsinh(T)
    n = int(np.ceil(U / du))
    u = np.arange(-n, n + 1) * du
    t = split + np.sinh(u)
    jac = np.cosh(u)
    pts = np.asarray(x, float) + t[:, None] * np.asarray(theta, float)
    vals = np.asarray(fun(pts[None]))[0]
    shape = (-1,) + (1,) * (vals.ndim - 1)
    vals = vals * jac.reshape(shape)
    inner_past = cumulative_simpson(vals, dx=du, axis=0, initial=0.0)
    inner_fut = cumulative_simpson(vals[::-1], dx=du, axis=0, initial=0.0)[::-1]
    past = simpson(inner_past[: n + 1] * jac[: n + 1].reshape(shape), dx=du, axis=0)
    fut = simpson(inner_fut[n:] * jac[n:].reshape(shape), dx=du, axis=0)
    return past - fut


# ------------------------------------------------------------ homogeneous extensions

def _check_y(y):
    y = np.asarray(y, float)
    if not np.linalg.norm(y) > 0:
        raise ValueError("zero direction")
    return y


def w1_tilde(field, y, x, tol=TOL):
    """-|y| int grad V(s y + x) ds + int B(s y + x) y ds."""
    y = _check_y(y)
    x = np.asarray(x, float)
    ny = np.linalg.norm(y)
    yy = y[None]
    fun = lambda p: -ny * field.gradV(p) + _bmul(field.B(p), yy, p)
    return _integrate(fun, yy, x[None], field.alpha + 1, tol=tol, field=field)[0]


def w3_tilde(field, y, x, tol=TOL):
    """int B(x + sigma y) y dsigma."""
    y = _check_y(y)
    yy = y[None]
    return _integrate(magnetic_on_lines(field, yy), yy, np.asarray(x, float)[None],
                      field.alpha + 1, tol=tol, field=field)[0]


def w4_tilde(field, y, x, tol=TOL):
    """Double integrals of B(x + sigma y) y split at sigma = -x.y/|y|^2."""
    y = _check_y(y)
    x = np.asarray(x, float)
    s0 = -(x @ y) / (y @ y)
    yy = y[None]
    return double_integral(magnetic_on_lines(field, yy), yy, (x + s0 * y)[None], field.alpha + 1, tol, field)[0]


def w4_tilde_batch(field, ys, xs, tol=TOL):
    """Vectorized w4_tilde over rows of (ys, xs)."""
    ys = np.atleast_2d(np.asarray(ys, float))
    xs = np.atleast_2d(np.asarray(xs, float))
    s0 = -np.sum(xs * ys, -1) / np.sum(ys * ys, -1)
    base = xs + s0[:, None] * ys
    return double_integral(magnetic_on_lines(field, ys), ys, base, field.alpha + 1, tol, field)


# ------------------------------------------------------------ finite-speed comparators

@dataclass
class AsymptoticSample:
    ray: Ray
    s: object
    lhs: np.ndarray
    rhs: np.ndarray
    gap: float
    envelope: float = float("nan")

    @property
    def under_envelope(self):
        return bool(self.gap <= self.envelope)


def _speed(field, s):
    return field.params.c if s == "c" else float(s)


def force_integral(field, ray, s, tol=TOL):
    """int F(tau theta + x, s theta) dtau."""
    th, xs, _ = _batch(ray)
    c = field.params.c
    return _integrate(force_on_lines(field, th, _speed(field, s), c), th, xs, field.alpha + 1, tol=tol, field=field)[0]


def force_double_integral(field, ray, s, tol=TOL):
    """Past minus future double integrals of F(sigma theta + x, s theta)."""
    th, xs, _ = _batch(ray)
    c = field.params.c
    return double_integral(force_on_lines(field, th, _speed(field, s), c), th, xs, field.alpha + 1, tol, field)[0]


def envelope_a(C1, s, c=1.0):
    return C1 / np.sqrt(1.0 + s**2 / (4.0 * (c**2 - s**2)))


def envelope_b(C2, s, c=1.0):
    return C2 * np.sqrt(1.0 - s**2 / c**2)


def compare_velocity_asymptotics(field, ray, s, datum=None, method="ode", C1=np.nan, tol=TOL, **kw):
    """lhs = int F(tau theta + x, s theta) dtau, rhs = s/sqrt(1 - s^2/c^2) a_sc(s theta, x)."""
    c = field.params.c
    if s == "c":
        lhs = force_integral(field, ray, "c", tol)
        return AsymptoticSample(ray, s, lhs, lhs.copy(), 0.0, 0.0)
    if datum is None:
        datum = dynamics.scattering_data(s * ray.theta, ray.x, field, method, c, **kw)
    lhs = force_integral(field, ray, s, tol)
    rhs = float(gamma(np.array([s]), c)[0]) * datum.a_sc
    return AsymptoticSample(ray, s, lhs, rhs, float(np.linalg.norm(lhs - rhs)), envelope_a(C1, s, c))


def offset_leading_terms(field, ray, s, tol=TOL):
    """(1/c^2) PV theta + (1/s^2)(past minus future double integrals at speed s)."""
    c = field.params.c
    th, xs, _ = _batch(ray)
    PV = _integrate(field.V, th, xs, field.alpha, tol=tol, field=field)[0]
    return PV * ray.theta / c**2 + force_double_integral(field, ray, s, tol) / s**2


def compare_offset_asymptotics(field, ray, s, datum=None, method="ode", C2=np.nan, tol=TOL, **kw):
    """lhs = b_sc/sqrt(1 - s^2/c^2), rhs as in :func:`offset_leading_terms`."""
    c = field.params.c
    if datum is None:
        datum = dynamics.scattering_data(s * ray.theta, ray.x, field, method, c, **kw)
    lhs = datum.b_sc / np.sqrt(1.0 - s**2 / c**2)
    rhs = offset_leading_terms(field, ray, s, tol)
    return AsymptoticSample(ray, s, lhs, rhs, float(np.linalg.norm(lhs - rhs)), envelope_b(C2, s, c))


def l_free(v, x, field, c=None, du=0.01):
    """l_{v,x}(0,0): the offset functional along the unperturbed line."""
    c = field.params.c if c is None else c
    v = np.asarray(v, float)
    x = np.asarray(x, float)
    grid = dynamics.field_grid(field, float(np.linalg.norm(v)), float(np.linalg.norm(x)), du)
    zero = np.zeros((grid.size, v.size))
    return dynamics.apply_operator(grid, zero, zero, v, x, field, c).l


def free_offset_residual(v, x, field, du=0.01, tol=TOL):
    """|l/sqrt(1-|v|^2/c^2) - PV theta/c^2 - (double integrals at v)/|v|^2|, theta = v/|v|."""
    c = field.params.c
    v = np.asarray(v, float)
    s = float(np.linalg.norm(v))
    ray = Ray(v / s, np.asarray(x, float))
    lhs = l_free(v, x, field, c, du) / np.sqrt(1 - s**2 / c**2)
    return float(np.linalg.norm(lhs - offset_leading_terms(field, ray, s, tol)))


def fit_offset_constant(field, rays, fractions=None, du=0.01):
    """Largest residual/sqrt(1-s^2/c^2) over a calibration sweep (the unnamed constant)."""
    c = field.params.c
    fr = np.asarray(fractions if fractions is not None else 1 - np.logspace(-1, -4, 7))
    best = 0.0
    for ray in rays:
        for f in fr:
            s = f * c
            res = free_offset_residual(s * ray.theta, ray.x, field, du)
            best = max(best, res / np.sqrt(1 - f**2))
    return best


@dataclass
class SweepRow:
    s: float
    gap_a: float
    envelope_a: float
    gap_b: float
    envelope_b: float

    @property
    def ok(self):
        return self.gap_a <= self.envelope_a and self.gap_b <= self.envelope_b


def ray_constants(field, ray, r=None):
    """BoundParams and finite-speed constants (C2 without the fitted part) for one ray."""
    b0, b1, b2 = field.beta
    p = field.params
    bp = bounds.BoundParams(c=p.c, d=p.d, alpha=p.alpha, beta0=b0, beta1=b1, beta2=b2,
                            r=0.5 if r is None else r, x_norm=float(np.linalg.norm(ray.x)))
    if r is None:
        bp = bounds.best_r(bp, v_norm=0.999 * p.c)
    return bp, bounds.finite_speed_constants(bp)


def sweep_ray(field, ray, fractions, method="picard", c_fit=None, calib_fractions=None, du=0.01, r=None):
    """Rows (s, gap_a, envelope_a, gap_b, envelope_b) for one ray."""
    c = field.params.c
    bp, th = ray_constants(field, ray, r)
    if c_fit is None:
        c_fit = fit_offset_constant(field, [ray], calib_fractions, du)
    C1, C2 = th["C1"], th["C2"] + c_fit
    rows = []
    for f in fractions:
        s = f * c
        dat = dynamics.scattering_data(s * ray.theta, ray.x, field, method, c, du=du)
        a = compare_velocity_asymptotics(field, ray, s, dat, C1=C1)
        b = compare_offset_asymptotics(field, ray, s, dat, C2=C2)
        rows.append(SweepRow(s, a.gap, a.envelope, b.gap, b.envelope))
    return rows, dict(th, C_fit=c_fit, r=bp.r)


def write_sweep_csv(path, rows):
    fmt = lambda v: format(float(v), ".17g")
    with open(path, "w", newline="\n") as fh:
        fh.write("s,gap_a,envelope_a,gap_b,envelope_b\n")
        for r in rows:
            fh.write(",".join(fmt(q) for q in (r.s, r.gap_a, r.envelope_a, r.gap_b, r.envelope_b)) + "\n")


# alternative names kept for existing callers
compare_thm11_a = compare_velocity_asymptotics
compare_thm11_b = compare_offset_asymptotics
