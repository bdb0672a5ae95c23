"""Randomized checks of the explicit inequalities on actual operator images.

Each suite draws parameters (r, |x|, |v| >= z1, direction, horizon T),
builds random piecewise-linear members of M_{T,r}, applies the operator and
compares every quantity with the bound evaluated by :mod:`bounds`. A draw
counts as a violation when lhs > rhs * (1 + REL_SLACK); the slack only
absorbs roundoff in the comparison, the bounds themselves are far from tight.
"""
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import bounds, dynamics, fields
from .kinematics import force, gamma

REL_SLACK = 1e-9
SQ2 = np.sqrt(2.0)


@dataclass
class SuiteResult:
    name: str
    draws: int = 0
    violations: int = 0
    worst_ratio: float = 0.0
    worst_case: dict = dc_field(default_factory=dict)

    @property
    def passed(self):
        return self.draws > 0 and self.violations == 0

    def add(self, lhs, rhs, **info):
        self._add(float(lhs), float(rhs), info)

    def add_pointwise(self, lhs, rhs, **info):
        """One draw: max of lhs/rhs over sample points."""
        lhs = np.asarray(lhs, float)
        rhs = np.broadcast_to(np.asarray(rhs, float), lhs.shape)
        i = int(np.argmax(lhs / rhs))
        self._add(float(lhs.flat[i]), float(rhs.flat[i]), info)

    def _add(self, lhs, rhs, info):
        self.draws += 1
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
        if not (ratio <= 1.0 + REL_SLACK):
            self.violations += 1
        if not ratio <= self.worst_ratio:
            self.worst_ratio = ratio
            self.worst_case = dict(info, lhs=lhs, rhs=rhs)

    def line(self):
        status = "ok" if self.passed else "FAIL"
        return (f"{self.name:<28s} draws={self.draws:5d} violations={self.violations:3d} "
                f"worst lhs/rhs={self.worst_ratio:.3e}  {status}")


class Suites(dict):
    def get_suite(self, name):
        if name not in self:
            self[name] = SuiteResult(name)
        return self[name]

    def all_passed(self):
        return all(s.passed for s in self.values())

    def report(self):
        return "\n".join(s.line() for s in self.values())


# ------------------------------------------------------------ draws

def suite_fields(c=1.0):
    """A 2-D and a 3-D field with sampled decay constants."""
    f2 = fields.demo_field_2d(0.1, c=c)
    f3 = fields.SumField([fields.gaussian_electric(3, v0=0.004, w=1.0, center=[0.3, 0.0, -0.2], c=c),
                          fields.localized_magnetic(3, b0=0.005, w=0.8, center=[-0.2, 0.4, 0.1], c=c)],
                         name="mixed3d")
    return [fields.with_estimated_beta(f2), fields.with_estimated_beta(f3)]


def _unit(rng, d):
    u = rng.normal(size=d)
    return u / np.linalg.norm(u)


def _perp(rng, theta, norm):
    y = rng.normal(size=theta.size)
    y -= (y @ theta) * theta
    return norm * y / np.linalg.norm(y)


def draw_setup(rng, field, finite_T, max_tries=200):
    """Random admissible (BoundParams, v, x) with |v| >= z1 and v.x = 0."""
    c = field.params.c
    b0, b1, b2 = field.beta
    for _ in range(max_tries):
        r = rng.uniform(0.01, 0.6) * min(1.0, c / SQ2)
        xn = rng.uniform(0.0, 3.0)
        bp = bounds.BoundParams(c=c, d=field.d, alpha=field.alpha, beta0=b0, beta1=b1,
                                beta2=b2, r=r, x_norm=xn)
        try:
            z1 = bounds.threshold_z1(bp)
        except bounds.NoRootError:
            continue
        gap = c - z1
        if gap < 1e-7 * c:
            continue
        # log-uniform position inside [z1, c) so both ends get exercised
        s = c - gap * 10 ** rng.uniform(-3, 0)
        s = max(s, z1)
        T = -rng.exponential(3.0) if finite_T else np.inf
        bp = bp.at(v_norm=s, T=T)
        theta = _unit(rng, field.d)
        return bp, s * theta, _perp(rng, theta, xn)
    raise RuntimeError("could not draw admissible parameters")


def member_grid(field, bp, du=0.05):
    """Grid long enough that the field is negligible along any member's path."""
    R = field.effective_radius
    a = bp.v_norm / SQ2 - bp.r
    if R is None:
        return dynamics.time_grid(bp.v_norm, field.alpha, du=du)
    return dynamics.time_grid(bp.v_norm, field.alpha, du=du,
                              horizon=2.0 * (R + bp.x_norm + 1.0) / a)


def random_member(rng, grid, d, r, T=np.inf):
    """Random (f, h) with ||(f, h)||_T <= r, piecewise linear on the grid."""
    t, u = grid.t, grid.u
    nk = int(rng.integers(2, 16))
    knots = np.linspace(u[0], u[-1], nk)
    hk = rng.normal(size=(nk, d))
    Rk = rng.normal(size=(nk, d))
    style = int(rng.integers(0, 4))
    if style == 1:
        Rk[:] = 0.0          # f = t h: only the velocity part
    elif style == 2:
        hk[:] = 0.0          # h = 0: bounded offset only
    elif style == 3:
        hk /= np.cosh(knots)[:, None]  # localized in time, like a real deflection
    h = np.stack([np.interp(u, knots, hk[:, i]) for i in range(d)], -1)
    R = np.stack([np.interp(u, knots, Rk[:, i]) for i in range(d)], -1)
    path = dynamics.DeflectionPath(t, R + t[:, None] * h, h, remainder=R)
    n = dynamics.norm_T(path, T)
    if n == 0:
        return path
    q = 1.0 if rng.uniform() < 0.2 else rng.uniform(0.05, 1.0)
    k = q * r / n
    return dynamics.DeflectionPath(t, path.f * k, h * k, r, T, R * k)


def _diff(p, q):
    return dynamics.DeflectionPath(p.t, p.f - q.f, p.h - q.h, remainder=p.rem() - q.rem())


# ------------------------------------------------------------ operator suites

def operator_suites(n=1000, seed=0, c=1.0, suites=None, du=0.05):
    """Operator norm, Lipschitz, envelope and force-integral inequalities."""
    suites = Suites() if suites is None else suites
    rng = np.random.default_rng(seed)
    flds = suite_fields(c)
    for finite_T in (True, False):
        for i in range(n):
            field = flds[i % len(flds)]
            bp, v, x = draw_setup(rng, field, finite_T)
            _operator_draw(rng, field, bp, v, x, suites, du)
    return suites


def _operator_draw(rng, field, bp, v, x, S, du):
    c, d, r, T = bp.c, bp.d, bp.r, bp.T
    grid = member_grid(field, bp, du)
    t = grid.t
    m1 = random_member(rng, grid, d, r, T)
    m2 = random_member(rng, grid, d, r, T)
    op1 = dynamics.apply_operator(grid, m1.f, m1.h, v, x, field, c)
    op2 = dynamics.apply_operator(grid, m2.f, m2.h, v, x, field, c)
    ob = bounds.operator_bounds(bp)
    info = dict(v_norm=bp.v_norm, x_norm=bp.x_norm, r=r, T=T)

    n1 = dynamics.norm_T(op1.path, T)
    dn = dynamics.norm_T(_diff(m1, m2), T)
    dA = dynamics.norm_T(_diff(op1.path, op2.path), T)
    S.get_suite("operator_norm").add(n1, ob["rho"], **info)
    S.get_suite("operator_lipschitz").add(dA, ob["lambda_"] * dn, **info)
    if T <= 0:
        S.get_suite("operator_norm_T").add(n1, ob["rho_T"], **info)
        S.get_suite("operator_lipschitz_T").add(dA, ob["lambda_T"] * dn, **info)
    S.get_suite("contraction_majorant").add(max(ob["rho"] / r, ob["lambda_"]), ob["mu"], **info)

    # envelopes for t <= min(T, 0)
    neg = t <= min(T, 0.0)
    A1, A2 = op1.path.f, op1.path.h
    S.get_suite("velocity_envelope_past").add_pointwise(
        np.linalg.norm(A2[neg], axis=-1), bounds.zeta_minus(bp, t[neg]), **info)
    S.get_suite("offset_envelope_past").add_pointwise(
        np.linalg.norm(A1[neg], axis=-1), bounds.xi_minus(bp, t[neg]), **info)

    if T == np.inf:
        S.get_suite("velocity_limit").add(np.linalg.norm(op1.k), 2 * bounds.zeta_minus(bp, 0.0), **info)
        S.get_suite("offset_limit").add(np.linalg.norm(op1.l), 2 * bounds.xi_minus(bp, 0.0), **info)
        pos = t >= 0
        S.get_suite("velocity_envelope_future").add_pointwise(
            np.linalg.norm(op1.Hdot[pos], axis=-1), bounds.zeta_plus(bp, t[pos]), **info)
        S.get_suite("offset_envelope_future").add_pointwise(
            np.linalg.norm(op1.H[pos], axis=-1), bounds.xi_plus(bp, t[pos]), **info)
        # A1 = k t + l + H: exact identity, so the residual is quadrature error;
        # 1e-5 relative matches cumulative Simpson on the coarse suite grid
        resid = np.linalg.norm(A1 - (t[:, None] * op1.k + op1.l + op1.H), axis=-1)
        scale = (np.abs(t) * np.linalg.norm(op1.k) + np.linalg.norm(op1.l)
                 + np.linalg.norm(op1.H, axis=-1) + np.linalg.norm(A1, axis=-1))
        S.get_suite("linear_decomposition").add_pointwise(
            resid, 1e-5 * scale + 1e-300, **info)

    _member_checks(rng, field, bp, v, x, grid, m1, m2, op1, op2, S, info)


def _member_checks(rng, field, bp, v, x, grid, m1, m2, op1, op2, S, info):
    c, r, T = bp.c, bp.r, bp.T
    t = grid.t
    le = t <= T
    nm = dynamics.norm_T(m1, T)
    f, h = m1.f[le], m1.h[le]
    S.get_suite("member_offset_growth").add_pointwise(
        np.linalg.norm(f, axis=-1), (1 + np.abs(t[le])) * nm + 1e-300, **info)
    S.get_suite("member_velocity").add_pointwise(np.linalg.norm(h, axis=-1), nm + 1e-300, **info)
    dist = 2 * (1 + np.linalg.norm(x + t[le, None] * v + f, axis=-1))
    rhs = 1 + bp.x_norm / SQ2 + (bp.v_norm / SQ2 - r) * np.abs(t[le])
    # stated as lower bound: compare rhs <= dist
    S.get_suite("path_distance_floor").add_pointwise(rhs, dist, **info)
    S.get_suite("force_integral").add(np.max(np.linalg.norm(op1.dP[le], axis=-1)),
                                      bounds.integral_force_bound(bp), **info)
    # impulse floor at random (t, sigma <= tau <= T, eps1, eps2)
    idx = np.nonzero(le)[0]
    k = 64
    it = rng.choice(idx, k)
    itau = rng.choice(idx, k)
    isig = np.array([rng.integers(-1, j + 1) for j in itau])  # -1 encodes sigma = -inf
    e1 = rng.uniform(-1, 1, (k, 1))
    e2 = rng.uniform(-1, 1, (k, 1))
    P2s = np.where(isig[:, None] < 0, 0.0, op2.dP[np.maximum(isig, 0)])
    q = gamma(v, c) + e1 * op1.dP[it] + e2 * (op2.dP[itau] - P2s)
    lhs = 1 + np.sum(q * q, -1) / c**2
    S.get_suite("impulse_floor").add_pointwise(np.full(k, bounds.impulse_floor(bp)), lhs, **info)


# ------------------------------------------------------------ force suites

def force_suites(n=1000, seed=1, c=1.0, suites=None):
    """Pointwise force bound and its Lipschitz estimate on random arguments."""
    suites = Suites() if suites is None else suites
    rng = np.random.default_rng(seed)
    flds = suite_fields(c)
    for i in range(n):
        field = flds[i % len(flds)]
        d, al = field.d, field.alpha
        _, b1, b2 = field.beta
        sc = 10 ** rng.uniform(-2, 1.5, 2)
        x, x2 = rng.normal(size=(2, d)) * sc[:, None]
        if rng.uniform() < 0.5:
            x2 = x + rng.normal(size=d) * 10 ** rng.uniform(-4, 0)
        y, y2 = rng.normal(size=(2, d)) * rng.uniform(0, 3 * c, (2, 1))
        F = force(x, y, field, c)
        suites.get_suite("force_pointwise").add(np.linalg.norm(F), bounds.force_bound(x, y, b1, d, al, c))
        dF = np.linalg.norm(F - force(x2, y2, field, c))
        suites.get_suite("force_lipschitz").add(
            dF, bounds.force_lipschitz_bound(x, y, x2, y2, b1, b2, d, al, c))
    return suites


# ------------------------------------------------------------ solution suites

def weak_field(c=1.0):
    """Demo field scaled down until the contraction condition holds at moderate speeds."""
    return fields.with_estimated_beta(fields.demo_field_2d(1e-10, c=c))


def _solution_params(rng, field, need_mu, r_of=None):
    c = field.params.c
    b0, b1, b2 = field.beta
    while True:
        xn = rng.uniform(0.0, 3.0)
        s = rng.uniform(0.6, 0.999) * c
        bp = bounds.BoundParams(c=c, d=field.d, alpha=field.alpha, beta0=b0, beta1=b1, beta2=b2,
                                x_norm=xn, v_norm=s)
        bp = bounds.best_r(bp)
        try:
            z1 = bounds.threshold_z1(bp)
        except bounds.NoRootError:
            continue
        if s < z1 or (need_mu and not bounds.mu_of(bp) < 1):
            continue
        return bp


def solution_suites(n=1000, seed=2, c=1.0, suites=None, du=0.02, batch=250):
    """Deflection of actual trajectories (RK4) against the envelopes and proximity constants."""
    suites = Suites() if suites is None else suites
    rng = np.random.default_rng(seed)
    field = weak_field(c)
    d = field.d
    done = 0
    while done < n:
        m = min(batch, n - done)
        bps = [_solution_params(rng, field, True) for _ in range(m)]
        thetas = np.array([_unit(rng, d) for _ in range(m)])
        v = np.array([bp.v_norm for bp in bps])[:, None] * thetas
        x = np.array([_perp(rng, th, bp.x_norm) for th, bp in zip(thetas, bps)])
        grid = dynamics.field_grid(field, float(min(bp.v_norm for bp in bps)),
                                   float(max(bp.x_norm for bp in bps)), du)
        tb = dynamics.integrate_batch(v, x, field, c, grid=grid)
        for j, bp in enumerate(bps):
            _solution_draw(field, bp, v[j], x[j], grid, tb.y[:, j], tb.ydot[:, j], tb.rem[:, j], suites)
        done += m
    return suites


def _solution_draw(field, bp, v, x, grid, y, yd, rem, S):
    c, t = bp.c, grid.t
    info = dict(v_norm=bp.v_norm, x_norm=bp.x_norm, r=bp.r)
    path = dynamics.DeflectionPath(t, y, yd, remainder=rem)
    S.get_suite("solution_in_ball").add(dynamics.norm_T(path), bp.r, **info)
    a, b = yd[-1], rem[-1]
    neg, pos = t <= 0, t >= 0
    S.get_suite("solution_velocity_past").add_pointwise(
        np.linalg.norm(yd[neg], axis=-1), bounds.zeta_minus(bp, t[neg]), **info)
    S.get_suite("solution_offset_past").add_pointwise(
        np.linalg.norm(y[neg], axis=-1), bounds.xi_minus(bp, t[neg]), **info)
    zero = np.zeros_like(y)
    free = dynamics.apply_operator(grid, zero, zero, v, x, field, c)
    pc = bounds.proximity_constants(bp)
    S.get_suite("velocity_first_order").add(np.linalg.norm(a - free.k), pc["eps_a_prime"], **info)
    S.get_suite("velocity_linearized").add(
        np.linalg.norm(a / np.sqrt(1 - bp.v_norm**2 / c**2) - free.dP_total), pc["eps_a"], **info)
    S.get_suite("offset_first_order").add(np.linalg.norm(b - free.l), pc["eps_b"], **info)
    S.get_suite("scattering_velocity_bound").add(np.linalg.norm(a), 2 * bounds.zeta_minus(bp, 0.0), **info)
    S.get_suite("scattering_offset_bound").add(np.linalg.norm(b), 2 * bounds.xi_minus(bp, 0.0), **info)
    # y = a t + b + h for t >= 0, evaluated without cancellation
    hres = rem[pos] - b + t[pos, None] * (yd[pos] - a)
    S.get_suite("residual_velocity_future").add_pointwise(
        np.linalg.norm(yd[pos] - a, axis=-1), bounds.zeta_plus(bp, t[pos]), **info)
    S.get_suite("residual_offset_future").add_pointwise(
        np.linalg.norm(hres, axis=-1), bounds.xi_plus(bp, t[pos]), **info)


def fixed_point_suites(n=1000, seed=3, c=1.0, suites=None, du=0.02):
    """Proximity of k, l at the operator's fixed point to their free-line values."""
    suites = Suites() if suites is None else suites
    rng = np.random.default_rng(seed)
    field = weak_field(c)
    for _ in range(n):
        bp = _solution_params(rng, field, True)
        theta = _unit(rng, field.d)
        v, x = bp.v_norm * theta, _perp(rng, theta, bp.x_norm)
        res = dynamics.solve_deflection_picard(v, x, field, c, r=bp.r, du=du, check=False)
        grid = res.path.grid
        zero = np.zeros_like(res.path.f)
        free = dynamics.apply_operator(grid, zero, zero, v, x, field, c)
        pc = bounds.proximity_constants(bp)
        info = dict(v_norm=bp.v_norm, x_norm=bp.x_norm, r=bp.r)
        k, l = res.op.k, res.op.l
        suites.get_suite("fixed_point_velocity").add(np.linalg.norm(k - free.k), pc["eps_a_prime"], **info)
        suites.get_suite("fixed_point_linearized").add(
            np.linalg.norm(k / np.sqrt(1 - bp.v_norm**2 / c**2) - free.dP_total), pc["eps_a"], **info)
        suites.get_suite("fixed_point_offset").add(np.linalg.norm(l - free.l), pc["eps_b"], **info)
    return suites


def run_all(n=1000, seed=0, c=1.0):
    """Every suite with ``n`` draws each; seeds derived from ``seed``."""
    ss = np.random.SeedSequence(seed).generate_state(4)
    S = Suites()
    operator_suites(n, int(ss[0]), c, S)
    force_suites(n, int(ss[1]), c, S)
    solution_suites(n, int(ss[2]), c, S)
    fixed_point_suites(n, int(ss[3]), c, S)
    return S
