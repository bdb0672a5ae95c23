"""Scattering solutions and scattering data.

Two independent routes compute the deflection y(t) = x(t) - v t - x from
free motion: fixed-point iteration of the integral operator (A^1, A^2) and
direct Runge-Kutta integration of the equation of motion in impulse form.

Time is sampled on t = scale * sinh(u) with u uniform, which resolves the
interaction region and still reaches |t| ~ 1e10 for the algebraic tails.
"""
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from . import bounds
from .kinematics import force, g_increment, gamma, energy_from_impulse


class NotContractiveError(RuntimeError):
    pass


class NoConvergenceError(RuntimeError):
    pass


class StepFailure(RuntimeError):
    pass


@dataclass
class TimeGrid:
    du: float
    umax: float
    scale: float = 1.0

    def __post_init__(self):
        n = int(np.ceil(self.umax / self.du))
        self.u = np.arange(-n, n + 1) * self.du
        self.t = self.scale * np.sinh(self.u)
        self.dt_du = self.scale * np.cosh(self.u)
        self.i0 = n  # index of t = 0

    @property
    def size(self):
        return self.u.size

    def cumulative(self, y):
        """int_{t_0}^{t_i} y dt along axis 0 (left tail assumed negligible)."""
        integrand = y * self.dt_du.reshape((-1,) + (1,) * (np.ndim(y) - 1))
        return cumulative_simpson(integrand, dx=self.du, axis=0, initial=0.0)

    def reverse_cumulative(self, y):
        """int_{t_i}^{t_N} y dt."""
        integrand = y * self.dt_du.reshape((-1,) + (1,) * (np.ndim(y) - 1))
        return cumulative_simpson(integrand[::-1], dx=self.du, axis=0, initial=0.0)[::-1]

    def total(self, y):
        integrand = y * self.dt_du.reshape((-1,) + (1,) * (np.ndim(y) - 1))
        return simpson(integrand, dx=self.du, axis=0)


def time_grid(speed, alpha, du=0.01, rel_tail=1e-10, width=1.0, horizon=None):
    """Grid reaching T with (1 + T)^-(alpha - 1) below ``rel_tail``.

    ``horizon`` overrides T (in time units) for fields known to decay faster
    than their nominal alpha, e.g. Gaussian-localized ones.
    """
    if horizon is None:
        T = min(rel_tail ** (-1.0 / (alpha - 1.0)), 1e30)
    else:
        T = float(horizon)
    scale = width / max(speed, 1e-12)
    return TimeGrid(du, float(np.arcsinh(T / scale)), scale)


def field_grid(field, speed, x_norm=0.0, du=0.01):
    """Time grid for ``field``: compact horizon when the field has an effective radius."""
    R = field.effective_radius
    horizon = None if R is None else (R + x_norm) / speed
    return time_grid(speed, field.alpha, du=du, horizon=horizon)


@dataclass
class DeflectionPath:
    """Sampled pair (f, h) on a time grid; an element of M_{T,r} when certified.

    ``remainder`` optionally carries f - t h computed without cancellation.
    """
    t: np.ndarray
    f: np.ndarray
    h: np.ndarray
    r: float = np.inf
    T: float = np.inf
    remainder: np.ndarray = None

    def rem(self):
        if self.remainder is not None:
            return self.remainder
        return self.f - self.t[:, None] * self.h

    def truncated(self, T):
        """Restriction to ]-inf, T], adding the interpolated point at T."""
        if T >= self.t[-1]:
            return self
        k = int(np.searchsorted(self.t, T, side="right"))
        if k == 0:
            raise ValueError("T lies before the first grid point")
        t = self.t[:k]
        f, h, R = self.f[:k], self.h[:k], self.rem()[:k]
        if t[-1] < T:
            s = (T - self.t[k - 1]) / (self.t[k] - self.t[k - 1])
            fi = (1 - s) * self.f[k - 1] + s * self.f[k]
            hi = (1 - s) * self.h[k - 1] + s * self.h[k]
            dt = self.t[k] - self.t[k - 1]
            dh = self.h[k] - self.h[k - 1]
            Ri = (1 - s) * self.rem()[k - 1] + s * self.rem()[k] + dt * dh * s * (1 - s)
            t = np.append(t, T)
            f = np.vstack([f, fi])
            h = np.vstack([h, hi])
            R = np.vstack([R, Ri])
        return DeflectionPath(t, f, h, self.r, T, R)


def _segment_max_sq(a, b, c):
    """max over s in [0, 1] of |a + b s + c s^2|^2, vectorized over segments."""
    # derivative of |q(s)|^2 / 2: (b + 2 c s).(a + b s + c s^2)
    c3 = 2.0 * np.sum(c * c, -1)
    c2 = 3.0 * np.sum(b * c, -1)
    c1 = np.sum(b * b, -1) + 2.0 * np.sum(a * c, -1)
    c0 = np.sum(a * b, -1)
    best = np.maximum(np.sum(a * a, -1), np.sum((a + b + c) ** 2, -1))
    coeffs = np.stack([c3, c2, c1, c0], axis=-1)
    for i in np.nonzero(np.any(coeffs != 0, axis=-1))[0]:
        roots = np.roots(coeffs[i])
        roots = roots[np.abs(roots.imag) < 1e-12].real
        roots = roots[(roots > 0) & (roots < 1)]
        for s in roots:
            q = a[i] + b[i] * s + c[i] * s * s
            best[i] = max(best[i], q @ q)
    return best


def norm_T(path, T=None):
    """max(sup |h|, sup |f - t h|) over ]-inf, T] for the piecewise-linear interpolant.

    |h| is convex on each segment, so nodes suffice for it; f - t h is
    quadratic on each segment and its maximum is located exactly.
    """
    p = path if T is None else path.truncated(T)
    if p.t.size == 0:
        raise ValueError("empty path")
    sup_h = np.sqrt(np.max(np.sum(p.h**2, -1)))
    R = p.rem()
    if p.t.size == 1:
        return float(max(sup_h, np.linalg.norm(R[0])))
    dt = np.diff(p.t)[:, None]
    dh = np.diff(p.h, axis=0)
    a = R[:-1]
    b = R[1:] - R[:-1] + dt * dh
    c = -dt * dh
    sup_r = np.sqrt(np.max(_segment_max_sq(a, b, c)))
    return float(max(sup_h, sup_r))


# ------------------------------------------------------------ the operator

@dataclass
class OperatorResult:
    """A(f, h) on the grid plus the by-products needed for k, l and H."""
    path: DeflectionPath
    k: np.ndarray
    l: np.ndarray
    l_split: np.ndarray
    H: np.ndarray
    Hdot: np.ndarray
    dP: np.ndarray
    dP_total: np.ndarray


def _dg(p, F, c):
    """Derivative of g at p applied to F."""
    n2 = 1.0 + np.sum(p * p, -1) / c**2
    return (F - p * (np.sum(p * F, -1) / (c**2 * n2))[..., None]) / np.sqrt(n2)[..., None]


def apply_operator(grid, f, h, v, x, field, c=1.0):
    """Evaluate A_{v,x}(f, h) = (A^1, A^2) on ``grid`` (f, h sampled on grid.t)."""
    v = np.asarray(v, float)
    x = np.asarray(x, float)
    if np.linalg.norm(v) >= c or not np.any(v):
        raise ValueError("need 0 < |v| < c")
    t = grid.t
    p0 = gamma(v, c)
    pos = t[:, None] * v + x + f
    F = force(pos, v + h, field, c)
    dP = grid.cumulative(F)
    dP_tot = grid.total(F)
    dP_tail = -grid.reverse_cumulative(F)       # dP(t) - dP(inf)
    A2 = g_increment(p0, dP, c)
    k = g_increment(p0, dP_tot, c)
    A1 = grid.cumulative(A2)
    # f - t h for the image: R(t) = -int_{-inf}^t tau dg(p) F dtau
    acc = _dg(p0 + dP, F, c)
    R = -grid.cumulative(t[:, None] * acc)
    l_parts = -grid.total(t[:, None] * acc)
    Hdot = g_increment(p0 + dP_tot, dP_tail, c)
    H = -grid.reverse_cumulative(Hdot)
    i0 = grid.i0
    l_split = A1[i0] - H[i0]  # split at t = 0
    path = DeflectionPath(t, A1, A2, remainder=R)
    return OperatorResult(path, k, l_parts, l_split, H, Hdot, dP, dP_tot)


def contraction_operator(path, v, x, field, c=1.0, grid=None):
    """Image A_{v,x}(f, h) of a path sampled on a :class:`TimeGrid`."""
    grid = grid or _grid_for(path)
    return apply_operator(grid, path.f, path.h, v, x, field, c).path


def _grid_for(path):
    g = getattr(path, "grid", None)
    if g is None:
        raise ValueError("path is not attached to a TimeGrid; pass grid=")
    return g


# ------------------------------------------------------------ Picard route

@dataclass
class PicardResult:
    path: DeflectionPath
    op: OperatorResult
    iterations: int
    mu: float
    r: float
    increments: list = dc_field(default_factory=list)


def solve_deflection_picard(v, x, field, c=1.0, tol=1e-14, max_iter=200, r=None,
                            grid=None, du=0.01, check=True):
    """Fixed point of A_{v,x} in M_{inf,r}; refuses unless mu < 1 and |v| >= z1.

    Stops when successive iterates differ by at most ``tol`` times sup|h| on
    the grid (relative, so that weak fields converge to full precision too).
    """
    v = np.asarray(v, float)
    x = np.asarray(x, float)
    s = float(np.linalg.norm(v))
    d = v.size
    if abs(v @ x) > 1e-12 * (1 + s * np.linalg.norm(x)):
        raise ValueError("Picard route needs v.x = 0; use scattering_data for general x")
    mu = np.nan
    if check:
        if field.beta is None:
            raise ValueError("field has no decay constants; use fields.with_estimated_beta")
        bp = bounds.BoundParams(c=c, d=d, alpha=field.alpha, beta0=field.beta[0],
                                beta1=field.beta[1], beta2=field.beta[2],
                                r=r if r is not None else 0.5, x_norm=float(np.linalg.norm(x)), v_norm=s)
        if r is None:
            bp = bounds.best_r(bp)
        r = bp.r
        try:
            z1 = bounds.threshold_z1(bp)
        except bounds.NoRootError:
            z1 = np.inf
        mu = bounds.operator_bounds(bp)["mu"]
        if not (mu < 1 and s >= z1):
            raise NotContractiveError(f"mu = {mu:.3g}, |v| = {s:.6g}, z1 = {z1:.6g}: not a contraction")
    grid = grid or field_grid(field, s, float(np.linalg.norm(x)), du)
    n = grid.size
    f = np.zeros((n, d))
    h = np.zeros((n, d))
    incs = []
    for it in range(1, max_iter + 1):
        op = apply_operator(grid, f, h, v, x, field, c)
        inc = max(np.max(np.abs(op.path.f - f)), np.max(np.abs(op.path.h - h)))
        incs.append(float(inc))
        f, h = op.path.f, op.path.h
        if inc <= tol * np.max(np.abs(h)):
            path = op.path
            path.r = r if r is not None else np.inf
            path.grid = grid
            return PicardResult(path, op, it, float(mu), r, incs)
    raise NoConvergenceError(f"no convergence after {max_iter} iterations (last increment {incs[-1]:.3g})")


# ------------------------------------------------------------ ODE route

@dataclass
class TrajectoryBatch:
    grid: TimeGrid
    y: np.ndarray          # (n_t, B, d)
    ydot: np.ndarray
    rem: np.ndarray        # y - t ydot, integrated directly
    dP: np.ndarray
    energy_drift: np.ndarray  # (B,)


def integrate_batch(v, x, field, c=1.0, grid=None, du=0.01, keep_path=True):
    """RK4 in u for a batch of rays; state (y, dp, y - t ydot).

    v, x: arrays (B, d). The particle starts in free motion at the left end of
    the grid; the neglected incoming tail is below the grid's tolerance.
    """
    v = np.atleast_2d(np.asarray(v, float))
    x = np.atleast_2d(np.asarray(x, float))
    speeds = np.linalg.norm(v, axis=-1)
    if np.any(speeds >= c) or np.any(speeds == 0):
        raise ValueError("need 0 < |v| < c for every ray")
    grid = grid or field_grid(field, float(speeds.min()), float(np.linalg.norm(x, axis=-1).max()), du)
    p0 = gamma(v, c)
    scale = grid.scale
    B, d = v.shape

    def rhs(u, y, dp):
        t = scale * np.sinh(u)
        jac = scale * np.cosh(u)
        yd = g_increment(p0, dp, c)
        F = force(t * v + x + y, v + yd, field, c)
        acc = _dg(p0 + dp, F, c)
        return yd * jac, F * jac, -t * acc * jac

    y = np.zeros((B, d))
    dp = np.zeros((B, d))
    z = np.zeros((B, d))
    n = grid.size
    if keep_path:
        Ys = np.empty((n, B, d)); Ps = np.empty((n, B, d)); Zs = np.empty((n, B, d))
        Ys[0], Ps[0], Zs[0] = y, dp, z
    h = grid.du
    E0 = energy_from_impulse(grid.t[0] * v + x, p0, field, c)
    drift = np.zeros(B)
    for i in range(n - 1):
        u = grid.u[i]
        k1 = rhs(u, y, dp)
        k2 = rhs(u + h / 2, y + h / 2 * k1[0], dp + h / 2 * k1[1])
        k3 = rhs(u + h / 2, y + h / 2 * k2[0], dp + h / 2 * k2[1])
        k4 = rhs(u + h, y + h * k3[0], dp + h * k3[1])
        y = y + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        dp = dp + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        z = z + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not np.all(np.isfinite(dp)):
            raise StepFailure("non-finite state; step too coarse")
        if keep_path:
            Ys[i + 1], Ps[i + 1], Zs[i + 1] = y, dp, z
        if i % 8 == 0 or i == n - 2:
            t = grid.t[i + 1]
            E = energy_from_impulse(t * v + x + y, p0 + dp, field, c)
            drift = np.maximum(drift, np.abs(E - E0) / np.abs(E0))
    if keep_path:
        Yd = g_increment(p0[None], Ps, c)
        return TrajectoryBatch(grid, Ys, Yd, Zs, Ps, drift)
    yd = g_increment(p0, dp, c)
    return TrajectoryBatch(grid, y[None], yd[None], z[None], dp[None], drift)


def integrate_trajectory(v, x, field, c=1.0, grid=None, du=0.01):
    """Deflection path of one trajectory by RK4 (see :func:`integrate_batch`)."""
    tb = integrate_batch(v, x, field, c, grid, du)
    path = DeflectionPath(tb.grid.t, tb.y[:, 0], tb.ydot[:, 0], remainder=tb.rem[:, 0])
    path.grid = tb.grid
    path.energy_drift = float(tb.energy_drift[0])
    return path


# ------------------------------------------------------------ scattering data

@dataclass
class ScatteringDatum:
    v_minus: np.ndarray
    x_minus: np.ndarray
    a_sc: np.ndarray
    b_sc: np.ndarray
    method: str
    iterations: int = 0
    mu: float = float("nan")
    energy_drift: float = 0.0


def reduce_offset(v, x):
    """Time-shift reduction: x = x_perp + t0 v with v.x_perp = 0.

    If x(t) solves the equation with data (v, x_perp) then x(t + t0) solves it
    with data (v, x). Hence a_sc is unchanged and b_sc(v, x) = b_sc(v, x_perp) + t0 a_sc.
    """
    v = np.asarray(v, float)
    x = np.asarray(x, float)
    t0 = (v @ x) / (v @ v)
    return x - t0 * v, t0


def scattering_data(v, x, field, method="ode", c=1.0, du=0.01, tol=1e-14, max_iter=200):
    """(a_sc, b_sc) for incoming data (v, x); method is 'ode', 'picard' or 'auto'."""
    v = np.asarray(v, float)
    x = np.asarray(x, float)
    if np.linalg.norm(v) >= c:
        raise ValueError("|v| must be below c")
    xp, t0 = reduce_offset(v, x)
    if method == "auto":
        try:
            return scattering_data(v, x, field, "picard", c, du, tol, max_iter)
        except NotContractiveError:
            method = "ode"
    if method == "picard":
        res = solve_deflection_picard(v, xp, field, c, tol=tol, max_iter=max_iter, du=du)
        a, b = res.op.k, res.op.l
        it, mu, drift = res.iterations, res.mu, 0.0
    elif method == "ode":
        a, b, drift = scattering_batch(v[None], xp[None], field, c, du)
        a, b, drift = a[0], b[0], float(drift[0])
        it, mu = 0, float("nan")
    else:
        raise ValueError(f"unknown method {method!r}")
    return ScatteringDatum(v, x, a, b + t0 * a, method, it, mu, drift)


def scattering_batch(v, xp, field, c=1.0, du=0.01, grid=None):
    """a_sc, b_sc and energy drift for rays with v.x = 0, by RK4."""
    tb = integrate_batch(v, xp, field, c, grid=grid, du=du, keep_path=False)
    return tb.ydot[-1], tb.rem[-1], tb.energy_drift


def write_results_csv(path, rows, d):
    """Rows of (s, theta, x, datum) in the documented results layout."""
    cols = (["s"] + [f"theta_{i+1}" for i in range(d)] + [f"x_{i+1}" for i in range(d)]
            + [f"a_sc_{i+1}" for i in range(d)] + [f"b_sc_{i+1}" for i in range(d)]
            + ["energy_drift", "method", "iters", "mu"])
    fmt = lambda v: format(float(v), ".17g")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for s, theta, xx, dat in rows:
            vals = ([fmt(s)] + [fmt(q) for q in theta] + [fmt(q) for q in xx]
                    + [fmt(q) for q in dat.a_sc] + [fmt(q) for q in dat.b_sc]
                    + [fmt(dat.energy_drift), dat.method, str(dat.iterations), fmt(dat.mu)])
            fh.write(",".join(vals) + "\n")
