"""Recovery of grad V, V and B from the high-energy functionals, and the
non-uniqueness witnesses for w2 and w4.

Samplers are callables. ``w1`` samplers take (thetas, xs) arrays of shape
(..., d) and return (..., d); ``w1_tilde``-type samplers take (y, x) vectors.
"""
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import asymptotics as asy
from . import dynamics
from .fields import radial_magnetic_2d, inverse_power_electric
from .kinematics import lorentz_factor
from .xray import (GridFunction, Plane, Ray, Sinogram, invert_xray_2d, ray_grid_2d,
                   rel_l2, write_grid_csv)

FD_Y = 1e-4
FD_X = 1e-3
FD_XX = 2e-3


class OffManifoldError(ValueError):
    pass


class CurlWarning(UserWarning):
    pass


@dataclass
class ReconstructionReport:
    target: str
    estimate: GridFunction
    truth: GridFunction
    error: float
    provenance: str
    meta: dict = dc_field(default_factory=dict)

    def write(self, stem):
        """``stem``.csv (estimate grid) and ``stem``.txt (key = value sidecar)."""
        write_grid_csv(f"{stem}.csv", self.estimate)
        lines = [f"target = {self.target}", f"error = {format(self.error, '.17g')}",
                 f"provenance = {self.provenance}"]
        for k in sorted(self.meta):
            v = self.meta[k]
            lines.append(f"{k} = {format(v, '.17g') if isinstance(v, float) else v}")
        with open(f"{stem}.txt", "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def exact_w1_sampler(field, tol=asy.TOL):
    return lambda thetas, xs: asy.w1(field, (thetas, xs), tol)


# ------------------------------------------------------------ pointwise formulas

def pgradv_from_w1(w1, ray):
    """P(grad V)(theta, x) = -(w1(theta, x) + w1(-theta, x)) / 2."""
    th, x = ray.theta[None], ray.x[None]
    return -0.5 * (w1(th, x)[0] + w1(-th, x)[0])


def _check_plane_ray(theta, i, k, tol=1e-12):
    others = np.delete(np.abs(theta), [i, k])
    if i == k or (others.size and others.max() > tol):
        raise OffManifoldError("direction must be supported on coordinates i and k")
    if abs(theta[i] ** 2 + theta[k] ** 2 - 1.0) > tol:
        raise OffManifoldError("need theta_i^2 + theta_k^2 = 1")


def pb_plane_combination(w_plus, w_minus, theta, i, k):
    """theta_k (w+_i - w-_i)/2 - theta_i (w+_k - w-_k)/2 (batched over leading axes)."""
    odd = 0.5 * (w_plus - w_minus)
    return theta[..., k] * odd[..., i] - theta[..., i] * odd[..., k]


def pb_from_w1_plane(w1, ray, i, k):
    """P B_ik on rays whose direction lies in span(e_i, e_k)."""
    _check_plane_ray(ray.theta, i, k)
    th, x = ray.theta[None], ray.x[None]
    return float(pb_plane_combination(w1(th, x)[0], w1(-th, x)[0], ray.theta, i, k))


def _dy(fun, y, x, k, comp, h):
    if not h > 1e-12:
        raise ValueError("finite-difference step underflow")
    e = np.zeros_like(y)
    e[k] = h
    return (fun(y + e, x)[comp] - fun(y - e, x)[comp]) / (2 * h)


def pb_from_w1_derivative(w1_tilde, ray, i, k, h=FD_Y):
    """Half-sum over y = +-theta of (d_{y_k} w~1_i - d_{y_i} w~1_k), derivatives taken at the point."""
    th, x = ray.theta, ray.x
    tot = 0.0
    for y in (th, -th):
        tot += _dy(w1_tilde, y, x, k, i, h) - _dy(w1_tilde, y, x, i, k, h)
    return 0.5 * tot


def pb_from_w3(w3_tilde, ray, i, k, form="derivative", h=FD_Y):
    """P B_ik from w3: y-derivative form, or the plane form theta_k w3_i - theta_i w3_k."""
    th, x = ray.theta, ray.x
    if form == "derivative":
        return _dy(w3_tilde, th, x, k, i, h) - _dy(w3_tilde, th, x, i, k, h)
    if form == "plane":
        _check_plane_ray(th, i, k)
        w = w3_tilde(th, x)
        return float(th[k] * w[i] - th[i] * w[k])
    raise ValueError(f"unknown form {form!r}")


# ------------------------------------------------------------ simulated data on a plane

@dataclass
class PlaneData:
    """w1 estimates from scattering data at speed s on the rays of a plane, both orientations."""
    plane: Plane
    phi: np.ndarray
    q: np.ndarray
    s: float
    thetas: np.ndarray
    xs: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    drift: float
    systematic: float = float("nan")


def simulate_plane(field, s, plane=None, n_angles=120, n_offsets=129, extent=5.0, du=0.04,
                   exact=True):
    """Forward-simulate a_sc on +-theta rays and convert with s/sqrt(1 - s^2/c^2).

    With ``exact`` the largest deviation from quadrature w1 is recorded as the
    systematic (finite-speed) error of the data.
    """
    c = field.params.c
    if not 0 < s < c:
        raise ValueError("speed must lie in (0, c)")
    plane = plane or Plane.coordinate(field.d)
    phi, q = ray_grid_2d(n_angles, n_offsets, extent)
    th, xs = plane.embed_rays(phi, q)
    d = field.d
    T = th.reshape(-1, d)
    X = xs.reshape(-1, d)
    g = float(lorentz_factor(s, c)) * s
    grid = dynamics.field_grid(field, s, float(np.linalg.norm(X, axis=-1).max()), du)
    a_p, _, dr_p = dynamics.scattering_batch(s * T, X, field, c, grid=grid)
    a_m, _, dr_m = dynamics.scattering_batch(-s * T, X, field, c, grid=grid)
    shape = th.shape
    out = PlaneData(plane, phi, q, s, th, xs, (g * a_p).reshape(shape), (g * a_m).reshape(shape),
                    float(max(dr_p.max(), dr_m.max())))
    if exact:
        wp = asy.w1(field, (T, X)).reshape(shape)
        wm = asy.w1(field, (-T, X)).reshape(shape)
        out.systematic = float(max(np.abs(wp - out.w_plus).max(), np.abs(wm - out.w_minus).max()))
    return out


def _truth_grid(fun, plane, n, extent, label):
    axis = np.linspace(-extent, extent, n)
    U1, U2 = np.meshgrid(axis, axis, indexing="ij")
    pts = plane.embed(np.stack([U1, U2], axis=-1))
    return GridFunction(axis, fun(pts), label)


def reconstruct_B(data, field, i=0, k=1, n=129, extent=3.5):
    """B_ik on the plane from +-theta data via the plane combination and FBP."""
    pl = data.plane
    off = np.delete(np.abs(np.stack([pl.e1, pl.e2])), [i, k], axis=1)
    if i == k or (off.size and off.max() > 1e-12):
        raise OffManifoldError("plane tangent space must be span(e_i, e_k)")
    sino_vals = pb_plane_combination(data.w_plus, data.w_minus, data.thetas, i, k)
    sino = Sinogram(data.phi, data.q, sino_vals, f"PB_{i+1}{k+1}")
    est = invert_xray_2d(sino, n, extent)
    truth = _truth_grid(lambda p: field.B(p)[..., i, k], pl, n, extent, f"B_{i+1}{k+1}")
    return ReconstructionReport(f"B_{i+1}{k+1}", est, truth, rel_l2(est, truth),
                                "a_sc -> w1 (speed scaling) -> odd part -> PB -> FBP",
                                dict(s=data.s, systematic=data.systematic, energy_drift=data.drift,
                                     n_angles=data.phi.size, n_offsets=data.q.size))


def integrate_gradient(g1, g2, axis):
    """V from its plane gradient, integrating from the low boundary where V ~ 0.

    Returns (row-integrated, column-integrated) grids.
    """
    rows = cumulative_trapezoid(g1, axis, axis=0, initial=0.0)
    cols = cumulative_trapezoid(g2, axis, axis=1, initial=0.0)
    return rows, cols


def reconstruct_V(data, field, n=129, extent=3.5, curl_tol=0.05):
    """V on the plane: P grad V from the even part, FBP per in-plane component, then line integration."""
    pl = data.plane
    pg = -0.5 * (data.w_plus + data.w_minus)
    comps = []
    for e in (pl.e1, pl.e2):
        sino = Sinogram(data.phi, data.q, pg @ e, "P dV")
        comps.append(invert_xray_2d(sino, n, extent).values)
    axis = np.linspace(-extent, extent, n)
    rows, cols = integrate_gradient(comps[0], comps[1], axis)
    est = GridFunction(axis, 0.5 * (rows + cols), "V")
    truth = _truth_grid(field.V, pl, n, extent, "V")
    scale = max(np.linalg.norm(est.values), 1e-300)
    path_gap = float(np.linalg.norm(rows - cols) / scale)
    du = axis[1] - axis[0]
    curl = np.gradient(comps[0], du, axis=1) - np.gradient(comps[1], du, axis=0)
    gscale = max(np.linalg.norm(comps[0]) + np.linalg.norm(comps[1]), 1e-300)
    curl_rel = float(np.linalg.norm(curl) * du / gscale)
    if curl_rel > curl_tol:
        warnings.warn(f"reconstructed gradient has relative discrete curl {curl_rel:.3g}", CurlWarning)
    return ReconstructionReport("V", est, truth, rel_l2(est, truth),
                                "a_sc -> w1 (speed scaling) -> even part -> P grad V -> FBP -> line integration",
                                dict(s=data.s, systematic=data.systematic, energy_drift=data.drift,
                                     path_gap=path_gap, curl=curl_rel,
                                     n_angles=data.phi.size, n_offsets=data.q.size))


# ------------------------------------------------------------ w4-based formulas

def _dx(fun, x, l, h):
    e = np.zeros_like(x)
    e[l] = h
    return (fun(x + e) - fun(x - e)) / (2 * h)


def w4_x_curl(field, theta, x, i, k, h=FD_X):
    """d_{x_i} w~4_k - d_{x_k} w~4_i at (theta, x), central differences."""
    f = lambda p: asy.w4_tilde(field, theta, p)
    return _dx(f, x, i, h)[k] - _dx(f, x, k, h)[i]


def w4_identity_check(field, ray, i, k, h=FD_X):
    """Residual of sum_j theta_j [theta_k PB_ij - theta_i PB_kj] - PB_ik = d_i w~4_k - d_k w~4_i."""
    th, x = ray.theta, ray.x
    PB = asy.xray_B(field, ray)
    lhs = sum(th[j] * (th[k] * PB[i, j] - th[i] * PB[k, j]) for j in range(th.size)) - PB[i, k]
    return float(abs(lhs - w4_x_curl(field, th, x, i, k, h)))


def w4_second_derivs(field, theta, ys, h=FD_XX):
    """Second x-derivatives D[n, l, m, :] = d_l d_m w~4 at points ys (n, d), nested central differences."""
    ys = np.atleast_2d(ys)
    n, d = ys.shape
    E = np.eye(d) * h
    offsets = [(0, 0)]
    for l in range(d):
        for m in range(l, d):
            for sl in (1, -1):
                for sm in (1, -1):
                    offsets.append((l, m, sl, sm))
    # evaluate w~4 at every shifted point in one batch
    shifts = np.array([np.zeros(d)] + [sl * E[l] + sm * E[m] for (l, m, sl, sm) in offsets[1:]])
    P = (ys[:, None, :] + shifts[None]).reshape(-1, d)
    Y = np.broadcast_to(theta, P.shape)
    W = asy.w4_tilde_batch(field, Y, P).reshape(n, len(offsets), d)
    D = np.zeros((n, d, d, d))
    idx = 1
    for l in range(d):
        for m in range(l, d):
            pp, pm, mp, mm = (W[:, idx + j] for j in range(4))
            idx += 4
            D[:, l, m] = D[:, m, l] = (pp - pm - mp + mm) / (4 * h * h)
    return D


def w4_tensor(D, m, n, l):
    """w~4_{m,n,l} = d_l (d_m w~4_n - d_n w~4_m) from second derivatives D[..., l, m, comp]."""
    return D[..., l, m, n] - D[..., l, n, m]


def _orthonormal_pair(p):
    p = np.asarray(p, float)
    a = np.eye(3)[np.argmin(np.abs(p))]
    t1 = np.cross(p, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(p / np.linalg.norm(p), t1)
    return t1, t2


@dataclass
class PlaneQuadrature:
    """Tensor Gauss-Legendre rule on [-L, L]^2 inside the plane orthogonal to theta."""
    theta: np.ndarray
    L: float = 6.0
    n: int = 48

    def __post_init__(self):
        self.theta = np.asarray(self.theta, float)
        u, w = np.polynomial.legendre.leggauss(self.n)
        u, w = u * self.L, w * self.L
        self.e1, self.e2 = _orthonormal_pair(self.theta)
        U1, U2 = np.meshgrid(u, u, indexing="ij")
        self.points = U1.reshape(-1, 1) * self.e1 + U2.reshape(-1, 1) * self.e2
        self.weights = np.outer(w, w).reshape(-1)


class W4PlaneCache:
    """Second x-derivatives of w~4 on plane quadrature grids, reused across frequencies."""

    def __init__(self, field, L=None, n=48, h=FD_XX):
        if field.d != 3:
            raise ValueError("Fourier reconstruction from w4 is for d = 3")
        self.field = field
        R = field.effective_radius
        self.L = L if L is not None else (min(R, 8.0) if R is not None else 8.0)
        self.n = n
        self.h = h
        self._cache = {}

    def get(self, theta):
        key = tuple(np.round(np.asarray(theta, float), 14))
        if key not in self._cache:
            pq = PlaneQuadrature(theta, self.L, self.n)
            D = w4_second_derivs(self.field, pq.theta, pq.points, self.h)
            self._cache[key] = (pq, D)
        return self._cache[key]


def fourier_B_derivs_from_w4(cache, p, l, basis=None):
    """(-F B_23,l, F B_13,l, -F B_12,l)(p) from plane integrals of w~4_{m,n,l}.

    p = 0 sums over an orthonormal basis of R^3, otherwise over an orthonormal
    pair of the plane orthogonal to p. F uses the (2 pi)^(-3/2) normalization.
    """
    p = np.asarray(p, float)
    if basis is None:
        basis = np.eye(3) if not np.any(p) else _orthonormal_pair(p)
    out = np.zeros(3, complex)
    for th in basis:
        th = np.asarray(th, float)
        pq, D = cache.get(th)
        phase = np.exp(-1j * (pq.points @ p))
        I = [np.sum(pq.weights * phase * sgn * w4_tensor(D, m, n, l))
             for sgn, (m, n) in ((1, (1, 2)), (-1, (0, 2)), (1, (0, 1)))]
        out += (th @ np.array(I)) * th
    return out * (2 * np.pi) ** -1.5


def fourier_B_derivs_direct(field, p, l, L=None, n=64):
    """Direct oracle: (-F B_23,l, F B_13,l, -F B_12,l)(p) by 3-D Gauss-Legendre on [-L, L]^3."""
    R = field.effective_radius
    L = L if L is not None else (min(R, 8.0) if R is not None else 8.0)
    u, w = np.polynomial.legendre.leggauss(n)
    u, w = u * L, w * L
    X = np.stack(np.meshgrid(u, u, u, indexing="ij"), -1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
    G = field.dB(X)[..., l]
    ph = W * np.exp(-1j * (X @ np.asarray(p, float)))
    F = lambda m, k: np.sum(ph * G[:, m, k])
    return np.array([-F(1, 2), F(0, 2), -F(0, 1)]) * (2 * np.pi) ** -1.5


def pb_from_w4_d4(field, ray, j, k, h=FD_X):
    """P B_jk on rays with theta_j = theta_k = 0 (d >= 4): d_k w~4_j - d_j w~4_k."""
    th = ray.theta
    if field.d < 4:
        raise ValueError("needs d >= 4")
    if max(abs(th[j]), abs(th[k])) > 1e-12:
        raise OffManifoldError("need theta_j = theta_k = 0")
    return w4_x_curl(field, th, ray.x, k, j, h)


def reconstruct_B_from_w4_d4(field, j, k, plane, n_angles=48, n_offsets=65, extent=5.0,
                             n=65, grid_extent=3.0, h=FD_X):
    """B_jk on a plane whose tangent space avoids e_j, e_k, from w~4 x-derivatives and FBP."""
    if max(abs(plane.e1[j]), abs(plane.e1[k]), abs(plane.e2[j]), abs(plane.e2[k])) > 1e-12:
        raise OffManifoldError("plane directions must have zero j and k components")
    phi, q = ray_grid_2d(n_angles, n_offsets, extent)
    th, xs = plane.embed_rays(phi, q)
    d = field.d
    T = th.reshape(-1, d)
    X = xs.reshape(-1, d)
    ek, ej = np.eye(d)[k] * h, np.eye(d)[j] * h
    w = lambda Xs: asy.w4_tilde_batch(field, T, Xs)
    vals = (w(X + ek)[:, j] - w(X - ek)[:, j]) / (2 * h) - (w(X + ej)[:, k] - w(X - ej)[:, k]) / (2 * h)
    sino = Sinogram(phi, q, vals.reshape(th.shape[:2]), f"PB_{j+1}{k+1}")
    est = invert_xray_2d(sino, n, grid_extent)
    truth = _truth_grid(lambda pts: field.B(pts)[..., j, k], plane, n, grid_extent, f"B_{j+1}{k+1}")
    return ReconstructionReport(f"B_{j+1}{k+1}", est, truth, rel_l2(est, truth),
                                "w~4 x-derivatives -> PB -> FBP", dict(n_angles=n_angles, n_offsets=n_offsets))


# ------------------------------------------------------------ non-uniqueness

def random_rays(d, n, seed=0, scale=2.0):
    rng = np.random.default_rng(seed)
    th = rng.normal(size=(n, d))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    x = rng.normal(size=(n, d)) * scale
    x -= np.sum(x * th, axis=1, keepdims=True) * th
    return th, x


def nonuniqueness_demo(kind="magnetic2d", n_rays=500, seed=0, field=None):
    """Witness that a nonzero field is invisible to w4 (magnetic2d) or w2 (electric)."""
    th, xs = random_rays(2, n_rays, seed)
    if kind == "magnetic2d":
        f = field or radial_magnetic_2d(b0=1.0, sigma=1.5)
        w4 = asy.w4(f, (th, xs))
        w3 = asy.w3(f, (th, xs))
        return dict(kind=kind, field=f.name, n_rays=n_rays, max_w4=float(np.abs(w4).max()),
                    max_w3=float(np.abs(w3).max()))
    if kind == "electric":
        f = field or inverse_power_electric(2, v0=1.0, alpha=2.0)
        w2 = asy.w2(f, (th, xs))
        w1 = asy.w1(f, (th, xs))
        return dict(kind=kind, field=f.name, n_rays=n_rays, max_w2=float(np.abs(w2).max()),
                    max_w1=float(np.abs(w1).max()))
    if kind == "zero":
        from .fields import zero_field
        f = zero_field(2)
        vals = [np.abs(fn(f, (th, xs))).max() for fn in (asy.w1, asy.w2, asy.w3, asy.w4)]
        return dict(kind=kind, field="zero", n_rays=n_rays, max_all=float(max(vals)))
    raise ValueError(f"unknown kind {kind!r}")
