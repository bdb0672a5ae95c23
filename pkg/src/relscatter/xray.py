"""Ray geometry, the X-ray transform and 2-D filtered back-projection."""
from dataclasses import dataclass, field as dc_field

import numpy as np


class NonConvergenceError(RuntimeError):
    pass


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class Ray:
    """Oriented line {x + t theta}; theta is unit and orthogonal to x."""
    theta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, float)
        x = np.asarray(self.x, float)
        if th.shape != x.shape or th.ndim != 1:
            raise ValueError("theta and x must be vectors of equal length")
        if abs(np.linalg.norm(th) - 1.0) > 1e-12 or abs(th @ x) > 1e-12 * (1 + np.linalg.norm(x)):
            raise ValueError("not a point of TS^{d-1}: need |theta| = 1 and theta.x = 0")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "x", x)

    def reversed(self):
        return Ray(-self.theta, self.x)


def project_to_ray(y, x):
    """Ray through ``x`` with direction ``y``: (y/|y|, x - (x.y/|y|^2) y)."""
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    n2 = y @ y
    if not n2 > 0:
        raise ValueError("zero direction")
    theta = y / np.sqrt(n2)
    off = x - (x @ y / n2) * y
    off = off - (off @ theta) * theta
    return Ray(theta, off)


def orthogonalize(thetas, xs):
    """Batch version of the offset normalization: rows of ``xs`` made orthogonal to unit ``thetas``."""
    thetas = np.asarray(thetas, float)
    xs = np.asarray(xs, float)
    return xs - np.sum(xs * thetas, axis=-1, keepdims=True) * thetas


# ------------------------------------------------------------ line quadrature

@dataclass
class LineRule:
    """Trapezoid rule in u for t = t0 + scale * sinh(u) on [-umax, umax].

    Algebraically decaying integrands become exponentially decaying in u, for
    which the uniform trapezoid rule converges geometrically.
    """
    du: float
    umax: float
    scale: float = 1.0
    t0: float = 0.0

    @property
    def u(self):
        n = int(np.ceil(self.umax / self.du))
        return np.arange(-n, n + 1) * self.du

    @property
    def t(self):
        return self.t0 + self.scale * np.sinh(self.u)

    @property
    def weights(self):
        return self.du * self.scale * np.cosh(self.u)

    def refined(self):
        return LineRule(self.du / 2.0, self.umax, self.scale, self.t0)


def horizon(decay, tol=1e-13, const=1.0, tmin=50.0, tmax=1e30):
    """Radius T with const * T^(1-decay)/(decay-1) < tol (tail of |t|^-decay)."""
    if not decay > 1:
        raise NonConvergenceError(f"integrand decay exponent {decay} <= 1: line integral diverges")
    T = (max(const, 1e-300) / (tol * (decay - 1.0))) ** (1.0 / (decay - 1.0))
    return float(np.clip(T, tmin, tmax))


def default_rule(decay, tol=1e-13, const=1.0, scale=1.0, du=0.125):
    T = horizon(decay, tol, const)
    return LineRule(du=du, umax=float(np.arcsinh(T / scale)), scale=scale)


def integrate_lines(fun, thetas, xs, decay, weight=None, tol=1e-10, rule=None,
                    max_refine=8, const=1.0, relative=False):
    """Integrate ``fun`` over the lines x + t theta for a batch of rays.

    ``fun`` maps points (..., d) to values (..., m) or (...). ``weight`` is an
    optional callable of t multiplying the integrand (e.g. t itself for the
    first-moment integrals). The rule is refined by halving du until two
    successive estimates agree to ``tol`` (absolute, scaled by 1 + |I|; with
    ``relative`` the scale is the largest int |f| in the batch instead of 1).
    Returns an array of shape ``thetas.shape[:-1] + value_shape``.
    """
    thetas = np.asarray(thetas, float)
    xs = np.asarray(xs, float)
    rule = rule or default_rule(decay, const=const)

    def estimate(r):
        t = r.t
        w = r.weights if weight is None else r.weights * weight(t)
        pts = xs[..., None, :] + t[:, None] * thetas[..., None, :]
        vals = np.moveaxis(np.asarray(fun(pts)), thetas.ndim - 1, -1)
        val = np.tensordot(vals, w, axes=([-1], [0]))
        mag = np.tensordot(np.abs(vals), np.abs(w), axes=([-1], [0])) if relative else None
        return val, mag

    prev, _ = estimate(rule)
    for _ in range(max_refine):
        rule = rule.refined()
        cur, mag = estimate(rule)
        ref = np.max(mag, initial=0.0) if relative else 1.0
        if np.all(np.abs(cur - prev) <= tol * (ref + np.abs(cur))):
            return cur
        prev = cur
    raise NonConvergenceError("line quadrature did not converge")


def xray_transform(f, ray, decay=2.0, tol=1e-10):
    """P f(theta, x) = int f(t theta + x) dt for one ray."""
    return integrate_lines(f, ray.theta, ray.x, decay, tol=tol)


# ------------------------------------------------------------ 2-D sampling

@dataclass
class Sinogram:
    """Samples of P f on angles phi (theta = (cos, sin)) and offsets q along theta_perp."""
    phi: np.ndarray
    q: np.ndarray
    values: np.ndarray
    label: str = ""
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, float)
        self.q = np.asarray(self.q, float)
        self.values = np.asarray(self.values, float)
        if self.values.shape[:2] != (self.phi.size, self.q.size):
            raise ValueError("values must have shape (n_angles, n_offsets[, m])")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite sinogram values")
        for g in (self.phi, self.q):
            if g.size > 1 and np.any(np.diff(g) <= 0):
                raise ValueError("sinogram grids must be strictly increasing")

    def __add__(self, other):
        return Sinogram(self.phi, self.q, self.values + other.values, self.label)

    def component(self, k):
        return Sinogram(self.phi, self.q, self.values[..., k], f"{self.label}[{k}]")


@dataclass
class GridFunction:
    """Values on the square grid axis x axis (values[i, j] at (axis[i], axis[j]))."""
    axis: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.axis = np.asarray(self.axis, float)
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.axis.size, self.axis.size):
            raise ValueError("grid values must be square over the axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite grid values")

    @property
    def mesh(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def points(self):
        X1, X2 = self.mesh
        return np.stack([X1, X2], axis=-1)


def grid_like(fun, n=129, extent=4.0, label=""):
    axis = np.linspace(-extent, extent, n)
    X1, X2 = np.meshgrid(axis, axis, indexing="ij")
    return GridFunction(axis, fun(np.stack([X1, X2], axis=-1)), label)


def rel_l2(est, truth):
    num = np.linalg.norm(np.asarray(est.values) - np.asarray(truth.values))
    den = np.linalg.norm(np.asarray(truth.values))
    return float(num / den) if den > 0 else float(num)


def ray_grid_2d(n_angles, n_offsets, extent, full_circle=False):
    """Angles in [0, pi) (or [0, 2 pi)) and offsets linspace(-extent, extent)."""
    span = 2 * np.pi if full_circle else np.pi
    phi = np.arange(n_angles) * span / n_angles
    q = np.linspace(-extent, extent, n_offsets)
    return phi, q


def ray_points_2d(phi, q):
    """thetas and offset points, shape (n_angles, n_offsets, 2)."""
    th = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    perp = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
    thetas = np.broadcast_to(th[:, None, :], (phi.size, q.size, 2))
    xs = q[None, :, None] * perp[:, None, :]
    return thetas, xs


def sample_sinogram(f, n_angles=180, n_offsets=257, extent=8.0, decay=2.0, tol=1e-10, label=""):
    phi, q = ray_grid_2d(n_angles, n_offsets, extent)
    thetas, xs = ray_points_2d(phi, q)
    vals = integrate_lines(f, thetas, xs, decay, tol=tol)
    return Sinogram(phi, q, vals, label)


# ------------------------------------------------------------ inversion

def ramp_kernel(n_pad, dq):
    """Discrete Ram-Lak kernel response (frequency domain), raised-cosine apodized."""
    k = np.arange(-(n_pad // 2), n_pad // 2)
    h = np.zeros(n_pad)
    h[k == 0] = 1.0 / (4.0 * dq**2)
    odd = (k % 2) == 1
    h[odd] = -1.0 / (np.pi * k[odd] * dq) ** 2
    H = np.real(np.fft.fft(np.fft.ifftshift(h))) * dq
    nu = np.abs(np.fft.fftfreq(n_pad))  # cycles/sample, Nyquist at 0.5
    return H * 0.5 * (1.0 + np.cos(2.0 * np.pi * nu))


def invert_xray_2d(sino, n=129, extent=None):
    """Filtered back-projection of a scalar sinogram on an n x n grid.

    Angles must cover [0, pi) uniformly. The reconstruction grid spans
    [-extent, extent]^2 (default: the offset range divided by sqrt 2).
    """
    if sino.phi.size < 2 or sino.q.size < 2:
        raise CoverageError("need at least 2 angles and 2 offsets")
    vals = np.asarray(sino.values, float)
    if vals.ndim != 2:
        raise ValueError("invert one component at a time")
    q = sino.q
    dq = q[1] - q[0]
    if extent is None:
        extent = q[-1] / np.sqrt(2.0)
    n_q = q.size
    n_pad = int(2 ** np.ceil(np.log2(2 * n_q)))
    H = ramp_kernel(n_pad, dq)
    padded = np.zeros((vals.shape[0], n_pad))
    padded[:, :n_q] = vals
    filtered = np.real(np.fft.ifft(np.fft.fft(padded, axis=1) * H, axis=1))[:, :n_q]
    axis = np.linspace(-extent, extent, n)
    X1, X2 = np.meshgrid(axis, axis, indexing="ij")
    out = np.zeros_like(X1)
    dphi = np.pi / sino.phi.size
    for k, phi in enumerate(sino.phi):
        s = -X1 * np.sin(phi) + X2 * np.cos(phi)
        out += np.interp(s, q, filtered[k], left=0.0, right=0.0)
    return GridFunction(axis, out * dphi, sino.label)


# ------------------------------------------------------------ planes

@dataclass
class Plane:
    """Affine 2-plane point + u1 e1 + u2 e2 with orthonormal e1, e2."""
    point: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self):
        self.point = np.asarray(self.point, float)
        self.e1 = np.asarray(self.e1, float)
        self.e2 = np.asarray(self.e2, float)
        G = np.array([[self.e1 @ self.e1, self.e1 @ self.e2], [self.e2 @ self.e1, self.e2 @ self.e2]])
        if np.max(np.abs(G - np.eye(2))) > 1e-12:
            raise ValueError("plane tangent vectors must be orthonormal")

    @classmethod
    def coordinate(cls, d, i=0, k=1, point=None):
        e = np.eye(d)
        return cls(np.zeros(d) if point is None else point, e[i], e[k])

    def embed(self, u):
        u = np.asarray(u, float)
        return self.point + u[..., :1] * self.e1 + u[..., 1:2] * self.e2

    def embed_rays(self, phi, q):
        """2-D rays (phi, q) of the plane as d-dimensional (theta, x) with theta.x = 0."""
        th2, x2 = ray_points_2d(np.asarray(phi, float), np.asarray(q, float))
        thetas = th2[..., :1] * self.e1 + th2[..., 1:2] * self.e2
        xs = self.embed(x2)
        return thetas, orthogonalize(thetas, xs)


def restrict_to_plane(f, plane):
    """Induced 2-D function u -> f(point + u1 e1 + u2 e2) and the embedding map."""
    return (lambda u: f(plane.embed(u))), plane.embed


# ------------------------------------------------------------ CSV formats

def _fmt(v):
    return format(float(v), ".17g")


def write_sinogram_csv(path, sino):
    vals = sino.values if sino.values.ndim == 3 else sino.values[..., None]
    with open(path, "w", newline="\n") as fh:
        fh.write("phi,q,component,value\n")
        for i, phi in enumerate(sino.phi):
            for j, q in enumerate(sino.q):
                for m in range(vals.shape[2]):
                    fh.write(f"{_fmt(phi)},{_fmt(q)},{m},{_fmt(vals[i, j, m])}\n")


def read_sinogram_csv(path, label=""):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    phi = np.unique(data[:, 0])
    q = np.unique(data[:, 1])
    m = int(data[:, 2].max()) + 1
    vals = data[:, 3].reshape(phi.size, q.size, m)
    return Sinogram(phi, q, vals[..., 0] if m == 1 else vals, label)


def write_grid_csv(path, grid):
    with open(path, "w", newline="\n") as fh:
        fh.write("x1,x2,value\n")
        for i, a in enumerate(grid.axis):
            for j, b in enumerate(grid.axis):
                fh.write(f"{_fmt(a)},{_fmt(b)},{_fmt(grid.values[i, j])}\n")


def read_grid_csv(path, label=""):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    axis = np.unique(data[:, 0])
    return GridFunction(axis, data[:, 2].reshape(axis.size, axis.size), label)
