"""Static electromagnetic field families with closed-form derivatives.

A field supplies the scalar potential ``V``, the vector potential ``A`` and
the antisymmetric magnetic matrix ``B[i, k] = d_i A_k - d_k A_i`` together
with their derivatives. Every method accepts points of shape ``(..., d)``.
"""
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import minimize

from .kinematics import PhysicsParams


class QuadratureError(RuntimeError):
    pass


class FieldModel:
    """Base class; the zero field. Subclasses override what they need."""

    def __init__(self, params, beta=None, name="zero"):
        self.params = params
        self.beta = beta
        self.name = name

    @property
    def d(self):
        return self.params.d

    @property
    def alpha(self):
        return self.params.alpha

    def _pts(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"expected points with last axis {self.d}, got {x.shape}")
        return x

    def V(self, x):
        return np.zeros(self._pts(x).shape[:-1])

    def gradV(self, x):
        return np.zeros(self._pts(x).shape)

    def hessV(self, x):
        x = self._pts(x)
        return np.zeros(x.shape + (self.d,))

    def A(self, x):
        return np.zeros(self._pts(x).shape)

    def jacA(self, x):
        """J[..., i, j] = d A_i / d x_j."""
        x = self._pts(x)
        return np.zeros(x.shape + (self.d,))

    def d2A(self, x):
        """H[..., i, j, l] = d^2 A_i / d x_j d x_l."""
        x = self._pts(x)
        return np.zeros(x.shape + (self.d, self.d))

    def B(self, x):
        J = self.jacA(x)
        return np.swapaxes(J, -1, -2) - J

    def dB(self, x):
        """G[..., i, k, l] = d B_ik / d x_l."""
        H = self.d2A(x)
        return np.swapaxes(H, -2, -3) - H

    @property
    def is_zero(self):
        return type(self) is FieldModel

    @property
    def effective_radius(self):
        """Radius outside which the field is below double precision, or None if it only decays algebraically."""
        return 1.0 if self.is_zero else None

    def with_beta(self, beta):
        out = object.__new__(type(self))
        out.__dict__.update(self.__dict__)
        out.beta = beta
        return out

    def __add__(self, other):
        return SumField([self, other])

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} d={self.d} alpha={self.alpha}>"


def zero_field(d=2, alpha=2.0, c=1.0):
    return FieldModel(PhysicsParams(c=c, d=d, alpha=alpha), beta=(0.0, 0.0, 0.0))


# radial profiles phi(t), t = |y|^2, with first and second derivatives

@dataclass(frozen=True)
class GaussianProfile:
    w: float = 1.0

    def __call__(self, t):
        return np.exp(-t / self.w**2)

    def d1(self, t):
        return -np.exp(-t / self.w**2) / self.w**2

    def d2(self, t):
        return np.exp(-t / self.w**2) / self.w**4


@dataclass(frozen=True)
class PowerProfile:
    p: float = 1.0

    def __call__(self, t):
        return (1.0 + t) ** (-self.p)

    def d1(self, t):
        return -self.p * (1.0 + t) ** (-self.p - 1.0)

    def d2(self, t):
        return self.p * (self.p + 1.0) * (1.0 + t) ** (-self.p - 2.0)


class ProfileField(FieldModel):
    """V = v0 phi_V(|x - cv|^2) and A = b0 phi_A(|x - ca|^2) M (x - ca)."""

    def __init__(self, params, v0=0.0, vprofile=None, vcenter=None,
                 b0=0.0, aprofile=None, matrix=None, acenter=None,
                 beta=None, name="profile"):
        super().__init__(params, beta=beta, name=name)
        d = params.d
        self.v0 = float(v0)
        self.b0 = float(b0)
        self.vprofile = vprofile or GaussianProfile()
        self.aprofile = aprofile or GaussianProfile()
        self.vcenter = np.zeros(d) if vcenter is None else np.asarray(vcenter, float)
        self.acenter = np.zeros(d) if acenter is None else np.asarray(acenter, float)
        self.matrix = np.zeros((d, d)) if matrix is None else np.asarray(matrix, float)
        if self.matrix.shape != (d, d) or self.vcenter.shape != (d,) or self.acenter.shape != (d,):
            raise ValueError("center/matrix shapes do not match the dimension")

    def V(self, x):
        y = self._pts(x) - self.vcenter
        return self.v0 * self.vprofile(np.sum(y * y, axis=-1))

    def gradV(self, x):
        y = self._pts(x) - self.vcenter
        t = np.sum(y * y, axis=-1)
        return (2.0 * self.v0 * self.vprofile.d1(t))[..., None] * y

    def hessV(self, x):
        y = self._pts(x) - self.vcenter
        t = np.sum(y * y, axis=-1)
        eye = np.eye(self.d)
        return self.v0 * (4.0 * self.vprofile.d2(t)[..., None, None] * y[..., :, None] * y[..., None, :]
                          + 2.0 * self.vprofile.d1(t)[..., None, None] * eye)

    def _a_parts(self, x):
        y = self._pts(x) - self.acenter
        t = np.sum(y * y, axis=-1)
        My = y @ self.matrix.T
        return y, t, My

    def A(self, x):
        y, t, My = self._a_parts(x)
        return self.b0 * self.aprofile(t)[..., None] * My

    def jacA(self, x):
        y, t, My = self._a_parts(x)
        psi = self.aprofile(t)[..., None, None]
        grad_psi = 2.0 * self.aprofile.d1(t)[..., None] * y
        return self.b0 * (My[..., :, None] * grad_psi[..., None, :] + psi * self.matrix)

    def d2A(self, x):
        y, t, My = self._a_parts(x)
        p1 = self.aprofile.d1(t)
        p2 = self.aprofile.d2(t)
        eye = np.eye(self.d)
        grad_psi = 2.0 * p1[..., None] * y
        hess_psi = 4.0 * p2[..., None, None] * y[..., :, None] * y[..., None, :] + 2.0 * p1[..., None, None] * eye
        M = self.matrix
        # d_l d_j A_i = psi_jl (My)_i + psi_j M_il + psi_l M_ij
        out = (My[..., :, None, None] * hess_psi[..., None, :, :]
               + grad_psi[..., None, :, None] * M[:, None, :]
               + grad_psi[..., None, None, :] * M[:, :, None])
        return self.b0 * out

    @property
    def is_zero(self):
        return self.v0 == 0.0 and (self.b0 == 0.0 or not np.any(self.matrix))

    @property
    def effective_radius(self):
        radii = [1.0]
        for amp, prof, cen in ((self.v0, self.vprofile, self.vcenter),
                               (self.b0 if np.any(self.matrix) else 0.0, self.aprofile, self.acenter)):
            if amp == 0.0:
                continue
            if not isinstance(prof, GaussianProfile):
                return None
            radii.append(float(np.linalg.norm(cen)) + 7.0 * prof.w)
        return max(radii)

    def scaled(self, factor):
        """Same shape, amplitudes multiplied by ``factor``; beta scales linearly."""
        out = ProfileField(self.params, self.v0 * factor, self.vprofile, self.vcenter,
                           self.b0 * factor, self.aprofile, self.matrix, self.acenter,
                           name=self.name)
        if self.beta is not None:
            out.beta = tuple(abs(factor) * b for b in self.beta)
        return out


class SumField(FieldModel):
    def __init__(self, parts, beta=None, name=None):
        parts = list(parts)
        if not parts:
            raise ValueError("empty field sum")
        p0 = parts[0].params
        if any(p.params.d != p0.d for p in parts):
            raise ValueError("field dimensions differ")
        alpha = min(p.params.alpha for p in parts)
        super().__init__(replace(p0, alpha=alpha), beta=beta,
                         name=name or "+".join(p.name for p in parts))
        self.parts = parts

    def _sum(self, meth, x):
        return sum(getattr(p, meth)(x) for p in self.parts)

    def V(self, x): return self._sum("V", x)
    def gradV(self, x): return self._sum("gradV", x)
    def hessV(self, x): return self._sum("hessV", x)
    def A(self, x): return self._sum("A", x)
    def jacA(self, x): return self._sum("jacA", x)
    def d2A(self, x): return self._sum("d2A", x)
    def B(self, x): return self._sum("B", x)
    def dB(self, x): return self._sum("dB", x)

    @property
    def is_zero(self):
        return all(p.is_zero for p in self.parts)

    @property
    def effective_radius(self):
        radii = [p.effective_radius for p in self.parts]
        return None if any(r is None for r in radii) else max(radii)


class MagneticOnlyField(FieldModel):
    """Field given directly by B (and optionally dB); V = 0, A via transversal gauge."""

    def __init__(self, params, B, dB=None, beta=None, name="magnetic"):
        super().__init__(params, beta=beta, name=name)
        self._B = B
        self._dB = dB
        self._A = transversal_gauge(B, params.d)

    def B(self, x):
        return self._B(self._pts(x))

    def dB(self, x):
        if self._dB is not None:
            return self._dB(self._pts(x))
        return _fd_jacobian(self._B, self._pts(x), 1e-5)

    def A(self, x):
        return self._A(self._pts(x))

    def jacA(self, x):
        return _fd_jacobian(self._A, self._pts(x), 1e-5)

    def d2A(self, x):
        return _fd_jacobian(self.jacA, self._pts(x), 1e-4)

    @property
    def is_zero(self):
        return False

    @property
    def effective_radius(self):
        return None


# ---------------------------------------------------------------- families

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])

# fixed, generic (neither symmetric nor antisymmetric) coupling for d = 3, 4
DEFAULT_MATRIX = {
    3: np.array([[0.3, -1.0, 0.2], [0.8, 0.1, -0.5], [0.4, 0.6, -0.2]]),
    4: np.array([[0.1, -0.7, 0.3, 0.5],
                 [0.9, 0.0, -0.4, 0.2],
                 [-0.3, 0.6, 0.2, -0.8],
                 [0.4, -0.1, 0.7, 0.0]]),
}


def inverse_power_electric(d=2, v0=1.0, alpha=2.0, center=None, c=1.0):
    """V(x) = v0 (1 + |x - center|^2)^(-alpha/2)."""
    return ProfileField(PhysicsParams(c, d, alpha), v0=v0, vprofile=PowerProfile(alpha / 2.0),
                        vcenter=center, name="inverse_power")


def gaussian_electric(d=2, v0=1.0, w=1.0, center=None, alpha=2.0, c=1.0):
    """V(x) = v0 exp(-|x - center|^2 / w^2); decays faster than any power."""
    return ProfileField(PhysicsParams(c, d, alpha), v0=v0, vprofile=GaussianProfile(w),
                        vcenter=center, name="gaussian")


def radial_magnetic_2d(b0=1.0, sigma=1.5, center=None, c=1.0):
    """A(x) = b0 (-x2 xi(|x|^2), x1 xi(|x|^2)), xi(t) = (1+t)^-sigma.

    Direct differentiation gives B_12 = b0 (2 xi + 2|x|^2 xi'), a function of
    |x|^2 alone. A decays like |x|^(1 - 2 sigma), so alpha = 2 sigma - 1.
    """
    if not sigma > 1:
        raise ValueError("sigma must exceed 1")
    return ProfileField(PhysicsParams(c, 2, 2.0 * sigma - 1.0), b0=b0, aprofile=PowerProfile(sigma),
                        matrix=J2, acenter=center, name="radial_magnetic_2d")


def localized_magnetic(d=3, b0=1.0, w=1.0, center=None, matrix=None, alpha=2.0, c=1.0):
    """A(x) = b0 exp(-|y|^2/w^2) M y, y = x - center (Gaussian-localized B)."""
    M = DEFAULT_MATRIX.get(d) if matrix is None else np.asarray(matrix, float)
    if M is None:
        M = np.eye(d, k=1) - np.eye(d, k=-1) + 0.3 * np.eye(d, k=2)
    return ProfileField(PhysicsParams(c, d, alpha), b0=b0, aprofile=GaussianProfile(w),
                        matrix=M, acenter=center, name="localized_magnetic")


def inverse_power_magnetic(d=3, b0=1.0, p=1.5, center=None, matrix=None, c=1.0):
    """A(x) = b0 (1 + |y|^2)^-p M y; alpha = 2p - 1."""
    M = DEFAULT_MATRIX.get(d) if matrix is None else np.asarray(matrix, float)
    return ProfileField(PhysicsParams(c, d, 2.0 * p - 1.0), b0=b0, aprofile=PowerProfile(p),
                        matrix=M, acenter=center, name="inverse_power_magnetic")


def demo_field_2d(scale=1.0, c=1.0):
    """Off-center Gaussian V plus off-center localized B, used by demos and acceptance."""
    V = gaussian_electric(2, v0=0.04 * scale, w=1.0, center=[0.4, -0.3], c=c)
    B = localized_magnetic(2, b0=0.05 * scale, w=0.9, center=[-0.5, 0.35],
                           matrix=[[0.2, -1.0], [0.7, 0.1]], c=c)
    return SumField([V, B], name="demo2d")


FAMILIES = {
    "zero": lambda d=2, alpha=2.0, c=1.0: zero_field(d, alpha, c),
    "inverse_power": inverse_power_electric,
    "gaussian": gaussian_electric,
    "radial_magnetic_2d": radial_magnetic_2d,
    "localized_magnetic": localized_magnetic,
    "inverse_power_magnetic": inverse_power_magnetic,
    "demo2d": lambda scale=1.0, c=1.0: demo_field_2d(scale, c),
}

_FLOAT_KEYS = {"v0", "alpha", "sigma", "w", "b0", "p", "scale", "c"}


def field_from_config(spec):
    """Build a field from a flat mapping ``{"family": name, "v0": ..., ...}``.

    ``center`` is a comma-separated vector. Several components may be summed by
    giving ``components = a, b`` together with nested ``a.family = ...`` keys.
    """
    spec = dict(spec)
    if "components" in spec:
        names = [s.strip() for s in str(spec.pop("components")).split(",") if s.strip()]
        parts = []
        for n in names:
            sub = {k[len(n) + 1:]: v for k, v in spec.items() if k.startswith(n + ".")}
            if "c" in spec and "c" not in sub:
                sub["c"] = spec["c"]
            parts.append(field_from_config(sub))
        return SumField(parts)
    if "family" not in spec:
        raise KeyError("family")
    name = str(spec.pop("family")).strip()
    if name not in FAMILIES:
        raise ValueError(f"unknown field family {name!r}; known: {sorted(FAMILIES)}")
    kwargs = {}
    for k, v in spec.items():
        if k in _FLOAT_KEYS:
            kwargs[k] = float(v)
        elif k == "d":
            kwargs[k] = int(v)
        elif k in ("center", "matrix"):
            vals = [float(s) for s in str(v).replace(";", ",").split(",") if s.strip()]
            if k == "matrix":
                n = int(round(np.sqrt(len(vals))))
                kwargs[k] = np.array(vals).reshape(n, n)
            else:
                kwargs[k] = np.array(vals)
        else:
            raise ValueError(f"unknown field parameter {k!r} for family {name!r}")
    return FAMILIES[name](**kwargs)


# ---------------------------------------------------------------- operations

def _fd_jacobian(fun, x, rel_step):
    """Central differences; last output axis indexes the coordinate."""
    x = np.asarray(x, float)
    d = x.shape[-1]
    h = rel_step * (1.0 + np.linalg.norm(x, axis=-1))
    cols = []
    for l in range(d):
        e = np.zeros(d)
        e[l] = 1.0
        step = h[..., None] * e
        diff = fun(x + step) - fun(x - step)
        cols.append(diff / (2.0 * h.reshape(h.shape + (1,) * (diff.ndim - h.ndim))))
    return np.stack(cols, axis=-1)


def magnetic_from_potential(A, jacA=None, rel_step=1e-6):
    """Return ``B(x)`` with B_ik = d_i A_k - d_k A_i.

    Uses the analytic Jacobian when given, otherwise central differences.
    """
    if jacA is None:
        def jacA(x):
            return _fd_jacobian(A, x, rel_step)

    def B(x):
        J = jacA(np.asarray(x, float))
        return np.swapaxes(J, -1, -2) - J

    return B


def transversal_gauge(B, d=None, epsabs=1e-10):
    """Vector potential A(x) = -int_0^1 s B(s x) x ds reproducing a closed B."""

    def A(x):
        x = np.asarray(x, float)
        shape = x.shape
        flat = x.reshape(-1, shape[-1])

        def integrand(s):
            return -s * np.einsum("nij,nj->ni", B(s * flat), flat).ravel()

        val, err = quad_vec(integrand, 0.0, 1.0, epsabs=epsabs, epsrel=1e-12)
        if not np.all(np.isfinite(val)) or err > 1e3 * epsabs * max(1, flat.shape[0]):
            raise QuadratureError(f"transversal gauge integral did not converge (err={err:g})")
        return val.reshape(shape)

    return A


@dataclass
class DecayReport:
    beta0: float
    beta1: float
    beta2: float
    worst_points: list = dc_field(default_factory=list)
    passed: bool = True

    @property
    def beta(self):
        return (self.beta0, self.beta1, self.beta2)


def decay_samples(d, rmax=1e3, n_random=2000, n_dirs=16, seed=0):
    """Radial grid along fixed directions plus log-uniform random points."""
    rng = np.random.default_rng(seed)
    radii = np.concatenate([[0.0], np.logspace(-3, np.log10(rmax), 200)])
    dirs = rng.normal(size=(n_dirs, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = np.concatenate([np.eye(d), -np.eye(d), dirs])
    radial = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    u = rng.normal(size=(n_random, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = 10 ** rng.uniform(-3, np.log10(rmax), size=n_random)
    return np.concatenate([radial, u * r[:, None]])


def _decay_ratios(field, x, alpha):
    """Per-point ratios |k-th derivatives| (1 + |x|)^(alpha + k), k = 0, 1, 2."""
    rho = np.linalg.norm(x, axis=-1)
    w = 1.0 + rho
    n = x.shape[0]
    r0 = np.maximum(np.abs(field.V(x)), np.abs(field.A(x)).max(axis=-1)) * w**alpha
    r1 = np.maximum.reduce([np.abs(field.gradV(x)).max(axis=-1),
                            np.abs(field.jacA(x)).reshape(n, -1).max(axis=-1),
                            np.abs(field.B(x)).reshape(n, -1).max(axis=-1)]) * w ** (alpha + 1)
    r2 = np.maximum.reduce([np.abs(field.hessV(x)).reshape(n, -1).max(axis=-1),
                            np.abs(field.d2A(x)).reshape(n, -1).max(axis=-1),
                            np.abs(field.dB(x)).reshape(n, -1).max(axis=-1)]) * w ** (alpha + 2)
    return r0, r1, r2


def _polish_max(fun, starts):
    """Local Nelder-Mead ascent from each start; returns the best value and point."""
    def neg(z):
        with np.errstate(over="ignore", invalid="ignore"):
            v = fun(z)
        return -v if np.isfinite(v) else np.inf

    best_val, best_x = -np.inf, None
    for x0 in starts:
        res = minimize(neg, x0, method="Nelder-Mead",
                       options=dict(xatol=1e-6, fatol=1e-13, maxiter=200 * len(x0)))
        val = -res.fun
        if np.isfinite(val) and val > best_val:
            best_val, best_x = val, res.x
    return best_val, best_x


def verify_decay(field, samples=None, alpha=None, rmax=1e3, seed=0, growth_tol=1.05, n_polish=3):
    """Estimate the smallest beta0..beta2 consistent with the decay condition.

    beta_k is the maximum of |k-th derivatives of V, A| (and, for k >= 1,
    of the (k-1)-th derivatives of B) times (1 + |x|)^(alpha + k), taken over
    the samples and then polished by local ascent from the ``n_polish`` best
    samples. The report fails when a ratio is non-finite or still grows over
    the outermost decade of radii (decay slower than requested).
    """
    alpha = field.alpha if alpha is None else alpha
    x = decay_samples(field.d, rmax=rmax, seed=seed) if samples is None else np.asarray(samples, float)
    rho = np.linalg.norm(x, axis=-1)
    ratios = _decay_ratios(field, x, alpha)
    betas, worst, ok = [], [], True
    outer = rho >= rho.max() / 10.0
    inner = (rho >= rho.max() / 100.0) & ~outer
    for k, ratio in enumerate(ratios):
        if not np.all(np.isfinite(ratio)):
            ok = False
            betas.append(float("inf"))
            worst.append(x[int(np.argmax(~np.isfinite(ratio)))])
            continue
        top = float(ratio.max())
        arg = x[int(np.argmax(ratio))]
        if top > 0 and n_polish:
            starts = x[np.argsort(ratio)[::-1][:n_polish]]
            val, pt = _polish_max(lambda z, k=k: float(_decay_ratios(field, z[None, :], alpha)[k][0]), starts)
            if val > top:
                top, arg = float(val), pt
        betas.append(top)
        worst.append(arg)
        if inner.any() and outer.any():
            top_in = ratio[inner].max()
            top_out = ratio[outer].max()
            if top_out > growth_tol * top_in + 1e-300:
                ok = False
    return DecayReport(betas[0], betas[1], betas[2], worst, ok)


def with_estimated_beta(field, **kw):
    """Attach sampled decay constants to ``field`` (returns a new object)."""
    rep = verify_decay(field, **kw)
    return field.with_beta(rep.beta)
