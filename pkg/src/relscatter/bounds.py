"""Explicit constants, envelopes and threshold speeds of the small-angle estimates.

Every formula is evaluated literally, however loose. Notation inside the
functions: ``K = 1/sqrt(1 + v^2/(4(c^2 - v^2)))``, ``a = v/sqrt2 - r``,
``w = v/sqrt2 + 1 - r`` and ``X = 1 + |x|/sqrt2``.
"""
from dataclasses import dataclass, replace, asdict

import numpy as np
from scipy.optimize import brentq, minimize_scalar

SQ2 = np.sqrt(2.0)


class NoRootError(ValueError):
    pass


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    c: float = 1.0
    d: int = 2
    alpha: float = 2.0
    beta0: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    r: float = 0.5
    x_norm: float = 0.0
    v_norm: float = 0.9
    T: float = np.inf

    @property
    def beta_tilde(self):
        return max(self.beta1, self.beta2)

    def at(self, **kw):
        return replace(self, **kw)

    def check_r(self):
        if not (0 < self.r <= 1 and self.r < self.c / SQ2):
            raise RangeError(f"need 0 < r <= 1 and r < c/sqrt2, got r = {self.r}")

    def check(self):
        self.check_r()
        if not (SQ2 * self.r < self.v_norm < self.c):
            raise RangeError(f"need sqrt2 r < |v| < c, got |v| = {self.v_norm}")
        if not self.alpha > 1 or self.x_norm < 0:
            raise RangeError("need alpha > 1 and |x| >= 0")


def _K(v, c):
    return 1.0 / np.sqrt(1.0 + v**2 / (4.0 * (c**2 - v**2)))


def _parts(bp):
    bp.check()
    v, r = bp.v_norm, bp.r
    return _K(v, bp.c), v / SQ2 - r, v / SQ2 + 1.0 - r, 1.0 + bp.x_norm / SQ2


def _lorentz(z, c):
    return z / np.sqrt(1.0 - z**2 / c**2)


def _root(fun, lo, hi, what):
    flo, fhi = fun(lo), fun(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise NoRootError(f"no sign change for {what} on [{lo:.6g}, {hi:.6g}]")
    if flo == 0:
        return lo
    return brentq(fun, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def z1_residual(bp, z):
    c, d, al, r = bp.c, bp.d, bp.alpha, bp.r
    return _lorentz(z, c) - 2 ** (al + 5) * bp.beta1 * d * (2 + r / c) / (
        al * (z / SQ2 - r) * (bp.x_norm / SQ2 + 1) ** al)


def threshold_z1(bp):
    """Root of z/sqrt(1 - z^2/c^2) = 2^(a+5) beta1 d (2 + r/c) / (a (z/sqrt2 - r)(|x|/sqrt2 + 1)^a)."""
    bp.check_r()
    return _root(lambda z: z1_residual(bp, z), SQ2 * bp.r + 1e-9, bp.c - 1e-9, "z1")


def threshold_z(bp):
    """Speed where the contraction majorant mu equals 1 (mu < 1 beyond it)."""
    bp.check_r()
    f = lambda z: mu_of(bp.at(v_norm=z)) - 1.0
    return _root(f, SQ2 * bp.r + 1e-9, bp.c - 1e-9, "z")


def z2_residual(bp, z):
    c, d, al = bp.c, bp.d, bp.alpha
    return _lorentz(z, c) - 32.0 * bp.beta1 * d / (al * (z / SQ2) * (1 + bp.x_norm / SQ2) ** al)


def threshold_z2(bp):
    return _root(lambda z: z2_residual(bp, z), 1e-9, bp.c - 1e-9, "z2")


def mu_of(bp):
    return operator_bounds(bp)["mu"]


def operator_bounds(bp):
    """rho_T, rho, lambda_T, lambda, mu_T, mu (the T-versions only for T <= 0)."""
    K, a, w, X = _parts(bp)
    c, d, al, r = bp.c, bp.d, bp.alpha, bp.r
    b1, bt = bp.beta1, bp.beta_tilde
    rho = K * 2 ** (al + 3) * d * np.sqrt(d) * b1 * (2 + r / c) * w / ((al - 1) * a**2 * X ** (al - 1))
    lam = K * 2 ** (2 * al + 9) * 3 * d**3 * bt * (1 + bt) * (1 + 1 / c) ** 3 * w**3 / (
        (al - 1) * a**4 * X ** (al - 1))
    out = dict(rho=rho, lambda_=lam, mu=lam / r)
    if bp.T <= 0:
        XT = X - a * bp.T
        rho_T = K * 2 ** (al + 2) * d * np.sqrt(d) * b1 * (2 + r / c) * w / ((al - 1) * a**2 * XT ** (al - 1))
        lam_T = K * 2 ** (al + 4) * d**2 * bt * (1 + 1 / c) * w**2 / ((al - 1) * a**3 * XT ** (al - 1))
        out.update(rho_T=rho_T, lambda_T=lam_T, mu_T=lam_T / r)
    else:
        out.update(rho_T=np.nan, lambda_T=np.nan, mu_T=np.nan)
    return out


def _envelope_pref(bp):
    K, a, w, X = _parts(bp)
    pref = K * bp.d * np.sqrt(bp.d) * bp.beta1 * 2 ** (bp.alpha + 2) * (2 + bp.r / bp.c)
    return pref, a, X


def zeta_minus(bp, t):
    if np.any(np.asarray(t) > 0):
        raise ValueError("zeta_minus is defined for t <= 0")
    pref, a, X = _envelope_pref(bp)
    return pref / (bp.alpha * a * (X - a * np.asarray(t, float)) ** bp.alpha)


def xi_minus(bp, t):
    if np.any(np.asarray(t) > 0):
        raise ValueError("xi_minus is defined for t <= 0")
    pref, a, X = _envelope_pref(bp)
    al = bp.alpha
    return pref / (al * (al - 1) * a**2 * (X - a * np.asarray(t, float)) ** (al - 1))


def zeta_plus(bp, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("zeta_plus is defined for t >= 0")
    pref, a, X = _envelope_pref(bp)
    return pref / (bp.alpha * a * (X + a * np.asarray(t, float)) ** bp.alpha)


def xi_plus(bp, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("xi_plus is defined for t >= 0")
    pref, a, X = _envelope_pref(bp)
    al = bp.alpha
    return pref / (al * (al - 1) * a**2 * (X + a * np.asarray(t, float)) ** (al - 1))


def envelopes(bp, t):
    """The applicable envelope pair(s) at scalar t."""
    out = {}
    if t <= 0:
        out.update(zeta_minus=float(zeta_minus(bp, t)), xi_minus=float(xi_minus(bp, t)))
    if t >= 0:
        out.update(zeta_plus=float(zeta_plus(bp, t)), xi_plus=float(xi_plus(bp, t)))
    return out


def proximity_constants(bp):
    """eps_a', eps_a, eps_b bounding the distance of the data from first order."""
    K, a, w, X = _parts(bp)
    c, d, al, bt = bp.c, bp.d, bp.alpha, bp.beta_tilde
    rho = operator_bounds(bp)["rho"]
    eps_ap = d**2 * bt * (1 + 1 / c) * 2 ** (al + 5) * w / (al * a**2 * X**al) * rho * K
    eps_a = 2 ** (al + 5) * d * np.sqrt(d) * bt * (1 + 1 / c) * w / (al * a**2 * X**al) * rho
    eps_b = (2 ** (2 * al + 9) * d**3 * bt * (1 + bt) * 3 * (1 + 1 / c) ** 3 * w**2
             / ((al - 1) * a**4 * X ** (al - 1)) * rho * K)
    return dict(eps_a_prime=eps_ap, eps_a=eps_a, eps_b=eps_b)


def finite_speed_constants(bp, c_fit=0.0):
    """s1, s2, C1, C2; ``c_fit`` is the fitted constant of the b_sc first-order estimate."""
    bp.check_r()
    z = threshold_z(bp)
    z1 = threshold_z1(bp)
    z2 = threshold_z2(bp)
    s1 = max(z, z1)
    s2 = max(z, z1, z2)
    c, d, al, r, bt = bp.c, bp.d, bp.alpha, bp.r, bp.beta_tilde
    X = 1 + bp.x_norm / SQ2
    C1 = (d**3 * bt**2 * 2 ** (2 * al + 9) * (1 + 1 / c) ** 2 * c * (c / SQ2 + 1 - r) ** 2
          / (al * (al - 1) * (s1 / SQ2 - r) ** 4 * X ** (2 * al - 1)))
    C2 = c_fit + (4 * d**4 * np.sqrt(d) * bt**2 * (1 + bt) * 2 ** (3 * al + 15) * (1 + 1 / c) ** 4
                  * (c / SQ2 + 1 - r) ** 3 / ((al - 1) ** 2 * (s2 / SQ2 - r) ** 6 * X ** (2 * al - 2)))
    return dict(z=z, z1=z1, z2=z2, s1=s1, s2=s2, C1=C1, C2=C2)


def best_r(bp, v_norm=None):
    """r in (0, min(1, c/sqrt2)) with sqrt2 r < |v| minimizing mu at |v|."""
    v = bp.v_norm if v_norm is None else v_norm
    hi = min(1.0, bp.c / SQ2 * (1 - 1e-9), v / SQ2 * (1 - 1e-9))
    if bp.beta_tilde == 0:
        return bp.at(r=hi / 2)
    f = lambda r: np.log(mu_of(bp.at(r=r, v_norm=v)))
    res = minimize_scalar(f, bounds=(hi * 1e-6, hi), method="bounded", options={"xatol": 1e-10})
    return bp.at(r=float(res.x))


@dataclass
class ConstantSet:
    z1: float
    z: float
    z2: float
    rho_T: float
    rho: float
    lambda_T: float
    lambda_: float
    mu_T: float
    mu: float
    zeta_minus0: float
    xi_minus0: float
    zeta_plus0: float
    xi_plus0: float
    eps_a_prime: float
    eps_a: float
    eps_b: float
    C1: float
    C2: float
    s1: float
    s2: float

    def as_dict(self):
        return asdict(self)


def constant_set(bp, c_fit=0.0):
    """All constants at one parameter point; envelope functions reported at t = 0."""
    ob = operator_bounds(bp.at(T=min(bp.T, 0.0)))
    ob_inf = operator_bounds(bp.at(T=np.inf))
    th = finite_speed_constants(bp, c_fit)
    pc = proximity_constants(bp)
    return ConstantSet(z1=th["z1"], z=th["z"], z2=th["z2"], rho_T=ob["rho_T"], rho=ob_inf["rho"],
                       lambda_T=ob["lambda_T"], lambda_=ob_inf["lambda_"], mu_T=ob["mu_T"],
                       mu=ob_inf["mu"], zeta_minus0=float(zeta_minus(bp, 0.0)),
                       xi_minus0=float(xi_minus(bp, 0.0)), zeta_plus0=float(zeta_plus(bp, 0.0)),
                       xi_plus0=float(xi_plus(bp, 0.0)), **pc, C1=th["C1"], C2=th["C2"],
                       s1=th["s1"], s2=th["s2"])


# ------------------------------------------------------------ auxiliary estimates

def force_bound(x, y, beta1, d, alpha, c=1.0):
    """2 d beta1 (1 + |x|)^-(alpha+1) (1 + |y|/c)."""
    return (2 * d * beta1 * (1 + np.linalg.norm(x, axis=-1)) ** (-(alpha + 1))
            * (1 + np.linalg.norm(y, axis=-1) / c))


def force_lipschitz_bound(x, y, x2, y2, beta1, beta2, d, alpha, c=1.0, n_eps=1001):
    """Right-hand side of the Lipschitz estimate for F; sup over segments by dense sampling."""
    eps = np.linspace(0.0, 1.0, n_eps)[:, None]
    zx = np.linalg.norm(eps * x + (1 - eps) * x2, axis=-1)
    zy = np.linalg.norm(eps * y + (1 - eps) * y2, axis=-1)
    t1 = 2 * d * beta1 / c * np.max((1 + zx) ** (-(alpha + 1))) * np.linalg.norm(y - y2)
    t2 = 2 * d * np.sqrt(d) * beta2 * np.max((1 + zy / c) * (1 + zx) ** (-(alpha + 2))) * np.linalg.norm(x - x2)
    return t1 + t2


def integral_force_bound(bp):
    """Bound on |int_{-inf}^t F(v s + x + f(s), v + h(s)) ds| over M_{T,r}."""
    K, a, w, X = _parts(bp)
    return (bp.beta1 * bp.d * 2 ** (bp.alpha + 3) * (2 + bp.r / bp.c)
            / (bp.alpha * a * (bp.x_norm / SQ2 + 1) ** bp.alpha))


def impulse_floor(bp):
    """(1 + v^2/(4(c^2 - v^2))), the lower bound on 1 + |gamma(v) + ...|^2/c^2."""
    bp.check()
    v, c = bp.v_norm, bp.c
    return 1.0 + v**2 / (4 * (c**2 - v**2))


def write_constants_csv(path_or_fh, rows):
    """rows: list of (BoundParams, ConstantSet). Aligned, 17 significant digits."""
    keys = ["v_norm", "x_norm", "r", "c", "d", "alpha", "beta1", "beta2"]
    cnames = list(ConstantSet.__dataclass_fields__)
    header = keys + cnames
    lines = [header]
    for bp, cs in rows:
        vals = [getattr(bp, k) for k in keys] + [getattr(cs, k) for k in cnames]
        lines.append([format(float(v), ".17g") for v in vals])
    widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
    text = "\n".join(",".join(s.rjust(wd) for s, wd in zip(r, widths)) for r in lines) + "\n"
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(text)
    else:
        with open(path_or_fh, "w", newline="\n") as fh:
            fh.write(text)
    return text


# alternative names kept for existing callers
theorem1_constants = finite_speed_constants
