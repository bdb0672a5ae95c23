"""Independent oracles for the frozen values in tests/frozen.py.

Run once: ``python tests/oracles/derive.py > tests/frozen.py``. Nothing here
imports the package's numerical code; formulas are re-typed in mpmath and
trajectories are integrated with scipy's DOP853 in plain time.
"""
import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

mp.mp.dps = 40
SQ2 = mp.sqrt(2)

# ---------------------------------------------------------------- constants
P0 = dict(c=1, d=2, alpha=2, beta1=mp.mpf("2e-8"), beta2=mp.mpf("5e-8"), r=mp.mpf("0.1"),
          x_norm=mp.mpf("0.5"), v_norm=mp.mpf("0.95"), T=mp.mpf(-1))


def consts(p):
    c, d, al, b1, b2, r, x, v, T = (mp.mpf(p[k]) for k in ("c", "d", "alpha", "beta1", "beta2", "r", "x_norm", "v_norm", "T"))
    bt = max(b1, b2)
    K = 1 / mp.sqrt(1 + v**2 / (4 * (c**2 - v**2)))
    a = v / SQ2 - r
    w = v / SQ2 + 1 - r
    X = 1 + x / SQ2
    XT = X - a * T
    rho_T = K * 2**(al + 2) * d * mp.sqrt(d) * b1 * (2 + r / c) * w / ((al - 1) * a**2 * XT**(al - 1))
    rho = K * 2**(al + 3) * d * mp.sqrt(d) * b1 * (2 + r / c) * w / ((al - 1) * a**2 * X**(al - 1))
    lam_T = K * 2**(al + 4) * d**2 * bt * (1 + 1 / c) * w**2 / ((al - 1) * a**3 * XT**(al - 1))
    lam = K * 2**(2 * al + 9) * 3 * d**3 * bt * (1 + bt) * (1 + 1 / c)**3 * w**3 / ((al - 1) * a**4 * X**(al - 1))
    pref = K * d * mp.sqrt(d) * b1 * 2**(al + 2) * (2 + r / c)
    zm = lambda t: pref / (al * a * (X - a * t)**al)
    xm = lambda t: pref / (al * (al - 1) * a**2 * (X - a * t)**(al - 1))
    zp = lambda t: pref / (al * a * (X + a * t)**al)
    xp = lambda t: pref / (al * (al - 1) * a**2 * (X + a * t)**(al - 1))
    eps_ap = d**2 * bt * (1 + 1 / c) * 2**(al + 5) * w / (al * a**2 * X**al) * rho * K
    eps_a = 2**(al + 5) * d * mp.sqrt(d) * bt * (1 + 1 / c) * w / (al * a**2 * X**al) * rho
    eps_b = 2**(2 * al + 9) * d**3 * bt * (1 + bt) * 3 * (1 + 1 / c)**3 * w**2 / ((al - 1) * a**4 * X**(al - 1)) * rho * K
    return dict(rho_T=rho_T, rho=rho, lambda_T=lam_T, lambda_=lam, mu_T=lam_T / r, mu=lam / r,
                zeta_minus_m2=zm(-2), xi_minus_m2=xm(-2), zeta_plus_3=zp(3), xi_plus_3=xp(3),
                eps_a_prime=eps_ap, eps_a=eps_a, eps_b=eps_b)


def bisect(f, lo, hi, n=200):
    flo = f(lo)
    assert flo * f(hi) < 0
    for _ in range(n):
        mid = (lo + hi) / 2
        fm = f(mid)
        if fm * flo > 0:
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def roots(p):
    c, d, al, b1, b2, r, x = (mp.mpf(p[k]) for k in ("c", "d", "alpha", "beta1", "beta2", "r", "x_norm"))
    lor = lambda z: z / mp.sqrt(1 - z**2 / c**2)
    f1 = lambda z: lor(z) - 2**(al + 5) * b1 * d * (2 + r / c) / (al * (z / SQ2 - r) * (x / SQ2 + 1)**al)
    f2 = lambda z: lor(z) - 32 * b1 * d / (al * (z / SQ2) * (1 + x / SQ2)**al)
    fmu = lambda z: consts(dict(p, v_norm=z, T=-1))["mu"] - 1
    lo, hi = SQ2 * r + mp.mpf("1e-9"), c - mp.mpf("1e-9")
    z1 = bisect(f1, lo, hi)
    z2 = bisect(f2, mp.mpf("1e-9"), hi)
    z = bisect(fmu, lo, hi)
    s1, s2 = max(z, z1), max(z, z1, z2)
    bt = max(b1, b2)
    X = 1 + x / SQ2
    C1 = d**3 * bt**2 * 2**(2 * al + 9) * (1 + 1 / c)**2 * c * (c / SQ2 + 1 - r)**2 / (al * (al - 1) * (s1 / SQ2 - r)**4 * X**(2 * al - 1))
    C2 = 4 * d**4 * mp.sqrt(d) * bt**2 * (1 + bt) * 2**(3 * al + 15) * (1 + 1 / c)**4 * (c / SQ2 + 1 - r)**3 / ((al - 1)**2 * (s2 / SQ2 - r)**6 * X**(2 * al - 2))
    return dict(z1=z1, z=z, z2=z2, s1=s1, s2=s2, C1=C1, C2=C2)


# ---------------------------------------------------------------- trajectories
def demo_force(x, v):
    """Demo field at scale 1 written out by hand (Gaussian V plus Gaussian-localized A = phi M y)."""
    c1 = np.array([0.4, -0.3])
    y = x - c1
    gradV = 0.04 * np.exp(-(y @ y)) * (-2 * y)
    M = np.array([[0.2, -1.0], [0.7, 0.1]])
    c2 = np.array([-0.5, 0.35])
    z = x - c2
    phi = 0.05 * np.exp(-(z @ z) / 0.81)
    dphi = phi * (-2 * z / 0.81)
    # A_i = phi (M z)_i ; J[i, j] = d_j A_i
    J = np.outer(M @ z, dphi) + phi * M
    B = J.T - J   # B_ik = d_i A_k - d_k A_i
    return -gradV + B @ v


def scatter(v, x, T=60.0):
    """(a_sc, b_sc) by DOP853 on p' = F(x, g(p)), x' = g(p) from t = -T (free motion before)."""
    v = np.asarray(v, float)
    x = np.asarray(x, float)
    g = lambda p: p / np.sqrt(1 + p @ p)
    p0 = v / np.sqrt(1 - v @ v)

    def rhs(t, s):
        X, P = s[:2], s[2:]
        return np.concatenate([g(P), demo_force(X, g(P))])

    s0 = np.concatenate([x - T * v, p0])
    sol = solve_ivp(rhs, (-T, T), s0, method="DOP853", rtol=1e-13, atol=1e-15)
    X, P = sol.y[:2, -1], sol.y[2:, -1]
    vp = g(P)
    a = vp - v
    # outgoing line x_+ + v_+ t; b = x_+ - x_-, with y = x(t) - v t - x
    b = X - vp * T - x
    return a, b


if __name__ == "__main__":
    c = consts(P0)
    rt = roots(P0)
    print('"""Frozen oracle values; regenerate with tests/oracles/derive.py."""')
    print("P0 = dict(c=1.0, d=2, alpha=2.0, beta1=2e-8, beta2=5e-8, r=0.1, x_norm=0.5, v_norm=0.95, T=-1.0)")
    print("CONSTANTS_P0 = {")
    for k, v in {**c, **rt}.items():
        print(f"    {k!r}: {mp.nstr(v, 17)},")
    print("}")
    cases = [((0.9, 0.0), (0.0, 0.5)), ((0.0, -0.99), (0.3, 0.0)), ((0.6, 0.6), (-0.4, 0.4))]
    print("DEMO_SCATTERING = [")
    for v, x in cases:
        a, b = scatter(v, x)
        print(f"    ({v}, {x}, ({float(a[0])!r}, {float(a[1])!r}), ({float(b[0])!r}, {float(b[1])!r})),")
    print("]")
