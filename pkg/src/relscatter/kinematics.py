"""Relativistic velocity/impulse maps, energy and the Lorentz force.

All functions broadcast over leading axes: vectors have shape ``(..., d)``.
Units are natural (mass = charge = 1) with a configurable speed of light.
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysicsParams:
    c: float = 1.0
    d: int = 2
    alpha: float = 2.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"speed of light must be positive, got {self.c}")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.d}")
        if not self.alpha > 1:
            raise ValueError(f"decay exponent must exceed 1, got {self.alpha}")


def _sq(v):
    v = np.asarray(v, dtype=float)
    return np.einsum("...i,...i->...", v, v)


def g(p, c=1.0):
    """Impulse to velocity: p / sqrt(1 + |p|^2/c^2). Maps R^d onto the ball B_c."""
    p = np.asarray(p, dtype=float)
    return p / np.sqrt(1.0 + _sq(p) / c**2)[..., None]


def gamma(v, c=1.0):
    """Velocity to impulse, the inverse of :func:`g`. Requires |v| < c."""
    v = np.asarray(v, dtype=float)
    s = 1.0 - _sq(v) / c**2
    if np.any(s <= 0):
        raise ValueError("velocity outside the open ball |v| < c")
    return v / np.sqrt(s)[..., None]


def lorentz_factor(speed, c=1.0):
    """Scalar s / sqrt(1 - s^2/c^2), i.e. |gamma(v)| for |v| = s."""
    speed = np.asarray(speed, dtype=float)
    if np.any(speed >= c):
        raise ValueError("speed must be below c")
    return speed / np.sqrt(1.0 - speed**2 / c**2)


def g_increment(p, dp, c=1.0):
    """g(p + dp) - g(p) without the cancellation of the naive difference.

    Scattering deflections are often many orders of magnitude smaller than
    |p|, so the difference is rewritten algebraically.
    """
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)
    q = p + dp
    n_p = np.sqrt(1.0 + _sq(p) / c**2)
    n_q = np.sqrt(1.0 + _sq(q) / c**2)
    # n_p - n_q = (|p|^2 - |q|^2) / c^2 / (n_p + n_q)
    dn = -(2.0 * _sq_dot(p, dp) + _sq(dp)) / c**2 / (n_p + n_q)
    return dp / n_q[..., None] + p * (dn / (n_p * n_q))[..., None]


def _sq_dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def energy(x, v, field, c=1.0):
    """Conserved energy c^2 sqrt(1 + |p|^2/c^2) + V(x) with p = gamma(v)."""
    p = gamma(v, c)
    return c**2 * np.sqrt(1.0 + _sq(p) / c**2) + field.V(x)


def energy_from_impulse(x, p, field, c=1.0):
    return c**2 * np.sqrt(1.0 + _sq(p) / c**2) + field.V(x)


def force(x, v, field, c=1.0):
    """Lorentz force -grad V(x) + (1/c) B(x) v."""
    v = np.asarray(v, dtype=float)
    return -field.gradV(x) + np.einsum("...ij,...j->...i", field.B(x), v) / c
