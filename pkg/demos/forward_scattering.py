"""Forward problem: scattering data of a fast particle in a mixed field.

Run with ``python3 demos/forward_scattering.py``. Takes a few seconds.
"""
import numpy as np

from relscatter import dynamics, fields

# A 2-D field with both an electric bump and a localized magnetic part.
field = fields.with_estimated_beta(fields.demo_field_2d(1.0))
print(field, "decay constants beta0, beta1, beta2 =", field.beta)

theta = np.array([1.0, 0.0])
x = np.array([0.0, 0.4])

# The deflection shrinks as the speed approaches c.
print("\n   s/c        |a_sc|        |b_sc|     energy drift")
for s in (0.5, 0.9, 0.99, 0.999):
    dat = dynamics.scattering_data(s * theta, x, field)
    print(f"{s:6.3f}  {np.linalg.norm(dat.a_sc):12.4e}  {np.linalg.norm(dat.b_sc):12.4e}  {dat.energy_drift:10.2e}")

# Outgoing speed equals incoming speed: |v + a_sc| = |v|.
v = 0.9 * theta
dat = dynamics.scattering_data(v, x, field)
print("\n|v + a_sc| - |v| =", np.linalg.norm(v + dat.a_sc) - np.linalg.norm(v))

# An offset with a component along v is handled by shifting time;
# a_sc is unchanged and b_sc picks up t0 * a_sc.
x_tilted = x + 3.0 * v
tilted = dynamics.scattering_data(v, x_tilted, field)
print("a_sc unchanged under a time shift:", np.allclose(tilted.a_sc, dat.a_sc, atol=1e-12))

# In a weak field the contraction argument applies, and the fixed-point
# iteration gives the same answer as the integrator.
weak = fields.with_estimated_beta(fields.demo_field_2d(1e-10))
p = dynamics.scattering_data(v, x, weak, method="picard")
o = dynamics.scattering_data(v, x, weak, method="ode")
print(f"\nweak field: mu = {p.mu:.3f} after {p.iterations} iterations")
print("relative difference of a_sc between routes:",
      np.linalg.norm(p.a_sc - o.a_sc) / np.linalg.norm(o.a_sc))
