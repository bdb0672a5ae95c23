"""Inverse problem: recover V and B from simulated high-energy scattering data.

The leading asymptotics of the velocity deflection give X-ray transforms of
grad V and of B. Filtered back-projection then recovers both fields, and the
error shrinks as the probe speed approaches c.

Run with ``python3 demos/high_energy_inversion.py``. Takes about a minute.
"""
from relscatter import fields, reconstruct

field = fields.demo_field_2d(1.0)
print("   s/c     B_12 error   V error")
for s in (0.9, 0.99, 0.999):
    data = reconstruct.simulate_plane(field, s, n_angles=120, n_offsets=129)
    rb = reconstruct.reconstruct_B(data, field, n=129)
    rv = reconstruct.reconstruct_V(data, field, n=129)
    print(f"{s:6.3f}   {rb.error:10.4f}   {rv.error:8.4f}")

