"""Fields the double-integral functionals cannot see, and the 3-D Fourier route around it.

Run with ``python3 demos/invisible_fields.py``. Takes about half a minute.
"""
import numpy as np

from relscatter import fields, reconstruct

# A radial magnetic field in the plane: w4 vanishes on every line, w3 does not.
m = reconstruct.nonuniqueness_demo("magnetic2d", 500)
print(f"radial B:  max|w4| = {m['max_w4']:.1e}   max|w3| = {m['max_w3']:.3f}")

# A radial potential: w2 vanishes even though w1 carries the potential.
e = reconstruct.nonuniqueness_demo("electric", 500)
print(f"radial V:  max|w2| = {e['max_w2']:.1e}   max|w1| = {e['max_w1']:.3f}")

# In three dimensions w4 on planes determines the Fourier transform of grad B.
field = fields.localized_magnetic(3, b0=0.5, w=0.8, center=[-0.2, 0.4, 0.1])
cache = reconstruct.W4PlaneCache(field, n=48)
p = np.array([0.4, -0.3, 0.5])
got = reconstruct.fourier_B_derivs_from_w4(cache, p, 2)
ref = reconstruct.fourier_B_derivs_direct(field, p, 2, n=64)
print("\nFourier transform of the curl vector derivative at p =", p)
print("from w4 on planes:", np.round(got, 8))
print("direct transform: ", np.round(ref, 8))
print(f"relative difference {np.linalg.norm(got - ref) / np.linalg.norm(ref):.1e}, "
      f"|result . p| = {abs(got @ p):.1e}")
