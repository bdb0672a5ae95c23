"""Explicit constants: when is the fixed-point map a contraction, and how loose are the envelopes?

Run with ``python3 demos/explicit_bounds.py``.
"""
import numpy as np

from relscatter import bounds, dynamics, fields

weak = fields.with_estimated_beta(fields.demo_field_2d(1e-10))
b0, b1, b2 = weak.beta
bp = bounds.BoundParams(c=1.0, d=2, alpha=weak.alpha, beta0=b0, beta1=b1, beta2=b2,
                        x_norm=0.5, v_norm=0.99)
bp = bounds.best_r(bp)
print(f"radius r minimizing the contraction constant at |v| = 0.99: {bp.r:.4g}")
print(f"speed thresholds z1 = {bounds.threshold_z1(bp):.6f}, z = {bounds.threshold_z(bp):.6f}")

# C1 and C2 depend on r and the field only, so they stay fixed along the sweep.
print("\n  |v|        mu        C1           C2")
for v in (0.6, 0.9, 0.99, 0.999):
    cs = bounds.constant_set(bp.at(v_norm=v))
    print(f"{v:6.3f}  {cs.mu:9.3e}  {cs.C1:11.4e}  {cs.C2:11.4e}")

# Compare the a priori velocity bound with an actual trajectory.
v = np.array([0.99, 0.0])
x = np.array([0.0, 0.5])
dat = dynamics.scattering_data(v, x, weak)
bound = 2 * bounds.zeta_minus(bp, 0.0)
print(f"\n|a_sc| = {np.linalg.norm(dat.a_sc):.3e}, bound = {bound:.3e}, "
      f"ratio = {np.linalg.norm(dat.a_sc) / bound:.1e}")
