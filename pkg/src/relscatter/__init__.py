"""Relativistic scattering in static electromagnetic fields at high energies.

Forward simulation of scattering data, the explicit small-angle bounds, the
high-energy functionals and X-ray-transform reconstruction of (V, B).
"""
from .kinematics import PhysicsParams, g, gamma, energy, force
from .fields import FieldModel, field_from_config, verify_decay, with_estimated_beta
from .xray import Ray, Sinogram, GridFunction, project_to_ray, invert_xray_2d
from .dynamics import DeflectionPath, ScatteringDatum, norm_T, scattering_data
from .bounds import BoundParams, ConstantSet

__version__ = "0.1.0"
