"""Uniform semiclassical expansions through transition points.

Construction, evaluation, and validation of uniform asymptotic solutions of

    (-h^2 d^2/dz^2 + sigma z^kappa W(z) + h^2 psi) u = 0

near a transition point of integer order kappa >= -1 at z = 0, in terms of
model-equation quasimodes composed with a Langer change of variables.
"""
from .geometry import ProblemSpec, bdf_coords, corner_chart, sample_curve

__all__ = ["ProblemSpec", "bdf_coords", "corner_chart", "sample_curve"]
__version__ = "0.1.0"
