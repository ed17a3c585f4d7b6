"""Numerics for a singular cooperative (p,q)-Laplacian system.

Barrier construction, eps-regularized solves with continuation, and
energy-based checks, on P1 finite elements in 1D and 2D.
"""

__version__ = "0.1.0"

from .errors import CertificateError, ConfigError, HypothesisError, MeshError, NonConvergenceError, PlapError
from .mesh import DomainSpec, Mesh, RegionMask, build_mesh, enlarged_mesh
from .problem import Classification, ProblemParams, validate

__all__ = [
    "CertificateError", "ConfigError", "HypothesisError", "MeshError", "NonConvergenceError", "PlapError",
    "DomainSpec", "Mesh", "RegionMask", "build_mesh", "enlarged_mesh",
    "Classification", "ProblemParams", "validate",
]
