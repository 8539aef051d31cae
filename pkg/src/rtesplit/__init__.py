"""Operator-splitting finite element solver for the time-dependent radiative transfer equation."""

from .angular_mesh import AngularMesh, build_angular_mesh
from .errors import ConfigurationError, NumericalError, ResourceLimitError
from .scattering import CrossSections, PhaseFunction
from .solver import ModelProblem, RunResult, SplittingSolver, monolithic_reference_solve, run
from .spatial_mesh import SpatialMesh, build_spatial_mesh
from .transport_assembly import StabilizationPolicy
from .verification import convergence_study, example1, example2, problem_for

__version__ = "0.1.0"

__all__ = [
    "AngularMesh", "build_angular_mesh", "ConfigurationError", "NumericalError",
    "ResourceLimitError", "CrossSections", "PhaseFunction", "ModelProblem", "RunResult",
    "SplittingSolver", "monolithic_reference_solve", "run", "SpatialMesh",
    "build_spatial_mesh", "StabilizationPolicy", "convergence_study", "example1",
    "example2", "problem_for",
]
