"""Volume-preserving mean-curvature-type flow of star-shaped radial graphs
in the three space forms, with a runtime audit of the flow's conservation
laws, monotonicity formulas and integral identities."""

from .spaceform import SpaceForm, space_form
from .sphere_grid import SphereGrid
from .geometry import SurfaceGeometry, compute_geometry
from .flow import FlowConfig, FlowState, run
from .diagnostics import Verdict, DiagnosticsRecord

__version__ = "0.1.0"

__all__ = [
    "SpaceForm",
    "space_form",
    "SphereGrid",
    "SurfaceGeometry",
    "compute_geometry",
    "FlowConfig",
    "FlowState",
    "run",
    "Verdict",
    "DiagnosticsRecord",
]
