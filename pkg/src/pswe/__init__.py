"""Porosity-aware shallow water flow on polygonal meshes."""

from .mesh import Mesh, attach_ghosts, build_structured_mesh, min_area_to_perimeter
from .physics import FrictionParams, SourceModel, friction_K, mass_source
from .state import G, FieldState, Terrain, free_surface, make_lake_state, make_uniform_flow_state
from .scheme import assemble_rhs, interface_values, viscosity_coefficients
from .timestep import Model, StepPolicy, SolverError, advance, run
from .riemann import DamBreak, RiemannIC, exact_dambreak, run_riemann_1d
from .io import Raster, RunConfig, load_config, read_esri_ascii, write_esri_ascii, write_snapshot

__version__ = "0.1.0"
