"""Curved-mesh Lagrange finite elements for the Ventcel problem.

Solves a diffusion equation with a second-order (Laplace-Beltrami)
boundary condition on smooth 2D domains, on triangular meshes of
geometric order 1..3, and measures lifted errors against manufactured
solutions to reproduce a priori convergence orders as a function of the
mesh order and the finite element degree.
"""

from .analysis import (
    ConvergenceTable,
    ErrorReport,
    RunResult,
    eoc_fit,
    eoc_last,
    eoc_tail,
    interpolate,
    lifted_errors,
)
from .geometry import GeometryError, SmoothBoundary, unit_disk
from .lift import (
    EdgeLift,
    LiftConfig,
    LiftMap,
    LiftSlopeReport,
    boundary_jacobian,
    certify_lift,
    edge_lift,
)
from .mesh import (
    AffineMesh,
    CurvedMesh,
    ElementGeometry,
    ElementMap,
    MapInversionError,
    MeshError,
    boundary_anchor,
    boundary_weight,
    build_curved_mesh,
    dump_mesh,
    exact_map,
    generate_disk_mesh,
    load_mesh,
    uniform_refine,
)
from .reference import (
    LagrangeBasis,
    QuadratureRule,
    UnsupportedDegreeError,
    lagrange_basis,
    lagrange_nodes,
    quadrature,
    segment_rule,
    triangle_rule,
)
from .ventcel import (
    DiscreteSystem,
    DofMap,
    ManufacturedSolution,
    ProblemSpec,
    SolverError,
    assemble,
    assemble_matrix,
    assemble_rhs,
    build_dofmap,
    derive_manufactured,
    dump_matrix,
    geometric_defect,
    manufactured_case,
    manufactured_from_expression,
    solve,
)

__version__ = "0.1.0"
