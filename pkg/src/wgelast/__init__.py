"""Weak Galerkin finite elements for 2D linear elasticity.

Lowest-order displacement spaces on polygonal meshes, with discrete weak
gradient, divergence and strain operators, a primal solver, an equivalent
mixed (displacement/pressure) solver, error norms and a suite of structural
checks.
"""
from .analysis import (
    ConvergenceReport,
    ErrorTriple,
    convergence_order,
    energy_norm,
    error_vs_exact,
    strain_norm,
)
from .mesh import (
    Mesh,
    MeshError,
    build_mesh,
    dump_mesh,
    generate_uniform_quads,
    generate_uniform_triangles,
    load_mesh,
    validate,
)
from .problems import PROBLEMS, ManufacturedProblem, get_problem
from .system import (
    MaterialParams,
    SolverError,
    assemble_mixed,
    assemble_primal,
    recover_pressure,
    solve,
    solve_mixed,
    solve_primal,
)
from .weakcalc import (
    PressureField,
    Scheme,
    WeakFunction,
    WeakSpace,
    project_Qh,
    weak_divergence,
    weak_gradient,
    weak_strain,
    weak_stress,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport", "ErrorTriple", "convergence_order", "energy_norm", "error_vs_exact",
    "strain_norm", "Mesh", "MeshError", "build_mesh", "dump_mesh", "generate_uniform_quads",
    "generate_uniform_triangles", "load_mesh", "validate", "PROBLEMS", "ManufacturedProblem",
    "get_problem", "MaterialParams", "SolverError", "assemble_mixed", "assemble_primal",
    "recover_pressure", "solve", "solve_mixed", "solve_primal", "PressureField", "Scheme",
    "WeakFunction", "WeakSpace", "project_Qh", "weak_divergence", "weak_gradient",
    "weak_strain", "weak_stress",
]
