"""P1 finite elements for the Poisson problem with rough Dirichlet data on
polygonal corner domains."""
from .boundary import (BoundaryField, BoundaryFunction, boundary_l2_error,
                       carstensen_interpolate, l2_project_boundary)
from .domain_error import ConvergenceRecord, ExactSolution, compute_eoc, eval_exact, l2_domain_error
from .fem import (NodalField, assemble_boundary_mass_and_domain_mass, assemble_stiffness,
                  export_vtk, solve_berggren, solve_regularized)
from .linalg import SolveReport, cg_solve, spmv
from .mesh import (DomainSpec, TriangleMesh, boundary_nodes, build_domain_mesh, mesh_size,
                   refine_uniform)
from .study import ExpectedRate, StudyConfig, emit_outputs, expected_rate, run_study

__version__ = "0.1.0"

__all__ = [
    "BoundaryField", "BoundaryFunction", "boundary_l2_error", "carstensen_interpolate",
    "l2_project_boundary", "ConvergenceRecord", "ExactSolution", "compute_eoc", "eval_exact",
    "l2_domain_error", "NodalField", "assemble_boundary_mass_and_domain_mass",
    "assemble_stiffness", "export_vtk", "solve_berggren", "solve_regularized", "SolveReport",
    "cg_solve", "spmv", "DomainSpec", "TriangleMesh", "boundary_nodes", "build_domain_mesh",
    "mesh_size", "refine_uniform", "ExpectedRate", "StudyConfig", "emit_outputs",
    "expected_rate", "run_study",
]
