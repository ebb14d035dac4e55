"""P1 finite elements: assembly and the two discrete Dirichlet solvers.

``solve_regularized`` imposes a piecewise linear boundary datum by
elimination and solves the interior block. ``solve_berggren`` assembles the
three-equation system with auxiliary variables ``v_h`` and ``zeta_h`` one
basis function at a time; with the L2-projected datum both give the same
nodal values, which is how the second path is used (as a cross-check on
coarse meshes).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import linalg
from .boundary import BoundaryField, BoundaryFunction, boundary_mass_matrix, load_vector
from .mesh import TriangleMesh

BERGGREN_VERTEX_BUDGET = 2000

SourceSpec = Callable[[np.ndarray], np.ndarray]


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NodalField:
    """Continuous piecewise linear function given by its vertex values."""

    mesh: TriangleMesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} values, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def boundary_field(self) -> BoundaryField:
        return BoundaryField(self.mesh, self.values[self.mesh.boundary_vertex_ids])


def _gradients(mesh: TriangleMesh):
    """Barycentric gradients (T, 3, 2) and areas (T,)."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    if np.any(area <= 0):
        raise AssemblyError("degenerate or inverted triangle")
    # grad lambda_k is the rotated opposite edge over twice the area
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2 * area)[:, None, None]
    return grads, area


def _scatter(mesh: TriangleMesh, local: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return linalg.as_csr(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))


def assemble_stiffness(mesh: TriangleMesh) -> sp.csr_matrix:
    """Matrix of ``int grad lambda_i . grad lambda_j`` over all vertices."""
    grads, area = _gradients(mesh)
    local = np.einsum("tik,tjk->tij", grads, grads) * area[:, None, None]
    return _scatter(mesh, local)


_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble_domain_mass(mesh: TriangleMesh) -> sp.csr_matrix:
    _, area = _gradients(mesh)
    return _scatter(mesh, area[:, None, None] * _LOCAL_MASS[None])


def assemble_boundary_mass_and_domain_mass(mesh: TriangleMesh):
    """``(M_Gamma, M_Omega)``, both indexed by global vertex number."""
    bid = mesh.boundary_vertex_ids
    n = mesh.n_vertices
    Mb = boundary_mass_matrix(mesh).tocoo()
    M_gamma = linalg.as_csr(sp.coo_matrix((Mb.data, (bid[Mb.row], bid[Mb.col])), shape=(n, n)))
    return M_gamma, assemble_domain_mass(mesh)


def load_vector_domain(mesh: TriangleMesh, f: SourceSpec | None) -> np.ndarray:
    """``(f, lambda_i)`` by the mid-edge rule (exact for quadratic ``f lambda``)."""
    n = mesh.n_vertices
    if f is None:
        return np.zeros(n)
    _, area = _gradients(mesh)
    p = mesh.vertices[mesh.triangles]
    # midpoint k is opposite vertex k; lambda_j is 1/2 there unless j == k
    mids = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])
    fm = np.asarray(f(mids.reshape(-1, 2)), dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(fm)):
        raise AssemblyError("source term not finite at a quadrature point")
    local = (area / 3)[:, None] * 0.5 * (fm.sum(axis=1, keepdims=True) - fm)
    return np.bincount(mesh.triangles.ravel(), local.ravel(), minlength=n)


def solve_regularized(mesh: TriangleMesh, uh: BoundaryField, f: SourceSpec | None = None,
                      tol: float = linalg.DEFAULT_TOL, x0: np.ndarray | None = None,
                      stiffness: sp.csr_matrix | None = None) -> NodalField:
    """Discrete harmonic extension (plus source) of the boundary datum ``uh``.

    ``x0`` optionally gives nodal start values for the interior CG solve.
    """
    if uh.mesh is not mesh:
        raise ValueError("boundary field belongs to a different mesh")
    A = assemble_stiffness(mesh) if stiffness is None else stiffness
    interior = mesh.interior_vertex_ids
    bnd = mesh.boundary_vertex_ids
    y = np.zeros(mesh.n_vertices)
    y[bnd] = uh.values
    if len(interior):
        A_ii = A[interior][:, interior]
        rhs = load_vector_domain(mesh, f)[interior] - A[interior][:, bnd] @ uh.values
        start = None if x0 is None else np.asarray(x0)[interior]
        y[interior], _ = linalg.cg_solve(A_ii, rhs, tol, x0=start)
    return NodalField(mesh, y)


def galerkin_residual(field: NodalField, f: SourceSpec | None = None) -> np.ndarray:
    """``(grad y_h, grad v) - (f, v)`` for every interior hat function ``v``."""
    mesh = field.mesh
    r = assemble_stiffness(mesh) @ field.values - load_vector_domain(mesh, f)
    return r[mesh.interior_vertex_ids]


def solve_berggren(mesh: TriangleMesh, u: BoundaryFunction, f: SourceSpec | None = None,
                   tol: float = linalg.DEFAULT_TOL,
                   vertex_budget: int = BERGGREN_VERTEX_BUDGET,
                   rule: str = "gauss") -> NodalField:
    """Three-equation discretisation with auxiliary ``v_h`` and ``zeta_h``.

    For every basis function ``phi_i``:

    * ``v_h`` in the zero-trace space solves ``(grad v_h, grad psi) = (phi_i, psi)``,
    * ``zeta_h`` on the boundary solves
      ``(zeta_h, chi)_Gamma = (grad v_h, grad chi) - (phi_i, chi)`` for boundary hats ``chi``,

    and the ``i``-th load entry is ``-(u, zeta_h)_Gamma + (f, v_h)``. The
    solution solves the domain mass system with that load. Costs one interior
    solve per vertex, hence the vertex budget. ``rule`` selects the boundary
    quadrature for ``(u, chi)_Gamma`` as in :mod:`cornerfem.boundary`.
    """
    n = mesh.n_vertices
    if n > vertex_budget:
        raise ValueError(f"mesh has {n} vertices, above the budget of {vertex_budget}")
    K = assemble_stiffness(mesh)
    M = assemble_domain_mass(mesh)
    Mg = boundary_mass_matrix(mesh)
    interior = mesh.interior_vertex_ids
    bnd = mesh.boundary_vertex_ids

    # columns of V are v_h(phi_i) on the interior vertices
    M_i = M[interior].toarray()
    V = linalg.cg_solve_many(K[interior][:, interior], M_i, tol) if len(interior) else M_i
    # columns of Z are zeta_h(phi_i) on the boundary vertices
    Z_rhs = K[bnd][:, interior] @ V - M[bnd].toarray()
    Z = linalg.cg_solve_many(Mg, Z_rhs, tol)

    g = load_vector(u, mesh, rule)
    r = -(Z.T @ g)
    if f is not None:
        r += V.T @ load_vector_domain(mesh, f)[interior]
    y, _ = linalg.cg_solve(M, r, tol)
    return NodalField(mesh, y)


def export_vtk(field: NodalField, path, name: str = "y_h", extra: dict | None = None) -> None:
    """Write the field as a legacy ASCII VTK unstructured grid."""
    from .vtk import write_vtk

    data = {name: field.values}
    if extra:
        data.update(extra)
    write_vtk(path, field.mesh, data)
