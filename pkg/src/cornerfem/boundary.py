"""Regularisation of rough Dirichlet data on the boundary loop.

A boundary datum ``u`` is replaced by a continuous piecewise linear function
on the boundary edges of the mesh, either by the quasi-interpolant

    pi_x(u) = (u, lambda_x) / (1, lambda_x)

at every boundary node ``x`` (``carstensen_interpolate``) or by the
L2(boundary) projection (``l2_project_boundary``).

Boundary integrals of ``u`` use 8-point Gauss rules per edge. On edges that
touch the origin the datum may blow up like ``r**mu``; if the exponent is
declared on the :class:`BoundaryFunction` a Gauss-Jacobi rule absorbs the
power exactly, otherwise a geometrically graded composite rule is used.

The regularisation operators also accept ``rule="midpoint"``: a one-point
rule per edge for ``(u, lambda_x)``. It only samples ``u`` at edge midpoints
and is the rule under which the published corner tables are reproduced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import linalg
from .mesh import TriangleMesh
from .quadrature import gauss_jacobi01, gauss_legendre01, graded_gauss01

N_GAUSS = 8
GRADING_RATIO = 0.15
GRADING_LEVELS = 30
ORIGIN_TOL = 1e-12
BOUNDARY_RULES = ("gauss", "midpoint")


class QuadratureError(ArithmeticError):
    """An integrand produced non-finite values at quadrature points."""


@dataclass(frozen=True)
class BoundaryFunction:
    """Boundary datum evaluated at Cartesian points of shape (n, 2).

    ``singular_exponent`` declares ``u(x) = |x|**mu * g(x)`` with ``g``
    smooth along straight boundary segments through the origin.
    ``smoothness`` is an optional Sobolev index claim used by rate tests.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    singular_exponent: float | None = None
    smoothness: float | None = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        vals = np.asarray(self.fn(points.reshape(-1, 2)), dtype=float)
        vals = np.broadcast_to(vals, (points.reshape(-1, 2).shape[0],))
        if not np.all(np.isfinite(vals)):
            raise QuadratureError("boundary datum is not finite at a quadrature point")
        return vals.reshape(points.shape[:-1])


def constant(c: float) -> BoundaryFunction:
    return BoundaryFunction(lambda p: np.full(len(p), float(c)), smoothness=1.0)


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """Piecewise linear function on the boundary loop.

    ``values[k]`` belongs to vertex ``mesh.boundary_vertex_ids[k]``.
    """

    mesh: TriangleMesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.mesh.boundary_edges),):
            raise ValueError(
                f"expected {len(self.mesh.boundary_edges)} boundary values, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def node_ids(self) -> np.ndarray:
        return self.mesh.boundary_vertex_ids

    def edge_values(self) -> tuple[np.ndarray, np.ndarray]:
        """Values at the start and end vertex of every boundary edge."""
        return self.values, np.roll(self.values, -1)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate on points lying on the boundary (nearest-edge lookup)."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        p0, p1 = _edge_geometry(self.mesh)[:2]
        d = p1 - p0
        rel = points[:, None, :] - p0[None]
        t = np.clip(np.sum(rel * d, axis=2) / np.sum(d * d, axis=1), 0.0, 1.0)
        dist = np.linalg.norm(rel - t[..., None] * d[None], axis=2)
        e = np.argmin(dist, axis=1)
        te = t[np.arange(len(points)), e]
        a, b = self.edge_values()
        return (1 - te) * a[e] + te * b[e]

    def as_function(self) -> BoundaryFunction:
        return BoundaryFunction(self)


def field_from_nodal(mesh: TriangleMesh, nodal: np.ndarray) -> BoundaryField:
    """Restriction of nodal values (over all vertices) to the boundary."""
    return BoundaryField(mesh, np.asarray(nodal, dtype=float)[mesh.boundary_vertex_ids])


def interpolate_boundary(fn: Callable, mesh: TriangleMesh) -> BoundaryField:
    """Nodal interpolant of a continuous function on the boundary loop."""
    return BoundaryField(mesh, fn(mesh.vertices[mesh.boundary_vertex_ids]))


# ---------------------------------------------------------------------------
# edge geometry and integrals


def _edge_geometry(mesh: TriangleMesh):
    be = mesh.boundary_edges
    p0 = mesh.vertices[be[:, 0]]
    p1 = mesh.vertices[be[:, 1]]
    length = np.linalg.norm(p1 - p0, axis=1)
    at_origin_start = np.linalg.norm(p0, axis=1) < ORIGIN_TOL
    at_origin_end = np.linalg.norm(p1, axis=1) < ORIGIN_TOL
    return p0, p1, length, at_origin_start, at_origin_end


def edge_lengths(mesh: TriangleMesh) -> np.ndarray:
    return _edge_geometry(mesh)[2]


def _singular_edges(mesh: TriangleMesh):
    """Singular edges re-parametrised to start at the origin.

    Returns ``(ids, q0, q1, flipped)``: the edge runs from ``q0`` (origin)
    to ``q1``; ``flipped`` is true when this reverses the stored direction.
    """
    p0, p1, _, s, e = _edge_geometry(mesh)
    ids = np.flatnonzero(s | e)
    flipped = e[ids] & ~s[ids]
    q0 = np.where(flipped[:, None], p1[ids], p0[ids])
    q1 = np.where(flipped[:, None], p0[ids], p1[ids])
    return ids, q0, q1, flipped


def _regular_rule(mesh: TriangleMesh):
    p0, p1, length, s, e = _edge_geometry(mesh)
    ids = np.flatnonzero(~(s | e))
    t, w = gauss_legendre01(N_GAUSS)
    return ids, p0[ids], p1[ids], length[ids], t, w


def edge_moments(u: BoundaryFunction, mesh: TriangleMesh,
                 rule: str = "gauss") -> tuple[np.ndarray, np.ndarray]:
    """``(int_e u (1 - t), int_e u t)`` for every boundary edge ``e``
    parametrised from its start (t = 0) to its end (t = 1)."""
    if rule == "midpoint":
        p0, p1, length = _edge_geometry(mesh)[:3]
        half = 0.5 * u(0.5 * (p0 + p1)) * length
        return half, half.copy()
    if rule != "gauss":
        raise ValueError(f"unknown boundary rule {rule!r}; expected one of {BOUNDARY_RULES}")
    n_edges = len(mesh.boundary_edges)
    m0 = np.zeros(n_edges)
    m1 = np.zeros(n_edges)

    ids, a, b, length, t, w = _regular_rule(mesh)
    if len(ids):
        pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        vals = u(pts) * w[None, :] * length[:, None]
        m0[ids] = vals @ (1 - t)
        m1[ids] = vals @ t

    ids, q0, q1, flipped = _singular_edges(mesh)
    if len(ids):
        tau, weight, scale = _singular_rule(u, q0, q1, power=1)
        pts = q0[:, None, :] + tau[None, :, None] * (q1 - q0)[:, None, :]
        vals = _regular_part(u, pts, power=1) * weight[None, :] * scale[:, None]
        near = vals @ (1 - tau)  # weight of the origin end
        far = vals @ tau
        m0[ids] = np.where(flipped, far, near)
        m1[ids] = np.where(flipped, near, far)
    return m0, m1


def _singular_rule(u: BoundaryFunction, q0, q1, power: int):
    """Rule on [0, 1] for edges starting at the origin.

    Returns ``(tau, weight, scale)`` such that for an edge of length ``L``
    ``int_e u**power * phi = scale * sum(weight * reg * phi(tau))`` where
    ``reg`` is :func:`_regular_part` at the nodes. With a declared exponent
    ``mu`` the factor ``t**(power * mu)`` is built into the weights.
    """
    length = np.linalg.norm(q1 - q0, axis=1)
    mu = u.singular_exponent
    if mu is None:
        tau, weight = graded_gauss01(N_GAUSS, GRADING_RATIO, GRADING_LEVELS)
        return tau, weight, length
    tau, weight = gauss_jacobi01(N_GAUSS, power * mu)
    return tau, weight, length ** (1.0 + power * mu)


def _regular_part(u: BoundaryFunction, pts: np.ndarray, power: int) -> np.ndarray:
    vals = u(pts) ** power
    mu = u.singular_exponent
    if mu is None:
        return vals
    return vals * np.linalg.norm(pts, axis=-1) ** (-power * mu)


def edge_squares(u: BoundaryFunction, mesh: TriangleMesh) -> np.ndarray:
    """``int_e u**2`` for every boundary edge."""
    out = np.zeros(len(mesh.boundary_edges))
    ids, a, b, length, t, w = _regular_rule(mesh)
    if len(ids):
        pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        out[ids] = (u(pts) ** 2 @ w) * length
    ids, q0, q1, _ = _singular_edges(mesh)
    if len(ids):
        tau, weight, scale = _singular_rule(u, q0, q1, power=2)
        pts = q0[:, None, :] + tau[None, :, None] * (q1 - q0)[:, None, :]
        out[ids] = (_regular_part(u, pts, power=2) @ weight) * scale
    return out


def boundary_mass_matrix(mesh: TriangleMesh) -> sp.csr_matrix:
    """P1 mass matrix of the closed boundary loop, in boundary numbering."""
    length = edge_lengths(mesh)
    k = len(length)
    i = np.arange(k)
    j = np.roll(i, -1)
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([length / 3, length / 3, length / 6, length / 6])
    return linalg.as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(k, k)))


def hat_integrals(mesh: TriangleMesh) -> np.ndarray:
    """``int_Gamma lambda_x`` for every boundary node."""
    length = edge_lengths(mesh)
    return 0.5 * (length + np.roll(length, 1))


def load_vector(u: BoundaryFunction, mesh: TriangleMesh, rule: str = "gauss") -> np.ndarray:
    """``(u, lambda_x)_Gamma`` for every boundary node."""
    m0, m1 = edge_moments(u, mesh, rule)
    return m0 + np.roll(m1, 1)


# ---------------------------------------------------------------------------
# regularisation operators


def carstensen_interpolate(u: BoundaryFunction, mesh: TriangleMesh,
                           rule: str = "gauss") -> BoundaryField:
    """Quasi-interpolant with nodal values ``(u, lambda_x) / (1, lambda_x)``."""
    return BoundaryField(mesh, load_vector(u, mesh, rule) / hat_integrals(mesh))


def l2_project_boundary(u: BoundaryFunction, mesh: TriangleMesh, rule: str = "gauss",
                        tol: float = linalg.DEFAULT_TOL) -> BoundaryField:
    """Orthogonal projection onto continuous piecewise linears on the loop."""
    M = boundary_mass_matrix(mesh)
    b = load_vector(u, mesh, rule)
    c, _ = linalg.cg_solve(M, b, tol)
    return BoundaryField(mesh, c)


def boundary_l2_error(u: BoundaryFunction, uh: BoundaryField) -> float:
    """``||u - uh||_{L2(Gamma)}``.

    Edges away from the origin integrate ``(u - uh)**2`` directly; on edges
    touching it the square is expanded so that the singular part ``u**2``
    gets its own weighted rule.
    """
    mesh = uh.mesh
    a_vals, b_vals = uh.edge_values()
    parts = np.zeros(len(mesh.boundary_edges))

    ids, a, b, length, t, w = _regular_rule(mesh)
    if len(ids):
        pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        lin = (1 - t)[None, :] * a_vals[ids, None] + t[None, :] * b_vals[ids, None]
        parts[ids] = ((u(pts) - lin) ** 2 @ w) * length

    ids = _singular_edges(mesh)[0]
    if len(ids):
        length = edge_lengths(mesh)[ids]
        m0, m1 = edge_moments(u, mesh)
        c0, c1 = a_vals[ids], b_vals[ids]
        uu = edge_squares(u, mesh)[ids]
        u_uh = c0 * m0[ids] + c1 * m1[ids]
        uh_uh = length / 3 * (c0 * c0 + c0 * c1 + c1 * c1)
        parts[ids] = np.maximum(uu - 2 * u_uh + uh_uh, 0.0)
    return math.sqrt(math.fsum(parts))


def boundary_l2_norm(u: BoundaryFunction, mesh: TriangleMesh) -> float:
    return math.sqrt(math.fsum(edge_squares(u, mesh)))


def field_l2_norm(uh: BoundaryField) -> float:
    M = boundary_mass_matrix(uh.mesh)
    return math.sqrt(max(float(uh.values @ (M @ uh.values)), 0.0))
