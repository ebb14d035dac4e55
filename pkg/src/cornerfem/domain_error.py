"""Exact corner solution, L2(domain) errors and convergence orders.

The error integral uses a degree-6 Dunavant rule per triangle with a
degree-4 companion as error indicator. Triangles with a vertex at the
origin, where ``(y - y_h)**2`` behaves like ``r**(2 mu)``, are always
graded geometrically towards the origin instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .fem import NodalField
from .mesh import DomainSpec, polygon_area
from .quadrature import triangle_rule

CORNER_EXPONENT = -0.4999
RTOL = 1e-6
# absolute floor for integrals of squared errors: 1e-24 is 1e-12 in the norm,
# far below discretisation errors but above the roundoff of (y - y_h)**2
ATOL = 1e-24
GRADING_DEPTH = 40
MAX_DEPTH = 30
NEAR_SPLITS = 2
CHUNK = 65536
ORIGIN_TOL = 1e-12


class IntegrationError(ArithmeticError):
    """Adaptive refinement exceeded its depth budget."""


@dataclass(frozen=True)
class ExactSolution:
    """``y = r**mu * sin(mu * phi)`` with ``phi`` measured from the x-axis.

    Harmonic away from the origin; its trace is the rough boundary datum of
    the corner experiments (zero on the positive x-axis).
    """

    omega: float
    mu: float = CORNER_EXPONENT

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        r = np.hypot(points[..., 0], points[..., 1])
        phi = DomainSpec(self.omega).polar_angle(points)
        with np.errstate(divide="ignore"):
            return np.exp(self.mu * np.log(r)) * np.sin(self.mu * phi)

    def boundary_datum(self):
        from .boundary import BoundaryFunction

        return BoundaryFunction(self, singular_exponent=self.mu)


def eval_exact(spec: ExactSolution, point) -> float:
    """Evaluate at a single point; the origin is outside the domain of ``y``."""
    p = np.asarray(point, dtype=float)
    if np.hypot(p[0], p[1]) == 0.0:
        raise ValueError("exact solution is infinite at the origin")
    return float(spec(p[None, :])[0])


# ---------------------------------------------------------------------------
# triangle integration


def _split(P: np.ndarray, V: np.ndarray):
    """Four congruent children; child 0 keeps vertex 0."""
    m01 = 0.5 * (P[:, 0] + P[:, 1])
    m12 = 0.5 * (P[:, 1] + P[:, 2])
    m20 = 0.5 * (P[:, 2] + P[:, 0])
    w01 = 0.5 * (V[:, 0] + V[:, 1])
    w12 = 0.5 * (V[:, 1] + V[:, 2])
    w20 = 0.5 * (V[:, 2] + V[:, 0])
    Pc = np.stack([
        np.stack([P[:, 0], m01, m20], axis=1),
        np.stack([m01, P[:, 1], m12], axis=1),
        np.stack([m20, m12, P[:, 2]], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ])
    Vc = np.stack([
        np.stack([V[:, 0], w01, w20], axis=1),
        np.stack([w01, V[:, 1], w12], axis=1),
        np.stack([w20, w12, V[:, 2]], axis=1),
        np.stack([w01, w12, w20], axis=1),
    ])
    return Pc, Vc


def _area(P: np.ndarray) -> np.ndarray:
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _rule(integrand, P, V, degree):
    bary, w = triangle_rule(degree)
    out = np.empty(len(P))
    for s in range(0, len(P), CHUNK):
        p, v = P[s:s + CHUNK], V[s:s + CHUNK]
        pts = bary @ p  # (B, Q, 2)
        vals = integrand(pts, v @ bary.T)
        out[s:s + CHUNK] = _area(p) * (vals @ w)
    return out


class _Integrator:
    """Integral of ``integrand(points, linear_values)`` over triangles, where
    ``linear_values`` interpolates the per-vertex data ``V``."""

    def __init__(self, integrand, rtol=RTOL, grading_depth=GRADING_DEPTH,
                 max_depth=MAX_DEPTH, near_splits=NEAR_SPLITS, atol=ATOL):
        self.integrand = integrand
        self.rtol = rtol
        self.atol = atol
        self.grading_depth = grading_depth
        self.max_depth = max_depth
        self.near_splits = near_splits

    def __call__(self, P: np.ndarray, V: np.ndarray) -> float:
        near_origin = np.linalg.norm(P, axis=2) < ORIGIN_TOL
        touching = near_origin.any(axis=1)
        # rotate so the origin vertex comes first
        first = np.argmax(near_origin, axis=1)
        order = (first[:, None] + np.arange(3)[None, :]) % 3
        rows = np.arange(len(P))[:, None]
        Pg, Vg = P[rows, order][touching], V[rows, order][touching]
        Pr, Vr = P[~touching], V[~touching]

        pieces = []
        total_area = float(_area(P).sum())
        estimate = _rule(self.integrand, P, V, 6).sum()
        pieces.append(self._graded(Pg, Vg))
        budget = max(0.1 * self.rtol * abs(estimate), self.atol)
        pieces.append(self._adaptive(Pr, Vr, budget, total_area))
        return math.fsum(np.concatenate(pieces))

    def _adaptive(self, P, V, budget, total_area):
        accepted = []
        for _ in range(self.max_depth + 1):
            if len(P) == 0:
                return np.concatenate(accepted) if accepted else np.zeros(0)
            q6 = _rule(self.integrand, P, V, 6)
            q4 = _rule(self.integrand, P, V, 4)
            err = np.abs(q6 - q4)
            area = _area(P)
            # the global test stops once only roundoff noise is left, which
            # splitting would never reduce
            if err.sum() <= budget * area.sum() / total_area:
                accepted.append(q6)
                P = P[:0]
                continue
            ok = err <= budget * area / total_area
            accepted.append(q6[ok])
            Pc, Vc = _split(P[~ok], V[~ok])
            P, V = Pc.reshape(-1, 3, 2), Vc.reshape(-1, 3)
        raise IntegrationError(
            f"adaptive quadrature exceeded depth {self.max_depth} on {len(P)} triangles")

    def _graded(self, P, V):
        out = []
        for _ in range(self.grading_depth):
            if len(P) == 0:
                break
            Pc, Vc = _split(P, V)
            Pn, Vn = Pc[1:].reshape(-1, 3, 2), Vc[1:].reshape(-1, 3)
            for _ in range(self.near_splits):
                Pn, Vn = (a.reshape(-1, *a.shape[2:]) for a in _split(Pn, Vn))
            out.append(_rule(self.integrand, Pn, Vn, 6))
            P, V = Pc[0], Vc[0]
        if len(P):
            out.append(_rule(self.integrand, P, V, 6))
        return np.concatenate(out) if out else np.zeros(0)


def integrate_squared_difference(mesh, nodal_values, exact: Callable,
                                 rtol=RTOL, grading_depth=GRADING_DEPTH) -> float:
    """``int (exact - y_h)**2`` over the mesh, ``y_h`` given by nodal values."""
    P = mesh.vertices[mesh.triangles]
    V = np.asarray(nodal_values, dtype=float)[mesh.triangles]

    def integrand(pts, lin):
        return (exact(pts) - lin) ** 2

    return _Integrator(integrand, rtol, grading_depth)(P, V)


def l2_domain_error(yh: NodalField, exact: Callable, rtol: float = RTOL,
                    grading_depth: int = GRADING_DEPTH) -> float:
    """``||exact - yh||_{L2(domain)}`` by adaptive quadrature.

    ``exact`` maps points of shape (..., 2) to values; any callable works,
    which lets tests substitute smooth functions.
    """
    return math.sqrt(integrate_squared_difference(yh.mesh, yh.values, exact, rtol, grading_depth))


def integrate_function(mesh, fn: Callable, rtol=RTOL, grading_depth=GRADING_DEPTH) -> float:
    """``int fn`` over the mesh by the same adaptive scheme."""
    P = mesh.vertices[mesh.triangles]
    V = np.zeros(P.shape[:2])
    return _Integrator(lambda pts, lin: fn(pts), rtol, grading_depth)(P, V)


# ---------------------------------------------------------------------------
# convergence tables


@dataclass(frozen=True)
class ConvergenceRecord:
    h: float
    unknowns: int
    error: float
    eoc: float | None = None


def eoc(e_prev: float, e_next: float, h_prev: float, h_next: float) -> float:
    return math.log(e_prev / e_next) / math.log(h_prev / h_next)


def compute_eoc(records: Sequence[ConvergenceRecord]) -> list[ConvergenceRecord]:
    """Fill in experimental orders ``log(e_{k-1}/e_k) / log(h_{k-1}/h_k)``."""
    records = list(records)
    if len(records) < 2:
        raise ValueError("need at least two records")
    for a, b in zip(records, records[1:]):
        if not b.h < a.h:
            raise ValueError("mesh sizes must be strictly decreasing")
    out = [replace(records[0], eoc=None)]
    for a, b in zip(records, records[1:]):
        out.append(replace(b, eoc=eoc(a.error, b.error, a.h, b.h)))
    return out


def domain_area(omega: float) -> float:
    return polygon_area(DomainSpec(omega).corners())
