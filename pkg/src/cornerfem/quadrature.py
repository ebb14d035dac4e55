"""Quadrature rules on the unit interval and the reference triangle."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg

# Dunavant rules on the reference triangle, as (barycentric orbit, weight)
# with weights normalised to sum to one.
_DUNAVANT = {
    4: [
        ((0.445948490915965, 0.445948490915965, 0.108103018168070), 0.223381589678011),
        ((0.091576213509771, 0.091576213509771, 0.816847572980459), 0.109951743655322),
    ],
    6: [
        ((0.249286745170910, 0.249286745170910, 0.501426509658179), 0.116786275726379),
        ((0.063089014491502, 0.063089014491502, 0.873821971016996), 0.050844906370207),
        ((0.310352451033784, 0.053145049844817, 0.636502499121399), 0.082851075618374),
    ],
}


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (Q, 3) and weights (Q,) summing to one.

    Exact for polynomials of total degree ``degree`` (4 or 6).
    """
    if degree not in _DUNAVANT:
        raise ValueError(f"no triangle rule of degree {degree}; available: {sorted(_DUNAVANT)}")
    pts, wts = [], []
    for orbit, w in _DUNAVANT[degree]:
        perms = {orbit[i:] + orbit[:i] for i in range(3)}
        perms |= {tuple(reversed(p)) for p in perms}
        for p in sorted(perms):
            pts.append(p)
            wts.append(w)
    pts = np.array(pts)
    pts /= pts.sum(axis=1, keepdims=True)
    wts = np.array(wts)
    wts /= wts.sum()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


@lru_cache(maxsize=None)
def gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi01(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for ``int_0^1 t**beta g(t) dt`` (``beta > -1``)."""
    if beta <= -1.0:
        raise ValueError("weight t**beta not integrable for beta <= -1")
    # Golub-Welsch on the monic Jacobi recurrence (alpha = 0) for the weight
    # (1 + x)**beta on [-1, 1]. Near beta = -1 this keeps the moments accurate
    # to ~1e-12, unlike scipy.special.roots_jacobi (~1e-10).
    k = np.arange(1, n)
    s = 2.0 * k + beta
    diag = np.empty(n)
    diag[0] = beta / (beta + 2.0)
    diag[1:] = beta**2 / (s * (s + 2.0))
    off2 = 4.0 * k * k * (k + beta) ** 2 / (s**2 * (s + 1.0) * (s - 1.0))
    x, vec = scipy.linalg.eigh_tridiagonal(diag, np.sqrt(off2))
    # the zeroth moment of t**beta on [0, 1] is 1 / (beta + 1)
    return 0.5 * (x + 1.0), vec[0] ** 2 / (beta + 1.0)


@lru_cache(maxsize=None)
def graded_gauss01(n: int, ratio: float, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on [0, 1] geometrically graded towards t = 0."""
    x, w = gauss_legendre01(n)
    breaks = np.concatenate([[0.0], ratio ** np.arange(levels, -1, -1)])
    a, b = breaks[:-1, None], breaks[1:, None]
    return (a + (b - a) * x).ravel(), ((b - a) * w).ravel()


def monomial_integral(i: int, j: int) -> float:
    """Exact ``int x^i y^j`` over the reference triangle (0,0),(1,0),(0,1)."""
    from math import factorial
    return factorial(i) * factorial(j) / factorial(i + j + 2)
