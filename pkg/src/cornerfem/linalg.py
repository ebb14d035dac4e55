"""Sparse matrices and solvers.

Matrices are :class:`scipy.sparse.csr_matrix` objects in canonical form
(sorted column indices, no duplicates). The conjugate gradient solver is
written out here so that the stopping rule and the Jacobi preconditioner
are under our control.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

log = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix

DEFAULT_TOL = 1e-12
DENSE_LIMIT = 64


class SolverError(RuntimeError):
    """Iterative solve did not reach the requested tolerance."""


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_relative_residual: float


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR copy of ``A``."""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def is_symmetric(A: sp.csr_matrix, rtol: float = 1e-14) -> bool:
    diff = abs(A - A.T)
    scale = abs(A).max() if A.nnz else 0.0
    return diff.nnz == 0 or diff.max() <= rtol * scale


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def dense_solve(A, b: np.ndarray) -> np.ndarray:
    """Solve a small symmetric system by an LDL^T factorization."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != b.shape[0]:
        raise ValueError("dimension mismatch")
    if A.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense fallback limited to n <= {DENSE_LIMIT}")
    lu, d, perm = scipy.linalg.ldl(A, lower=True)
    L = lu[perm]
    z = scipy.linalg.solve_triangular(L, b[perm], lower=True, unit_diagonal=True)
    w = np.linalg.solve(d, z)  # d is block diagonal (1x1/2x2)
    y = scipy.linalg.solve_triangular(L.T, w, lower=False, unit_diagonal=True)
    x = np.empty_like(y)
    x[perm] = y
    return x


def cg_solve(A: sp.csr_matrix, b: np.ndarray, tol: float = DEFAULT_TOL,
             max_iter: int | None = None, x0: np.ndarray | None = None):
    """Jacobi-preconditioned conjugate gradients.

    Iterates until ``||b - A x|| <= tol * ||b||`` (true residual, checked on
    exit). Returns ``(x, SolveReport)``; raises :class:`SolverError` when
    ``max_iter`` is exhausted.
    """
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"dimension mismatch: {A.shape} vs {b.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = max(10 * n, 100)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix has a non-positive diagonal entry")
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.copy()
    target = tol * bnorm
    it = 0
    # restart loop guards against drift of the recursive residual
    while True:
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            break
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        while it < max_iter:
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0:
                raise SolverError("matrix is not positive definite")
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            it += 1
            if np.linalg.norm(r) <= 0.5 * target:
                break
            z = inv_diag * r
            rz_new = r @ z
            p *= rz_new / rz
            p += z
            rz = rz_new
        r = b - A @ x
        if it >= max_iter and np.linalg.norm(r) > target:
            raise SolverError(
                f"CG did not converge in {max_iter} iterations "
                f"(relative residual {np.linalg.norm(r) / bnorm:.3e})")
    res = float(np.linalg.norm(r) / bnorm)
    log.debug("cg: n=%d iterations=%d residual=%.2e", n, it, res)
    return x, SolveReport(it, res)


def solve_spd(A: sp.csr_matrix, b: np.ndarray, tol: float = DEFAULT_TOL,
              x0: np.ndarray | None = None) -> np.ndarray:
    """CG solve returning only the solution."""
    return cg_solve(A, b, tol, x0=x0)[0]


def cg_solve_many(A: sp.csr_matrix, B: np.ndarray, tol: float = DEFAULT_TOL,
                  max_iter: int | None = None) -> np.ndarray:
    """Independent Jacobi-CG solves for every column of ``B``.

    The columns share the preconditioner and the matrix products but keep
    their own step lengths, so each column converges exactly as
    :func:`cg_solve` would.
    """
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    if B.ndim != 2 or B.shape[0] != n or A.shape != (n, n):
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    if max_iter is None:
        max_iter = max(10 * n, 100)
    inv_diag = (1.0 / A.diagonal())[:, None]
    X = np.zeros_like(B)
    R = B.copy()
    target = tol * np.linalg.norm(B, axis=0)
    active = np.linalg.norm(R, axis=0) > target
    for _ in range(3):  # restarts with the true residual
        Z = inv_diag * R
        P = Z.copy()
        rz = np.einsum("ij,ij->j", R, Z)
        it = 0
        while active.any() and it < max_iter:
            AP = A @ P
            pAp = np.einsum("ij,ij->j", P, AP)
            alpha = np.where(active, rz / np.where(pAp > 0, pAp, 1.0), 0.0)
            X += alpha * P
            R -= alpha * AP
            it += 1
            active &= np.linalg.norm(R, axis=0) > 0.5 * target
            Z = inv_diag * R
            rz_new = np.einsum("ij,ij->j", R, Z)
            beta = np.where(active, rz_new / np.where(rz > 0, rz, 1.0), 0.0)
            P = Z + beta * P
            rz = rz_new
        R = B - A @ X
        active = np.linalg.norm(R, axis=0) > target
        if not active.any():
            return X
    raise SolverError(f"{int(active.sum())} of {B.shape[1]} CG solves did not converge")
