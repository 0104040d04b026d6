"""Sparse matrix kernels shared by every stage of the solver.

All matrices are ``scipy.sparse.csr_matrix`` instances with sorted,
duplicate-free column indices and full (not half) symmetric storage.
"""
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

__all__ = [
    "as_csr",
    "is_symmetric",
    "spmv",
    "galerkin_triple",
    "lower_triangular_solve_transposed",
    "adjacency_neighbors",
    "nnz_per_row",
]


def as_csr(A):
    """Return ``A`` as a canonical float64 CSR matrix (sorted, no duplicates)."""
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=np.float64, copy=True)
    else:
        A = sp.csr_matrix(np.asarray(A, dtype=np.float64))
    A.sum_duplicates()
    A.sort_indices()
    return A


def is_symmetric(A, tol=0.0):
    """True when ``A`` equals its transpose entrywise to within ``tol``."""
    if A.shape[0] != A.shape[1]:
        return False
    diff = (A - A.T).tocsr()
    if diff.nnz == 0:
        return True
    return bool(np.max(np.abs(diff.data)) <= tol)


def spmv(A, x):
    """Sparse matrix-vector product ``A @ x``.

    Row sums are accumulated in ascending column order, so the result is
    reproducible bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise ValueError(
            f"dimension mismatch: matrix has {A.shape[1]} columns, vector has shape {x.shape}"
        )
    return A @ x


def galerkin_triple(P, A):
    """Coarse operator ``P^T A P``.

    When ``A`` is exactly symmetric the result is symmetrized so that its
    pattern and values are exactly symmetric too.
    """
    if A.shape[0] != A.shape[1] or P.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: P is {P.shape}, A is {A.shape}")
    P = sp.csr_matrix(P)
    AP = (A @ P).tocsr()
    Ac = (P.T.tocsr() @ AP).tocsr()
    if is_symmetric(A):
        Ac = ((Ac + Ac.T) * 0.5).tocsr()
    Ac.sum_duplicates()
    Ac.sort_indices()
    return Ac


def lower_triangular_solve_transposed(G, x):
    """Solve ``G^T y = x`` for lower-triangular ``G`` by back substitution."""
    x = np.asarray(x, dtype=np.float64)
    n = G.shape[0]
    if G.shape[1] != n or x.shape[0] != n:
        raise ValueError(f"dimension mismatch: G is {G.shape}, x has length {x.shape[0]}")
    d = G.diagonal()
    if np.any(d == 0.0):
        raise np.linalg.LinAlgError(
            f"singular factor: zero diagonal at row {int(np.flatnonzero(d == 0.0)[0])}"
        )
    U = sp.csr_matrix(G.T)
    return spsolve_triangular(U, x, lower=False)


def adjacency_neighbors(A, i):
    """Off-diagonal column indices stored in row ``i``."""
    n = A.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"row {i} out of range for matrix with {n} rows")
    cols = A.indices[A.indptr[i]:A.indptr[i + 1]]
    return cols[cols != i].copy()


def nnz_per_row(A):
    """Average number of stored entries per row."""
    return A.nnz / max(A.shape[0], 1)
