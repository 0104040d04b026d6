"""Small dense helpers used by several setup stages."""
import numpy as np

__all__ = ["orthonormalize", "kaporin_number"]


def orthonormalize(V, drop_tol=1e-12):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Columns whose norm after projection falls below ``drop_tol`` times their
    original norm (or that are zero to begin with) are dropped.

    Returns
    -------
    Q : ndarray
        Orthonormal columns, in input order.
    kept : ndarray of int
        Indices of the input columns that survived.
    """
    V = np.array(V, dtype=np.float64, copy=True)
    if V.ndim == 1:
        V = V[:, None]
    n, m = V.shape
    Q = np.empty((n, m))
    kept = []
    for j in range(m):
        v = V[:, j].copy()
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0 or not np.isfinite(norm0):
            continue
        for _ in range(2):
            for k in range(len(kept)):
                q = Q[:, k]
                v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm <= drop_tol * norm0:
            continue
        Q[:, len(kept)] = v / norm
        kept.append(j)
    return Q[:, :len(kept)].copy(), np.asarray(kept, dtype=np.intp)


def kaporin_number(M):
    """Kaporin condition number ``(trace(M)/n) / det(M)**(1/n)`` of a dense SPD matrix."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    L = np.linalg.cholesky(M)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(np.trace(M) / n / np.exp(logdet / n))
