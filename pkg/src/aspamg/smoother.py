"""Adaptive factorized sparse approximate inverse (aFSAI) smoother.

The smoother is ``S = I - omega * G^T G A`` with ``G`` lower triangular and
``G^T G ~ A^{-1}``. Each row of ``G`` is grown independently: starting from
a given pattern, entries are added where the gradient of the Kaporin
functional is largest until the local Schur complement stops decreasing.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.linalg import splu

from aspamg.sparse import nnz_per_row

__all__ = [
    "NotSPDError",
    "SmootherConfig",
    "FsaiSmoother",
    "afsai_build",
    "estimate_lambda_max",
    "compute_omega",
    "smoother_setup",
    "apply_smoothing_step",
]

log = logging.getLogger(__name__)

LAMBDA_SAFETY = 1.05


class NotSPDError(np.linalg.LinAlgError):
    """Raised when a local factorization reveals a matrix that is not SPD."""


@dataclass
class SmootherConfig:
    """Parameters of the automatic aFSAI set-up.

    ``k0, rho0, eps0`` drive the initial build from the identity pattern,
    ``ki, rhoi, epsi`` each refinement pass. Refinement continues while the
    damping factor is below ``omega_bar`` and the average number of entries
    per row of ``G`` is below ``rho_bar`` (``None`` means twice the average
    row count of the lower triangle of ``A``).
    """

    k0: int = 4
    rho0: int = 4
    eps0: float = 1e-3
    ki: int = 2
    rhoi: int = 4
    epsi: float = 1e-3
    omega_bar: float = 0.95
    rho_bar: float = None
    lanczos_steps: int = 10
    lanczos_seed: int = 1234
    max_passes: int = 50

    def __post_init__(self):
        if self.k0 < 0 or self.ki < 0:
            raise ValueError("k0 and ki must be >= 0")
        if self.rho0 < 1 or self.rhoi < 1:
            raise ValueError("rho0 and rhoi must be >= 1")
        if self.eps0 < 0 or self.epsi < 0:
            raise ValueError("exit tolerances must be >= 0")
        if self.rho_bar is not None and not self.rho_bar > 0:
            raise ValueError("rho_bar must be positive")


@dataclass
class FsaiSmoother:
    """Damped aFSAI smoother ``x <- x + omega G^T G (b - A x)``."""

    G: sp.csr_matrix
    omega: float
    psi: np.ndarray = field(default=None, repr=False)
    lambda_max: float = 1.0
    passes: int = 0
    exit_reason: str = "initial"
    history: list = field(default_factory=list, repr=False)

    def apply_inverse(self, r):
        """``omega G^T G r``."""
        return self.omega * (self.G.T @ (self.G @ r))

    def step(self, A, b, x):
        return apply_smoothing_step(self, A, b, x)

    @property
    def density(self):
        return nnz_per_row(self.G)

    def kaporin_number(self, A):
        """Kaporin condition number of ``G A G^T``.

        With unit diagonal, ``det(G A G^T) = det(A) / prod(psi)``, so only a
        log-determinant of ``A`` is needed.
        """
        lu = splu(sp.csc_matrix(A))
        logdet = np.sum(np.log(np.abs(lu.U.diagonal())))
        return float(np.exp(np.mean(np.log(self.psi)) - logdet / A.shape[0]))


def _row_pattern(G, i):
    if G is None:
        return []
    cols = G.indices[G.indptr[i]:G.indptr[i + 1]]
    return [int(j) for j in cols if j < i]


def _local_solve(A_rows, idx, pos):
    """Solve ``A[idx, idx] g = e_last`` by dense Cholesky."""
    m = len(idx)
    M = np.zeros((m, m))
    for a, p in enumerate(idx):
        cols, vals = A_rows[p]
        loc = pos[cols]
        mask = loc >= 0
        M[a, loc[mask]] = vals[mask]
    try:
        c = cho_factor(M, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NotSPDError(f"local system of row {idx[-1]} is not positive definite") from exc
    e = np.zeros(m)
    e[-1] = 1.0
    g = cho_solve(c, e, check_finite=False)
    if not g[-1] > 0.0:
        raise NotSPDError(f"non-positive pivot in row {idx[-1]}")
    return g


def afsai_build(A, G_start=None, k=4, rho=4, eps=1e-3, return_psi=False):
    """Adaptive FSAI factor of an SPD matrix.

    Parameters
    ----------
    A : csr_matrix
        Symmetric positive definite matrix with full storage.
    G_start : csr_matrix, optional
        Lower-triangular factor whose row patterns seed the growth; the
        identity pattern when omitted.
    k : int
        Maximum adaptive steps per row.
    rho : int
        Entries added per row and step.
    eps : float
        Per-row exit tolerance on the relative decrease of the local
        Schur complement ``psi_i = 1 / g_ii``.

    Returns
    -------
    G : csr_matrix
        Lower triangular with ``diag(G A G^T) = 1``.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise NotSPDError(f"non-positive diagonal entry at row {int(np.flatnonzero(diag <= 0)[0])}")
    A_rows = [
        (A.indices[A.indptr[i]:A.indptr[i + 1]], A.data[A.indptr[i]:A.indptr[i + 1]])
        for i in range(n)
    ]
    pos = np.full(n, -1, dtype=np.intp)
    indptr = [0]
    indices = []
    data = []
    psi_all = np.empty(n)
    for i in range(n):
        pattern = sorted(_row_pattern(G_start, i))
        idx = pattern + [i]
        pos[idx] = np.arange(len(idx))
        g = _local_solve(A_rows, idx, pos)
        psi = 1.0 / g[-1]
        for _step in range(k):
            # gradient of the Kaporin functional: (A g)_j for j < i outside the pattern
            cols = np.concatenate([A_rows[p][0] for p in idx])
            vals = np.concatenate([A_rows[p][1] * g[a] for a, p in enumerate(idx)])
            keep = (cols < i) & (pos[cols] < 0)
            if not np.any(keep):
                break
            cand, inv = np.unique(cols[keep], return_inverse=True)
            grad = np.abs(np.bincount(inv, weights=vals[keep], minlength=len(cand)))
            order = np.lexsort((cand, -grad))[:rho]
            new = cand[order].tolist()
            pos[idx] = -1
            idx = sorted(idx[:-1] + new) + [i]
            pos[idx] = np.arange(len(idx))
            g = _local_solve(A_rows, idx, pos)
            psi_new = 1.0 / g[-1]
            decrease = (psi - psi_new) / psi
            psi = psi_new
            if decrease <= eps:
                break
        psi_all[i] = psi
        pos[idx] = -1
        row = g / np.sqrt(g[-1])
        indices.extend(idx)
        data.extend(row.tolist())
        indptr.append(len(indices))
    G = sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.intp), np.asarray(indptr, dtype=np.intp)),
        shape=(n, n),
    )
    G.sort_indices()
    if return_psi:
        return G, psi_all
    return G


def estimate_lambda_max(G, A, steps=10, seed=1234):
    """Largest eigenvalue of ``G A G^T`` from a few Lanczos steps, times 1.05."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    n = A.shape[0]
    GT = G.T.tocsr()
    rng = np.random.default_rng(seed)
    q = rng.uniform(-1.0, 1.0, n)
    q /= np.linalg.norm(q)
    q_prev = np.zeros(n)
    alphas, betas = [], []
    beta = 0.0
    ritz = 0.0
    for _ in range(min(steps, n)):
        w = G @ (A @ (GT @ q))
        alpha = q @ w
        w -= alpha * q + beta * q_prev
        alphas.append(alpha)
        T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        ritz = np.linalg.eigvalsh(T)[-1]
        beta = np.linalg.norm(w)
        if beta <= 1e-14 * max(abs(alpha), 1.0):
            break
        betas.append(beta)
        q_prev, q = q, w / beta
    return float(ritz * LAMBDA_SAFETY)


def compute_omega(lambda_hat):
    """Damping factor ``min(1, 2 / lambda_hat)``."""
    if not lambda_hat > 0:
        raise ValueError("lambda_hat must be positive")
    return min(1.0, 2.0 / lambda_hat)


def smoother_setup(A, cfg=None, keep_history=False):
    """Build a damped aFSAI smoother with automatic refinement.

    The factor is refined with ``(ki, rhoi, epsi)`` passes, each starting
    from the previous pattern, while ``omega < omega_bar`` and the average
    row density of ``G`` is below ``rho_bar``.
    """
    cfg = cfg or SmootherConfig()
    A = sp.csr_matrix(A)
    rho_bar = cfg.rho_bar
    if rho_bar is None:
        rho_bar = 2.0 * nnz_per_row(sp.tril(A))
    G, psi = afsai_build(A, None, cfg.k0, cfg.rho0, cfg.eps0, return_psi=True)
    lam = estimate_lambda_max(G, A, cfg.lanczos_steps, cfg.lanczos_seed)
    omega = compute_omega(lam)
    history = [G] if keep_history else []
    passes = 0
    reason = "omega"
    while True:
        if omega >= cfg.omega_bar:
            reason = "omega"
            break
        if nnz_per_row(G) >= rho_bar:
            reason = "density"
            break
        if passes >= cfg.max_passes:
            reason = "max-passes"
            break
        G_new, psi = afsai_build(A, G, cfg.ki, cfg.rhoi, cfg.epsi, return_psi=True)
        passes += 1
        grew = G_new.nnz > G.nnz
        G = G_new
        lam = estimate_lambda_max(G, A, cfg.lanczos_steps, cfg.lanczos_seed)
        omega = compute_omega(lam)
        if keep_history:
            history.append(G)
        if not grew:
            reason = "stagnation"
            break
    log.debug("aFSAI: n=%d passes=%d nnz_r=%.2f omega=%.3f (%s)", A.shape[0], passes,
              nnz_per_row(G), omega, reason)
    return FsaiSmoother(
        G=G,
        omega=omega,
        psi=psi,
        lambda_max=lam,
        passes=passes,
        exit_reason=reason,
        history=history,
    )


def apply_smoothing_step(s, A, b, x):
    """One relaxation ``x + omega G^T G (b - A x)``."""
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if b.shape[0] != A.shape[0] or x.shape[0] != A.shape[1] or s.G.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch between smoother, matrix and vectors")
    return x + s.apply_inverse(b - A @ x)
