"""Damping study: how a smaller smoother damping factor degrades the cycle.

The smoother's preconditioned operator ``G A G^T`` is shifted by
``alpha U U^T`` on its ``k`` largest eigenpairs. This keeps the eigenvectors
(and hence the rest of the hierarchy) but forces the damping factor down to
``2 omega / (2 + alpha omega)``.
"""
import copy
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from aspamg.hierarchy import HierarchyConfig, amg_setup, stationary_solve, vcycle_apply
from aspamg.krylov import power_spectral_radius
from aspamg.sparse import lower_triangular_solve_transposed

__all__ = [
    "LowRankUpdate",
    "LanczosConvergenceError",
    "build_lowrank_update",
    "omega_alpha",
    "apply_updated_smoother",
    "UpdatedSmoother",
    "damping_experiment",
]


class LanczosConvergenceError(RuntimeError):
    def __init__(self, residuals):
        self.residuals = np.asarray(residuals)
        super().__init__(f"eigenpairs not converged; relative residuals {self.residuals}")


@dataclass
class LowRankUpdate:
    U: np.ndarray
    alpha: float
    eigenvalues: np.ndarray

    @property
    def k(self):
        return self.U.shape[1]


def _lanczos_top(op, n, k, tol, seed, max_steps=None):
    """Top ``k`` eigenpairs of a symmetric operator, fully reorthogonalized Lanczos."""
    rng = np.random.default_rng(seed)
    max_steps = n if max_steps is None else min(max_steps, n)
    Q = np.zeros((n, max_steps + 1))
    q = rng.uniform(-1.0, 1.0, n)
    Q[:, 0] = q / np.linalg.norm(q)
    alphas, betas = [], []
    m = 0
    rel = np.full(k, np.inf)
    while m < max_steps:
        w = op(Q[:, m])
        a = Q[:, m] @ w
        w -= Q[:, : m + 1] @ (Q[:, : m + 1].T @ w)
        w -= Q[:, : m + 1] @ (Q[:, : m + 1].T @ w)
        alphas.append(a)
        m += 1
        b = np.linalg.norm(w)
        if m >= k and (m % 5 == 0 or m == max_steps or b < 1e-12):
            T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
            theta, S = np.linalg.eigh(T)
            theta, S = theta[::-1][:k], S[:, ::-1][:, :k]
            rel = b * np.abs(S[-1, :]) / np.maximum(np.abs(theta), 1e-300)
            if np.all(rel <= tol) or b < 1e-12 or m == max_steps:
                U = Q[:, :m] @ S
                return theta, U, rel
        if b < 1e-12:
            # invariant subspace found before k vectors: restart direction
            q = rng.uniform(-1.0, 1.0, n)
            q -= Q[:, :m] @ (Q[:, :m].T @ q)
            b_new = np.linalg.norm(q)
            Q[:, m] = q / b_new
            betas.append(0.0)
            continue
        betas.append(b)
        Q[:, m] = w / b
    T = np.diag(alphas) + np.diag(betas[: m - 1], 1) + np.diag(betas[: m - 1], -1)
    theta, S = np.linalg.eigh(T)
    return theta[::-1][:k], Q[:, :m] @ S[:, ::-1][:, :k], rel


def build_lowrank_update(G, A, k, alpha=1.0, tol=1e-6, seed=1234):
    """``k`` dominant eigenvectors of ``G A G^T`` for the shift ``alpha U U^T``."""
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    GT = G.T.tocsr()

    def op(x):
        return G @ (A @ (GT @ x))

    lam, U, _ = _lanczos_top(op, n, k, tol * 0.1, seed)
    U, _r = np.linalg.qr(U)
    U = U * np.sign(np.diag(_r))
    SU = np.column_stack([op(U[:, j]) for j in range(k)])
    lam = np.einsum("ij,ij->j", U, SU)
    res = np.linalg.norm(SU - U * lam, axis=0) / np.maximum(np.linalg.norm(U * lam, axis=0), 1e-300)
    if np.any(res > tol):
        raise LanczosConvergenceError(res)
    return LowRankUpdate(U, float(alpha), lam)


def omega_alpha(omega, alpha):
    """Largest admissible damping after the shift: ``2 omega / (2 + alpha omega)``."""
    if not 0.0 < omega <= 1.0:
        raise ValueError("omega must lie in (0, 1]")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return 2.0 * omega / (2.0 + alpha * omega)


def apply_updated_smoother(G, A, upd, x):
    """Undamped updated smoother ``x - G^T G A x - alpha G^T U U^T G^{-T} x``."""
    x = np.asarray(x, dtype=np.float64)
    y = x - G.T @ (G @ (A @ x))
    if upd.alpha != 0.0:
        z = lower_triangular_solve_transposed(G, x)
        y -= upd.alpha * (G.T @ (upd.U @ (upd.U.T @ z)))
    return y


@dataclass
class UpdatedSmoother:
    """Damped smoother with approximate inverse ``G^T G + alpha G^T U L^{-1} U^T G``.

    For exact eigenpairs ``G A G^T U = U L`` this equals the updated operator
    ``G^T G + alpha G^T U U^T G^{-T} A^{-1}`` and needs no solve with ``A``.
    """

    G: sp.csr_matrix
    update: LowRankUpdate
    omega: float

    def apply_inverse(self, r):
        g = self.G @ r
        upd = self.update
        corr = upd.U @ ((upd.U.T @ g) / upd.eigenvalues)
        return self.omega * (self.G.T @ (g + upd.alpha * corr))


def _error_operator(h):
    A = h.levels[0].A

    def apply(x):
        return x - vcycle_apply(h, A @ x)

    return apply


def damping_experiment(problem, cfg=None, k=10, alpha=5.0, tol=1e-8, maxit=5000,
                       power_steps=200, seed=1234, hierarchy=None):
    """Stationary AMG with the original and the low-rank-shifted finest smoother.

    Both runs share one hierarchy; only the finest-level smoother differs.
    Returns a JSON-ready dict.
    """
    t0 = time.perf_counter()
    cfg = cfg or HierarchyConfig()
    A = problem.stiffness
    h = hierarchy if hierarchy is not None else amg_setup(A, problem.free_coordinates, cfg)
    if h.n_levels < 2:
        raise ValueError("damping experiment needs at least two levels")
    base = h.levels[0].smoother
    upd = build_lowrank_update(base.G, A, k, alpha, seed=seed)
    w_alpha = omega_alpha(base.omega, alpha)
    h_upd = copy.copy(h)
    h_upd.levels = list(h.levels)
    h_upd.levels[0] = copy.copy(h.levels[0])
    h_upd.levels[0].smoother = UpdatedSmoother(base.G, upd, w_alpha)

    b = np.ones(A.shape[0])
    n = A.shape[0]
    runs = {}
    for name, hh in (("baseline", h), ("updated", h_upd)):
        _, its, conv, hist = stationary_solve(hh, b, tol, maxit)
        rho = power_spectral_radius(_error_operator(hh), n, power_steps, seed)
        tail = np.asarray(hist[-min(len(hist), 11):])
        rate = float((tail[-1] / tail[0]) ** (1.0 / (len(tail) - 1))) if len(tail) > 1 else 0.0
        runs[name] = {
            "iterations": its,
            "converged": conv,
            "spectral_radius": rho,
            "asymptotic_rate": rate,
        }
    return {
        "n": n,
        "nnz": int(A.nnz),
        "levels": h.n_levels,
        "k": k,
        "alpha": alpha,
        "omega": base.omega,
        "omega_alpha": w_alpha,
        "shifted_eigenvalues": upd.eigenvalues.tolist(),
        "baseline": runs["baseline"],
        "updated": runs["updated"],
        "seconds": time.perf_counter() - t0,
    }
