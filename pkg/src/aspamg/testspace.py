"""Test space (near-null-space) generation.

Candidates are seeded from rigid body modes padded with random vectors and
improved by simultaneous Rayleigh quotient minimization with conjugate
gradients (SRQCG) on the FSAI-preconditioned operator ``S = G A G^T``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from aspamg.linalg import orthonormalize
from aspamg.smoother import compute_omega, estimate_lambda_max

__all__ = ["SrqcgConfig", "TestSpace", "seed_space", "srqcg", "orthonormalize_or_fill"]

log = logging.getLogger(__name__)


@dataclass
class SrqcgConfig:
    n_tv: int = 10
    k_max: int = 10
    k_ritz: int = 1
    residual_tol: float = 1e-2
    seed: int = 1234

    def __post_init__(self):
        if self.n_tv < 1:
            raise ValueError("n_tv must be >= 1")
        if self.k_ritz < 1:
            raise ValueError("k_ritz must be >= 1")
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")


@dataclass
class TestSpace:
    """Orthonormal test vectors, ordered by increasing Rayleigh quotient."""

    __test__ = False  # not a pytest class

    V: np.ndarray
    rayleigh: np.ndarray = None
    rayleigh_history: list = field(default_factory=list, repr=False)
    iterations: int = 0
    converged: bool = False
    replaced: int = 0

    @property
    def n_tv(self):
        return self.V.shape[1]


def seed_space(rbms, n_tv, n, seed=1234):
    """Initial block ``[rbms | uniform(-1, 1) columns]`` of width ``n_tv``."""
    rng = np.random.default_rng(seed)
    if rbms is None:
        return rng.uniform(-1.0, 1.0, (n, n_tv))
    rbms = np.asarray(rbms, dtype=np.float64)
    if rbms.ndim == 1:
        rbms = rbms[:, None]
    if rbms.shape[0] != n:
        raise ValueError(f"rbms have {rbms.shape[0]} rows, expected {n}")
    m = rbms.shape[1]
    if n_tv < m:
        raise ValueError(f"n_tv={n_tv} is smaller than the {m} supplied rigid body modes")
    return np.hstack([rbms, rng.uniform(-1.0, 1.0, (n, n_tv - m))])


def orthonormalize_or_fill(Z, rng, drop_tol=1e-12):
    """Orthonormalize columns, replacing lost ones by fresh random vectors.

    Returns the block and the number of replaced columns.
    """
    n, m = Z.shape
    Q, kept = orthonormalize(Z, drop_tol)
    attempts = 0
    while Q.shape[1] < min(m, n) and attempts < 10 * m:
        extra = rng.uniform(-1.0, 1.0, (n, m - Q.shape[1]))
        Q, _ = orthonormalize(np.hstack([Q, extra]), drop_tol)
        attempts += 1
    replaced = m - len(kept)
    return Q, replaced


class _Operator:
    """``S = G A G^T`` as a callable on vectors or blocks."""

    def __init__(self, A, G):
        self.A = A
        self.G = G
        self.GT = G.T.tocsr()
        self.matvecs = 0

    def __call__(self, X):
        self.matvecs += 1 if X.ndim == 1 else X.shape[1]
        return self.G @ (self.A @ (self.GT @ X))


def _line_search_2d(S, z, sz, r):
    """Exact minimization of the Rayleigh quotient on span{z, r}."""
    nr = np.linalg.norm(r)
    if nr == 0.0:
        return z, sz
    B = np.column_stack([z, r / nr])
    SB = np.column_stack([sz, S(r / nr)])
    H = B.T @ SB
    M = B.T @ B
    try:
        w, U = la.eigh((H + H.T) / 2, M)
    except la.LinAlgError:
        return z, sz
    u = U[:, 0]
    return B @ u, SB @ u


def srqcg(A, G, V0, cfg=None, omega=None):
    """Simultaneous Rayleigh quotient minimization by conjugate gradients.

    Parameters
    ----------
    A : csr_matrix
        SPD system matrix.
    G : csr_matrix
        aFSAI factor of ``A``; the iteration runs on ``S = G A G^T``.
    V0 : ndarray, shape (n, n_tv)
        Initial candidates in the original variables (for instance rigid
        body modes padded with random columns).
    cfg : SrqcgConfig
    omega : float, optional
        Damping of the initial smoothing step ``Z0 = (I - omega S) V0``;
        estimated from the largest eigenvalue of ``S`` when omitted.

    Returns
    -------
    TestSpace
        ``V = G^T Z`` with orthonormal columns, ordered by increasing
        Rayleigh quotient of ``S``.
    """
    cfg = cfg or SrqcgConfig()
    A = sp.csr_matrix(A)
    G = sp.csr_matrix(G)
    n = A.shape[0]
    V0 = np.asarray(V0, dtype=np.float64)
    if V0.ndim == 1:
        V0 = V0[:, None]
    if V0.shape[0] != n:
        raise ValueError(f"V0 has {V0.shape[0]} rows, expected {n}")
    rng = np.random.default_rng(cfg.seed + 1)
    S = _Operator(A, G)
    replaced = 0

    # candidates live in the transformed variables z = G^{-T} v
    Z = spsolve_triangular(G.T.tocsr(), V0, lower=False)
    if Z.ndim == 1:
        Z = Z[:, None]
    if omega is None:
        omega = compute_omega(estimate_lambda_max(G, A))
    # damped, so an eigenvalue of S equal to 1 does not wipe out its direction
    Z = Z - omega * S(Z)
    Z, nrep = orthonormalize_or_fill(Z, rng)
    replaced += nrep
    nt = Z.shape[1]

    SZ = S(Z)
    q = np.einsum("ij,ij->j", Z, SZ)
    R = SZ - Z * q
    P = 2.0 * R
    f = np.ones(nt)
    history = [[] for _ in range(nt)]

    def converged():
        res = np.linalg.norm(R, axis=0)
        return bool(np.all(res <= cfg.residual_tol * np.abs(q)))

    done = converged()
    k = 0
    while not done and k < cfg.k_max:
        k += 1
        if k % cfg.k_ritz == 0:
            Z, nrep = orthonormalize_or_fill(Z, rng)
            replaced += nrep
            SZ = S(Z)
            H = Z.T @ SZ
            lam, U = np.linalg.eigh((H + H.T) / 2)
            Z = Z @ U
            SZ = SZ @ U
            f = np.einsum("ij,ij->j", Z, Z)
            q = np.einsum("ij,ij->j", Z, SZ) / f
            R = SZ - Z * q
        for i in range(nt):
            z, sz, p = Z[:, i], SZ[:, i], P[:, i]
            sp_i = S(p)
            a = p @ sz
            b = p @ sp_i
            c = p @ z
            d = p @ p
            e = z @ sz
            fi = z @ z
            q_before = e / fi
            den = b * c - a * d
            disc = (d * e - b * fi) ** 2 - 4.0 * den * (a * fi - c * e)
            z_new = None
            if disc >= 0.0 and abs(den) >= 1e-300 and b > 0.0:
                alpha = (d * e - b * fi + np.sqrt(disc)) / (2.0 * den)
                z_new = z + alpha * p
                sz_new = sz + alpha * sp_i
                q_new = (z_new @ sz_new) / (z_new @ z_new)
                if not np.isfinite(q_new) or q_new > q_before + 1e-12 * abs(q_before):
                    z_new = None
            if z_new is None:
                # steepest descent with exact line search
                z_new, sz_new = _line_search_2d(S, z, sz, R[:, i])
            scale = np.linalg.norm(z_new)
            z_new = z_new / scale
            sz_new = sz_new / scale
            fi = 1.0
            qi = z_new @ sz_new
            r = sz_new - qi * z_new
            grad = 2.0 * r / fi
            beta = -(grad @ sp_i) / b if b > 0.0 else 0.0
            P[:, i] = grad + beta * p
            Z[:, i], SZ[:, i], R[:, i] = z_new, sz_new, r
            q[i], f[i] = qi, fi
            history[i].append((q_before, qi))
        done = converged()

    order = np.argsort(q, kind="stable")
    Z = Z[:, order]
    q = q[order]
    history = [history[j] for j in order]
    V = G.T @ Z
    V, nrep = orthonormalize_or_fill(V, rng)
    replaced += nrep
    if replaced:
        log.warning("SRQCG replaced %d collapsed test vectors with random ones", replaced)
    log.debug("SRQCG: %d iterations, %d operator applications, converged=%s", k, S.matvecs, done)
    return TestSpace(
        V=V,
        rayleigh=q,
        rayleigh_history=history,
        iterations=k,
        converged=done,
        replaced=replaced,
    )
