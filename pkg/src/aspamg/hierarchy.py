"""Multigrid hierarchy: recursive set-up, V-cycle and stationary iteration."""
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from aspamg.coarsening import CfSplit, affinity_soc, filter_soc, select_coarse_mis
from aspamg.fem import rigid_body_modes
from aspamg.linalg import orthonormalize
from aspamg.prolongation import DplsConfig, Prolongation, dpls_build
from aspamg.smoother import FsaiSmoother, SmootherConfig, smoother_setup
from aspamg.sparse import as_csr, galerkin_triple, is_symmetric
from aspamg.testspace import SrqcgConfig, TestSpace, seed_space, srqcg

__all__ = [
    "HierarchyConfig",
    "Level",
    "Hierarchy",
    "CoarseSolveError",
    "amg_setup",
    "vcycle_apply",
    "complexities",
    "stationary_solve",
]

log = logging.getLogger(__name__)

PHASES = ("T_ts", "T_cs", "T_sm", "T_pl", "T_rap")


class CoarseSolveError(np.linalg.LinAlgError):
    """Dense Cholesky of the coarsest matrix failed."""


@dataclass
class HierarchyConfig:
    max_levels: int = 10
    min_coarse_size: int = 100
    nu1: int = 1
    nu2: int = 1
    theta: int = 5
    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    srqcg: SrqcgConfig = field(default_factory=SrqcgConfig)
    dpls: DplsConfig = field(default_factory=DplsConfig)
    coarse_srqcg: bool = False

    def __post_init__(self):
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if self.nu1 < 0 or self.nu2 < 0 or self.nu1 + self.nu2 < 1:
            raise ValueError("need nu1, nu2 >= 0 and nu1 + nu2 >= 1")
        if self.theta < 1:
            raise ValueError("theta must be >= 1")


@dataclass
class Level:
    A: sp.csr_matrix
    smoother: FsaiSmoother = None
    P: Prolongation = None
    V: TestSpace = None
    split: CfSplit = None

    @property
    def n(self):
        return self.A.shape[0]


@dataclass
class Hierarchy:
    levels: list
    coarse_factor: tuple
    nu1: int = 1
    nu2: int = 1
    timings: dict = field(default_factory=dict)

    @property
    def n_levels(self):
        return len(self.levels)

    @property
    def A(self):
        return self.levels[0].A

    def complexities(self):
        return complexities(self)

    def aspreconditioner(self):
        """The V-cycle as a ``scipy.sparse.linalg.LinearOperator``."""
        from scipy.sparse.linalg import LinearOperator

        n = self.A.shape[0]
        return LinearOperator((n, n), matvec=lambda y: vcycle_apply(self, np.ravel(y)), dtype=float)


def _coarse_test_space(V, coarse):
    Vc, _ = orthonormalize(V[coarse])
    if Vc.shape[1] < V.shape[1]:
        log.info("injected test space lost rank: %d -> %d", V.shape[1], Vc.shape[1])
    return Vc


def _factorize(A, level):
    try:
        return la.cho_factor(A.toarray(), lower=True)
    except la.LinAlgError as exc:
        raise CoarseSolveError(f"coarsest matrix on level {level} is not SPD") from exc


def amg_setup(A, coordinates=None, cfg=None):
    """Build the adaptive AMG hierarchy of an SPD matrix.

    Parameters
    ----------
    A : sparse matrix
        SPD system matrix with full symmetric storage.
    coordinates : ndarray, shape (n/3, 3), optional
        Node coordinates for rigid-body-mode seeding of the test space
        (DOFs interleaved per node). Random seeding when omitted.
    cfg : HierarchyConfig
    """
    cfg = cfg or HierarchyConfig()
    A = as_csr(A)
    if not is_symmetric(A):
        raise ValueError("matrix is not symmetric")
    t = dict.fromkeys(PHASES, 0.0)
    levels = []
    Ak = A
    Vk = None
    while True:
        lvl = len(levels)
        n = Ak.shape[0]
        if n <= cfg.min_coarse_size or lvl == cfg.max_levels - 1:
            levels.append(Level(Ak))
            break

        t0 = time.perf_counter()
        smo = smoother_setup(Ak, cfg.smoother)
        t["T_sm"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        if lvl == 0:
            rbms = None
            if coordinates is not None:
                coords = np.asarray(coordinates, dtype=np.float64)
                if 3 * coords.shape[0] != n:
                    raise ValueError(f"{coords.shape[0]} nodes do not match {n} DOFs")
                rbms = rigid_body_modes(coords)[:, : cfg.srqcg.n_tv]
            V0 = seed_space(rbms, cfg.srqcg.n_tv, n, cfg.srqcg.seed)
            ts = srqcg(Ak, smo.G, V0, cfg.srqcg, smo.omega)
        elif cfg.coarse_srqcg:
            ts = srqcg(Ak, smo.G, Vk, cfg.srqcg, smo.omega)
        else:
            ts = TestSpace(Vk)
        t["T_ts"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        soc = affinity_soc(Ak, ts.V)
        graph = filter_soc(soc, cfg.theta)
        split = select_coarse_mis(graph)
        t["T_cs"] += time.perf_counter() - t0
        if split.n_coarse == 0 or split.n_coarse >= n:
            log.info("coarsening stalled on level %d (n=%d)", lvl, n)
            levels.append(Level(Ak))
            break

        t0 = time.perf_counter()
        prol = dpls_build(graph, split, ts.V, cfg.dpls)
        t["T_pl"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        Ac = galerkin_triple(prol.P, Ak)
        t["T_rap"] += time.perf_counter() - t0

        levels.append(Level(Ak, smo, prol, ts, split))
        log.debug(
            "level %d: n=%d nnz=%d -> n_c=%d, G nnz_r=%.1f omega=%.3f, stops=%s",
            lvl, n, Ak.nnz, split.n_coarse, smo.density, smo.omega, prol.reason_counts(),
        )
        Vk = _coarse_test_space(ts.V, split.coarse)
        Ak = Ac

    factor = _factorize(levels[-1].A, len(levels) - 1)
    return Hierarchy(levels, factor, cfg.nu1, cfg.nu2, t)


def _cycle(h, k, y):
    lev = h.levels[k]
    if k == h.n_levels - 1:
        return la.cho_solve(h.coarse_factor, y)
    A, smo = lev.A, lev.smoother
    s = np.zeros_like(y)
    for _ in range(h.nu1):
        s = s + smo.apply_inverse(y - A @ s)
    r = y - A @ s
    P = lev.P.P
    s = s + P @ _cycle(h, k + 1, P.T @ r)
    for _ in range(h.nu2):
        s = s + smo.apply_inverse(y - A @ s)
    return s


def vcycle_apply(h, y):
    """Apply one V(nu1, nu2)-cycle to ``y`` starting from a zero guess."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (h.levels[0].n,):
        raise ValueError(f"dimension mismatch: expected ({h.levels[0].n},), got {y.shape}")
    return _cycle(h, 0, y)


def complexities(h):
    """Grid, operator and FSAI complexities ``(C_gd, C_op, C_fs)``."""
    n0 = h.levels[0].n
    nnz0 = h.levels[0].A.nnz
    c_gd = sum(lev.n for lev in h.levels) / n0
    c_op = sum(lev.A.nnz for lev in h.levels) / nnz0
    c_fs = sum(lev.smoother.G.nnz for lev in h.levels if lev.smoother is not None) / nnz0
    return c_gd, c_op, c_fs


def stationary_solve(h, b, tol=1e-8, maxit=1000, x0=None):
    """Multigrid as a stand-alone solver: ``x <- x + B^{-1}(b - A x)``.

    Returns ``(x, iterations, converged, residual_history)``.
    """
    A = h.levels[0].A
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    history = [np.linalg.norm(r)]
    it = 0
    while history[-1] > tol * bnorm and it < maxit:
        x = x + vcycle_apply(h, r)
        r = b - A @ x
        history.append(np.linalg.norm(r))
        it += 1
        if not np.isfinite(history[-1]):
            break
    return x, it, bool(history[-1] <= tol * bnorm), history
