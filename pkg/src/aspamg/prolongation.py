"""Dynamic-pattern least-squares (DPLS) prolongation.

For every fine node the interpolatory coarse set is grown greedily: the
candidate whose (Householder-transformed) test row is most aligned with the
current least-squares residual is added next, and the QR factorization of
the selected rows is updated by one reflection. Growth stops on residual
tolerance, on the condition-number guard, on the ``n_max`` cap, or when the
candidates reachable within ``d_p`` hops are used up.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular

__all__ = [
    "DplsConfig",
    "Prolongation",
    "RowFit",
    "dpls_row",
    "dpls_build",
    "interpolation_residual",
    "reachable_coarse",
]

TOLERANCE = "tolerance"
CONDITION = "condition"
EXHAUSTED = "distance-exhausted"
NMAX = "n_max"

# a residual this small relative to |v_i| counts as an exact fit for any eps_p
_EXACT_FIT = 1e-12


@dataclass
class DplsConfig:
    d_p: int = 2
    eps_p: float = 1e-2
    kappa_p: float = 50.0
    n_max: int = 5

    def __post_init__(self):
        if self.d_p < 1:
            raise ValueError("d_p must be >= 1")
        if not self.kappa_p > 1:
            raise ValueError("kappa_p must be > 1")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.eps_p < 0:
            raise ValueError("eps_p must be >= 0")


@dataclass
class RowFit:
    """Outcome of the greedy fit for one fine node."""

    selected: list
    weights: np.ndarray
    reason: str
    residuals: list = field(default_factory=list)
    r_diag: list = field(default_factory=list)


@dataclass
class Prolongation:
    P: sp.csr_matrix
    stop_reason: np.ndarray  # per node; "coarse" on coarse nodes
    empty_rows: np.ndarray  # fine nodes without interpolatory coarse nodes

    def reason_counts(self):
        keys, counts = np.unique(self.stop_reason, return_counts=True)
        return dict(zip(keys.tolist(), counts.tolist()))


def _householder(x):
    """Vector ``u`` and value ``beta`` with ``(I - 2uu^T/u^Tu) x = beta e_1``."""
    norm = np.linalg.norm(x)
    sign = 1.0 if x[0] >= 0.0 else -1.0
    u = x.copy()
    u[0] += sign * norm
    return u, -sign * norm


def _reflect(u, X):
    uu = u @ u
    if uu == 0.0:
        return X
    return X - np.outer(u, (u @ X) * (2.0 / uu)) if X.ndim == 2 else X - u * (2.0 * (u @ X) / uu)


def dpls_row(v, C, cfg):
    """Greedy least-squares fit of ``v`` by columns of ``C``.

    Parameters
    ----------
    v : ndarray, shape (n_tv,)
        Test row of the fine node.
    C : ndarray, shape (n_tv, m)
        Test rows of the candidate coarse nodes, one per column, in
        ascending node order.
    cfg : DplsConfig

    Returns
    -------
    RowFit
        ``selected`` holds column indices of ``C`` in selection order.
    """
    v = np.asarray(v, dtype=np.float64)
    ntv = v.shape[0]
    m = C.shape[1]
    norm_v = np.linalg.norm(v)
    if m == 0:
        return RowFit([], np.zeros(0), EXHAUSTED, [norm_v])
    if norm_v == 0.0:
        return RowFit([], np.zeros(0), TOLERANCE, [0.0])
    W = np.array(C, dtype=np.float64, copy=True)
    r = v.copy()
    avail = list(range(m))
    selected = []
    R = np.zeros((ntv, min(ntv, m)))
    diag = []
    residuals = [norm_v]
    reason = EXHAUSTED
    k = 0
    while avail and k < ntv:
        rt = r[k:]
        Wt = W[k:, avail]
        num = (rt @ Wt) ** 2
        den = (rt @ rt) * np.einsum("ij,ij->j", Wt, Wt)
        aff = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
        pick = int(np.argmax(aff))
        jbar = avail[pick]
        u, rkk = _householder(W[k:, jbar])
        absd = [abs(d) for d in diag] + [abs(rkk)]
        if rkk == 0.0 or max(absd) / min(absd) > cfg.kappa_p:
            reason = CONDITION
            break
        R[:k, k] = W[:k, jbar]
        R[k, k] = rkk
        diag.append(rkk)
        avail.pop(pick)
        if avail:
            W[k:, avail] = _reflect(u, W[k:, avail])
        r[k:] = _reflect(u, r[k:])
        selected.append(jbar)
        k += 1
        res = np.linalg.norm(r[k:])
        residuals.append(res)
        if res <= max(cfg.eps_p, _EXACT_FIT) * norm_v:
            reason = TOLERANCE
            break
        if k >= cfg.n_max:
            reason = NMAX
            break
    else:
        if k >= ntv:
            reason = TOLERANCE
    if k == 0:
        return RowFit([], np.zeros(0), reason, residuals, diag)
    w = solve_triangular(R[:k, :k], r[:k], lower=False, check_finite=False)
    return RowFit(selected, w, reason, residuals, diag)


def reachable_coarse(graph, split, i, d_p):
    """Coarse nodes within ``d_p`` hops of ``i`` in the filtered graph, ascending."""
    seen = {i}
    frontier = [i]
    for _ in range(d_p):
        nxt = []
        for p in frontier:
            for j in graph.neighbors(p):
                j = int(j)
                if j not in seen:
                    seen.add(j)
                    nxt.append(j)
        frontier = nxt
        if not frontier:
            break
    seen.discard(i)
    return sorted(j for j in seen if split.coarse_index[j] >= 0)


def dpls_build(soc, split, V, cfg=None):
    """Assemble the prolongation ``P`` (fine x coarse) for a C/F split."""
    cfg = cfg or DplsConfig()
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    n = soc.n
    if V.shape[0] != n:
        raise ValueError(f"V has {V.shape[0]} rows, expected {n}")
    reasons = np.empty(n, dtype=object)
    rows, cols, vals = [], [], []
    empty = []
    for c in split.coarse:
        rows.append(int(c))
        cols.append(int(split.coarse_index[c]))
        vals.append(1.0)
        reasons[c] = "coarse"
    for i in split.fine:
        J = reachable_coarse(soc, split, int(i), cfg.d_p)
        fit = dpls_row(V[i], V[J].T if J else np.zeros((V.shape[1], 0)), cfg)
        reasons[i] = fit.reason
        if not fit.selected:
            empty.append(int(i))
        for jloc, w in zip(fit.selected, fit.weights):
            rows.append(int(i))
            cols.append(int(split.coarse_index[J[jloc]]))
            vals.append(float(w))
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, split.n_coarse))
    P.sort_indices()
    return Prolongation(P, reasons.astype(str), np.asarray(empty, dtype=np.intp))


def interpolation_residual(V, i, J, w):
    """``|v_i - sum_j w_j v_j|_2`` over the test rows of ``V``."""
    V = np.asarray(V, dtype=np.float64)
    J = list(J)
    w = np.asarray(w, dtype=np.float64)
    if len(J) != w.shape[0]:
        raise ValueError(f"{len(J)} indices but {w.shape[0]} weights")
    r = V[i].copy()
    if J:
        r -= V[J].T @ w
    return float(np.linalg.norm(r))
