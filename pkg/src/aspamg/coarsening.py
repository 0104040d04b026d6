"""Affinity-based strength of connection and MIS coarse-node selection."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["SocGraph", "CfSplit", "affinity_soc", "filter_soc", "select_coarse_mis"]


@dataclass
class SocGraph:
    """Filtered strength-of-connection graph (symmetric pattern, weights in [0, 1])."""

    weights: sp.csr_matrix
    theta: int

    @property
    def n(self):
        return self.weights.shape[0]

    def neighbors(self, i):
        W = self.weights
        return W.indices[W.indptr[i]:W.indptr[i + 1]]

    def degrees(self):
        return np.diff(self.weights.indptr)


@dataclass
class CfSplit:
    coarse: np.ndarray
    fine: np.ndarray
    coarse_index: np.ndarray  # fine-grid node -> coarse number, -1 on fine nodes

    @property
    def n_coarse(self):
        return len(self.coarse)

    def is_coarse(self, i):
        return self.coarse_index[i] >= 0


def affinity(u, v):
    """Squared cosine between two vectors, 0 if either is zero."""
    uu, vv = u @ u, v @ v
    if uu == 0.0 or vv == 0.0:
        return 0.0
    return (u @ v) ** 2 / (uu * vv)


def affinity_soc(A, V):
    """Affinity ``(v_i.v_j)^2 / (|v_i|^2 |v_j|^2)`` on the off-diagonal pattern of ``A``."""
    A = sp.csr_matrix(A)
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    n = A.shape[0]
    if V.shape[0] != n:
        raise ValueError(f"V has {V.shape[0]} rows, expected {n}")
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    cols = A.indices
    off = rows != cols
    rows, cols = rows[off], cols[off]
    norms = np.einsum("ij,ij->i", V, V)
    dots = np.einsum("ij,ij->i", V[rows], V[cols])
    den = norms[rows] * norms[cols]
    vals = np.zeros_like(dots)
    nz = den > 0.0
    vals[nz] = dots[nz] ** 2 / den[nz]
    soc = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    soc.sort_indices()
    return soc


def filter_soc(soc, theta):
    """Keep the ``theta`` strongest connections per row, then symmetrize by union.

    Ties are broken in favour of the smaller column index.
    """
    if theta < 1:
        raise ValueError("theta must be >= 1")
    soc = sp.csr_matrix(soc)
    n = soc.shape[0]
    keep_rows, keep_cols = [], []
    for i in range(n):
        lo, hi = soc.indptr[i], soc.indptr[i + 1]
        cols = soc.indices[lo:hi]
        vals = soc.data[lo:hi]
        off = cols != i
        cols, vals = cols[off], vals[off]
        if len(cols) == 0:
            continue
        order = np.lexsort((cols, -vals))[:theta]
        keep_cols.append(cols[order])
        keep_rows.append(np.full(len(order), i))
    if keep_rows:
        r = np.concatenate(keep_rows)
        c = np.concatenate(keep_cols)
    else:
        r = c = np.empty(0, dtype=np.intp)
    mask = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
    mask = ((mask + mask.T) > 0).astype(np.float64).tocsr()
    mask.sort_indices()
    # values gathered by position so that zero-affinity edges stay in the graph
    W = sp.csr_matrix((_gather(soc, mask), mask.indices.copy(), mask.indptr.copy()), shape=(n, n))
    W.sort_indices()
    return SocGraph(W, int(theta))


def _gather(soc, mask):
    """Values of ``soc`` at every stored position of ``mask``."""
    mask = mask.tocsr()
    mask.sort_indices()
    out = np.zeros(mask.nnz)
    for i in range(mask.shape[0]):
        lo, hi = mask.indptr[i], mask.indptr[i + 1]
        cols = mask.indices[lo:hi]
        slo, shi = soc.indptr[i], soc.indptr[i + 1]
        scols = soc.indices[slo:shi]
        loc = np.searchsorted(scols, cols)
        ok = (loc < len(scols))
        ok[ok] &= scols[loc[ok]] == cols[ok]
        out[lo:hi][ok] = soc.data[slo:shi][loc[ok]]
    return out


def select_coarse_mis(g):
    """Greedy maximal independent set, highest filtered degree first.

    Ties are visited in ascending index order; isolated nodes become coarse.
    """
    n = g.n
    deg = g.degrees()
    order = np.lexsort((np.arange(n), -deg))
    state = np.zeros(n, dtype=np.int8)  # 0 undecided, 1 coarse, -1 fine
    W = g.weights
    for i in order:
        if state[i] != 0:
            continue
        state[i] = 1
        nbrs = W.indices[W.indptr[i]:W.indptr[i + 1]]
        nbrs = nbrs[nbrs != i]
        state[nbrs[state[nbrs] == 0]] = -1
    coarse = np.flatnonzero(state == 1)
    fine = np.flatnonzero(state == -1)
    cidx = np.full(n, -1, dtype=np.intp)
    cidx[coarse] = np.arange(len(coarse))
    return CfSplit(coarse, fine, cidx)
