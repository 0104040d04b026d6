import numpy as np
import pytest
import scipy.sparse as sp

from aspamg.smoother import afsai_build
from aspamg.testspace import SrqcgConfig, orthonormalize_or_fill, seed_space, srqcg


class TestSeedSpace:
    def test_rbms_only(self):
        B = np.random.default_rng(0).standard_normal((20, 6))
        assert np.array_equal(seed_space(B, 6, 20), B)

    def test_random_reproducible(self):
        V1 = seed_space(None, 10, 30, seed=5)
        V2 = seed_space(None, 10, 30, seed=5)
        assert V1.shape == (30, 10) and V1.tobytes() == V2.tobytes()
        assert np.all(np.abs(V1) <= 1.0)

    def test_padding(self):
        B = np.ones((12, 6))
        V = seed_space(B, 10, 12, seed=3)
        assert np.array_equal(V[:, :6], B)
        assert V.tobytes() == seed_space(B, 10, 12, seed=3).tobytes()

    def test_too_narrow(self):
        with pytest.raises(ValueError):
            seed_space(np.ones((5, 6)), 4, 5)


def test_orthonormalize_or_fill_replaces_collapsed():
    Z = np.ones((8, 3))
    Q, replaced = orthonormalize_or_fill(Z, np.random.default_rng(0))
    assert Q.shape == (8, 3) and replaced == 2
    assert np.allclose(Q.T @ Q, np.eye(3), atol=1e-12)


def diag_problem():
    A = sp.diags(np.arange(1.0, 11.0)).tocsr()
    return A, sp.identity(10, format="csr")


def test_smallest_eigenvalues():
    A, G = diag_problem()
    V0 = seed_space(None, 2, 10, seed=1)
    ts = srqcg(A, G, V0, SrqcgConfig(n_tv=2, k_max=50, residual_tol=1e-8))
    assert np.allclose(ts.rayleigh, [1.0, 2.0], atol=1e-6)
    assert np.allclose(ts.V.T @ ts.V, np.eye(2), atol=1e-12)


def test_per_vector_monotonicity():
    A, G = diag_problem()
    ts = srqcg(A, G, seed_space(None, 3, 10, seed=2), SrqcgConfig(n_tv=3, k_max=30, residual_tol=0))
    for hist in ts.rayleigh_history:
        for before, after in hist:
            assert after <= before + 1e-12 * abs(before)


def test_monotonicity_after_ritz(cube3):
    A = cube3.stiffness
    G = afsai_build(A)
    cfg = SrqcgConfig(n_tv=6, k_max=1, k_ritz=1, residual_tol=0)
    ts = srqcg(A, G, seed_space(None, 6, A.shape[0], seed=4), cfg)
    assert ts.iterations == 1
    for hist in ts.rayleigh_history:
        (before, after), = hist
        assert after <= before * (1 + 1e-12)


def test_eigenvector_input_converged():
    A, G = diag_problem()
    V0 = np.eye(10)[:, :2]
    ts = srqcg(A, G, V0, SrqcgConfig(n_tv=2))
    assert ts.iterations == 0 and ts.converged
    # V spans G^T V0 = span{e0, e1}
    assert np.linalg.norm(ts.V[2:]) <= 1e-12
    assert np.allclose(ts.rayleigh, [1.0, 2.0], rtol=1e-14)


def test_ascending_order(cube3):
    A = cube3.stiffness
    G = afsai_build(A)
    ts = srqcg(A, G, seed_space(None, 8, A.shape[0]), SrqcgConfig(n_tv=8))
    assert np.all(np.diff(ts.rayleigh) >= 0)
    assert ts.V.shape == (A.shape[0], 8)


def test_row_mismatch():
    A, G = diag_problem()
    with pytest.raises(ValueError):
        srqcg(A, G, np.ones((9, 2)))
