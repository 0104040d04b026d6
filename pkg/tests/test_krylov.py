import numpy as np
import pytest
import scipy.sparse as sp

from aspamg.hierarchy import vcycle_apply
from aspamg.krylov import NotSPDOperatorError, SolveReport, pcg, power_spectral_radius

from conftest import random_spd


def test_identity_one_iteration():
    b = np.array([1.0, -2.0, 3.0])
    x, rep = pcg(sp.identity(3, format="csr"), b)
    assert rep.iterations == 1 and rep.converged and np.allclose(x, b)


def test_exact_preconditioner():
    A = random_spd(50, seed=4)
    Ainv = np.linalg.inv(A.toarray())
    _, rep = pcg(A, np.ones(50), Ainv)
    assert rep.converged and rep.iterations <= 2


def test_diagonal_closed_form():
    d = np.arange(1.0, 21.0)
    b = np.random.default_rng(0).standard_normal(20)
    x, rep = pcg(sp.diags(d).tocsr(), b)
    assert rep.converged and rep.iterations <= 20
    assert np.allclose(x, b / d, rtol=0, atol=1e-8 * np.abs(b / d).max())


def test_history_length_and_energy_monotone():
    A = random_spd(80, seed=8, density=0.05)
    Ainv = np.linalg.inv(A.toarray())
    b = np.random.default_rng(1).standard_normal(80)
    def precond(r):
        return r / A.diagonal()

    x, rep = pcg(A, b, precond)
    assert rep.iterations == len(rep.residual_history)
    # recompute iterates by truncated runs and check the A^{-1}-norm of r_k
    norms = []
    for k in range(1, rep.iterations + 1):
        xk, _ = pcg(A, b, precond, rel_tol=0.0, max_it=k)
        rk = b - A @ xk
        norms.append(rk @ Ainv @ rk)
    assert all(b2 <= a * (1 + 1e-10) + 1e-28 for a, b2 in zip(norms, norms[1:]))


def test_not_spd():
    A = sp.diags([1.0, -1.0]).tocsr()
    with pytest.raises(NotSPDOperatorError):
        pcg(A, np.array([1.0, 1.0]))


def test_nonconvergence_reported():
    A = sp.diags(np.arange(1.0, 101.0)).tocsr()
    _, rep = pcg(A, np.ones(100), max_it=3)
    assert not rep.converged and rep.iterations == 3


def test_zero_rhs():
    x, rep = pcg(sp.identity(4, format="csr"), np.zeros(4))
    assert rep.iterations == 0 and rep.converged and not x.any()


def test_amg_true_residual(hier4):
    A = hier4.levels[0].A
    b = np.ones(A.shape[0])
    x, rep = pcg(A, b, lambda r: vcycle_apply(hier4, r))
    assert rep.converged
    assert rep.true_residual <= 10 * 1e-8 * np.linalg.norm(b)


def test_report_dict():
    d = SolveReport(iterations=2, residual_history=[np.float64(1.0), 0.5]).as_dict()
    assert d["complexities"] == {"C_gd": 1.0, "C_op": 1.0, "C_fs": 0.0}
    assert set(d["timings"]) == {"T_ts", "T_cs", "T_sm", "T_pl", "T_rap", "T_p", "T_s", "T_t"}


class TestPower:
    def test_scaled_identity(self):
        assert power_spectral_radius(lambda x: 2 * x, 10) == pytest.approx(2.0, abs=1e-10)

    def test_zero(self):
        assert power_spectral_radius(lambda x: 0 * x, 10) == 0.0

    def test_dense_oracle(self):
        rng = np.random.default_rng(3)
        M = rng.standard_normal((30, 30))
        M = M + M.T
        ref = np.abs(np.linalg.eigvalsh(M)).max()
        assert power_spectral_radius(M, 30, steps=200) == pytest.approx(ref, rel=0.02)
