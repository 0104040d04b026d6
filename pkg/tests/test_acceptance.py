"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import itertools
import time

import numpy as np
import pytest
import scipy.sparse as sp

from aspamg.cli import solve_system
from aspamg.coarsening import affinity_soc, filter_soc, select_coarse_mis
from aspamg.diagnostics import damping_experiment, omega_alpha
from aspamg.fem import (
    Material,
    assemble_hex_cube,
    mesh_quality_tet,
    raw_rigid_body_modes,
    two_material_field,
)
from aspamg.fileio import SolverConfig, parse_config
from aspamg.hierarchy import Hierarchy, HierarchyConfig, Level, amg_setup, complexities, vcycle_apply
from aspamg.krylov import power_spectral_radius
from aspamg.linalg import kaporin_number
from aspamg.prolongation import DplsConfig, dpls_row
from aspamg.smoother import FsaiSmoother, SmootherConfig, smoother_setup
from aspamg.sparse import galerkin_triple
from aspamg.testspace import SrqcgConfig, seed_space, srqcg

from conftest import random_spd


def verdict(capsys, number, title, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"AC-{number:02d} {'PASS' if ok else 'FAIL'}  {title}: {detail} [{elapsed:.3g} s < {budget:g} s]"
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def default_runs():
    """PCG solves with default parameters on 4^3, 8^3 and 12^3 element cubes."""
    t0 = time.perf_counter()
    runs = {}
    for m in (4, 8, 12):
        p = assemble_hex_cube(m, m, m)
        _, rep = solve_system(p.stiffness, p.free_coordinates, SolverConfig(), f"cube{m}")
        runs[m] = rep
    return runs, time.perf_counter() - t0


def test_ac01_default_parameters(capsys):
    t0 = time.perf_counter()
    cfg = parse_config("")
    got = (cfg.k_g, cfg.rho_g, cfg.eps_g, cfg.n_tv, cfg.n_rq, cfg.theta, cfg.n_max, cfg.kappa_p)
    want = (4, 4, 1e-3, 10, 10, 5, 5, 50)
    counts = (cfg.k_g, cfg.rho_g, cfg.n_tv, cfg.n_rq, cfg.theta, cfg.n_max)
    ok = got == want and all(type(c) is int for c in counts)
    verdict(capsys, 1, "default parameters", ok, f"{got}", time.perf_counter() - t0, 1.0)


def test_ac02_omega_alpha(capsys):
    t0 = time.perf_counter()
    w = omega_alpha(0.922, 5)
    same = all(omega_alpha(om, 0) == om for om in (0.1, 0.5, 0.922, 1.0))
    elapsed = time.perf_counter() - t0
    verdict(capsys, 2, "damping identity", abs(w - 0.279) <= 5e-4 and same,
            f"omega_alpha(0.922, 5) = {w:.5f}, alpha=0 exact: {same}", elapsed, 1e-3)


def test_ac03_damping_study(capsys):
    t0 = time.perf_counter()
    problem = assemble_hex_cube(7, 7, 7)  # 8 nodes per edge
    out = damping_experiment(problem, k=10, alpha=5.0)
    elapsed = time.perf_counter() - t0
    base, upd = out["baseline"], out["updated"]
    ratio = upd["iterations"] / base["iterations"]
    ok = (base["converged"] and upd["converged"] and ratio >= 1.5
          and upd["spectral_radius"] > base["spectral_radius"])
    detail = (f"n={out['n']}, iterations {base['iterations']} -> {upd['iterations']} (x{ratio:.2f}), "
              f"radius {base['spectral_radius']:.3f} -> {upd['spectral_radius']:.3f}")
    verdict(capsys, 3, "low-rank damping study", ok, detail, elapsed, 60)


def test_ac04_end_to_end(capsys, default_runs):
    runs, elapsed = default_runs
    its = [runs[m]["n_it"] for m in (4, 8, 12)]
    conv = all(runs[m]["converged"] for m in (4, 8, 12))
    tol_ok = all(runs[m]["true_residual"] <= 10 * 1e-8 * np.sqrt(runs[m]["n"]) for m in (4, 8, 12))
    growth = its[2] / its[0]
    ok = conv and tol_ok and max(its) <= 120 and growth <= 2.0
    detail = f"iterations {its} (n = {[runs[m]['n'] for m in (4, 8, 12)]}), growth x{growth:.2f}"
    verdict(capsys, 4, "end-to-end PCG convergence", ok, detail, elapsed, 300)


def _generated_problems():
    yield "cube2", assemble_hex_cube(2, 2, 2)
    yield "cube3", assemble_hex_cube(3, 3, 3)
    yield "cube4", assemble_hex_cube(4, 4, 4)
    mats = two_material_field(4, 2, 2, Material(1.0, 0.3), Material(100.0, 0.3))
    yield "beam4x2x2", assemble_hex_cube(4, 2, 2, 1.0, mats)
    yield "soft4", assemble_hex_cube(4, 4, 4, material_field=[Material(1.0, 0.49)] * 64)


def test_ac05_smoother_validity(capsys):
    t0 = time.perf_counter()
    worst_diag, worst_rho, kap_ok, passes_seen = 0.0, 0.0, True, 0
    configs = [SmootherConfig(), SmootherConfig(k0=0, ki=1, rhoi=2, omega_bar=1.0, rho_bar=8.0)]
    for _, p in _generated_problems():
        A = p.stiffness
        for cfg in configs:
            s = smoother_setup(A, cfg, keep_history=True)
            G = s.G
            d = np.einsum("ij,ij->i", (G @ A).toarray(), G.toarray())
            worst_diag = max(worst_diag, np.abs(d - 1).max())
            rho = power_spectral_radius(lambda x: x - s.apply_inverse(A @ x), A.shape[0], 500)
            worst_rho = max(worst_rho, rho)
            if A.shape[0] <= 200 and len(s.history) > 1:
                passes_seen += len(s.history) - 1
                kap = [kaporin_number((H @ A @ H.T).toarray()) for H in s.history]
                kap_ok &= all(b <= a * (1 + 1e-12) for a, b in zip(kap, kap[1:]))
    elapsed = time.perf_counter() - t0
    ok = worst_diag <= 1e-12 and worst_rho <= 0.9999 and kap_ok and passes_seen > 0
    detail = (f"max |diag(GAG^T)-1| = {worst_diag:.1e}, max rho = {worst_rho:.4f}, "
              f"Kaporin non-increasing over {passes_seen} refinement passes: {kap_ok}")
    verdict(capsys, 5, "smoother validity", ok, detail, elapsed, 30)


def test_ac06_dpls_oracle(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    cfg = DplsConfig()
    worst_w, mono, guard, accepted = 0.0, True, True, 0
    for _ in range(200):
        m = int(rng.integers(1, 16))
        v = rng.standard_normal(10)
        C = rng.standard_normal((10, m))
        if rng.random() < 0.3:
            # near-dependent candidates exercise the condition guard
            C[:, -1] = C[:, 0] + 1e-3 * rng.standard_normal(10)
        fit = dpls_row(v, C, cfg)
        res = fit.residuals
        mono &= all(b <= a + 1e-12 * res[0] for a, b in zip(res, res[1:]))
        if fit.selected:
            accepted += 1
            Cs = C[:, fit.selected]
            ref = np.linalg.lstsq(Cs, v, rcond=None)[0]
            worst_w = max(worst_w, np.linalg.norm(fit.weights - ref) / np.linalg.norm(ref))
            d = np.abs(fit.r_diag)
            guard &= d.max() / d.min() <= cfg.kappa_p
    elapsed = time.perf_counter() - t0
    ok = worst_w <= 1e-8 and mono and guard and accepted > 0
    detail = (f"max relative weight error {worst_w:.1e}, residuals monotone: {mono}, "
              f"diag-ratio <= kappa_p on {accepted} accepted sets: {guard}")
    verdict(capsys, 6, "DPLS least-squares oracle", ok, detail, elapsed, 10)


def _random_graph(rng, n, p):
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
    r = [i for i, _ in edges] + [j for _, j in edges]
    c = [j for _, j in edges] + [i for i, _ in edges]
    return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))


def test_ac07_coarsening_invariants(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    indep = maximal = in_range = True
    for _ in range(100):
        n = int(rng.integers(2, 60))
        A = _random_graph(rng, n, float(rng.uniform(0.02, 0.5))) + sp.identity(n)
        V = rng.standard_normal((n, int(rng.integers(1, 11))))
        soc = affinity_soc(A, V)
        in_range &= bool(np.all(soc.data >= 0) and np.all(soc.data <= 1 + 1e-14))
        g = filter_soc(soc, int(rng.integers(1, 8)))
        split = select_coarse_mis(g)
        W = g.weights
        C = set(split.coarse.tolist())
        for i in range(n):
            nb = set(W.indices[W.indptr[i]:W.indptr[i + 1]].tolist()) - {i}
            if i in C:
                indep &= not (nb & C)
            else:
                maximal &= bool(nb & C)
    V = np.tile(rng.standard_normal(5), (4, 1))
    A = _random_graph(rng, 4, 1.0)
    ident = np.allclose(affinity_soc(A, V).data, 1.0, rtol=0, atol=1e-14)
    elapsed = time.perf_counter() - t0
    ok = indep and maximal and in_range and ident
    detail = f"independent {indep}, maximal {maximal}, affinity in [0, 1] {in_range}, identical rows -> 1 {ident}"
    verdict(capsys, 7, "coarsening invariants", ok, detail, elapsed, 10)


def _vcycle_spd(h, rng, trials=20):
    n = h.levels[0].n
    sym, pos = 0.0, True
    for _ in range(trials):
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        Bu, Bv = vcycle_apply(h, u), vcycle_apply(h, v)
        sym = max(sym, abs(Bu @ v - u @ Bv) / (np.linalg.norm(Bu) * np.linalg.norm(v)))
        pos &= bool(u @ Bu > 0)
    return sym, pos


def test_ac08_galerkin_and_vcycle(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    for t in range(50):
        n = int(rng.integers(5, 81))
        A = random_spd(n, density=float(rng.uniform(0.05, 0.3)), seed=t)
        P = sp.random(n, int(rng.integers(1, n + 1)), density=0.3, random_state=rng, format="csr")
        ref = P.toarray().T @ A.toarray() @ P.toarray()
        worst = max(worst, np.linalg.norm(galerkin_triple(P, A).toarray() - ref) / max(np.linalg.norm(ref), 1e-300))
    sym, pos = 0.0, True
    cube = assemble_hex_cube(4, 4, 4)
    hierarchies = [
        amg_setup(random_spd(60, density=0.05, seed=3), cfg=HierarchyConfig(min_coarse_size=10, max_levels=2)),
        amg_setup(cube.stiffness, cube.free_coordinates),
    ]
    for h in hierarchies:
        s, p = _vcycle_spd(h, rng)
        sym, pos = max(sym, s), pos and p
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and sym <= 1e-10 and pos and all(h.n_levels >= 2 for h in hierarchies)
    detail = f"max Galerkin rel. error {worst:.1e}, V-cycle asymmetry {sym:.1e}, positive {pos}"
    verdict(capsys, 8, "Galerkin oracle and V-cycle SPD", ok, detail, elapsed, 30)


def test_ac09_rbm_kernel(capsys):
    t0 = time.perf_counter()
    ratios = []
    for m in (2, 4, 8):
        p = assemble_hex_cube(m, m, m, clamped_face=None)
        K, B = p.stiffness, raw_rigid_body_modes(p.coordinates)
        knorm = np.abs(K).sum(axis=1).max()
        ratios.append(float((np.abs(K @ B).max(axis=0) / (knorm * np.abs(B).max(axis=0))).max()))
    elapsed = time.perf_counter() - t0
    verdict(capsys, 9, "rigid body mode kernel", max(ratios) <= 1e-9,
            "max ratio per mesh " + ", ".join(f"{r:.1e}" for r in ratios), elapsed, 30)


def test_ac10_srqcg_oracle(capsys):
    t0 = time.perf_counter()
    A = sp.diags(np.arange(1.0, 11.0)).tocsr()
    G = sp.identity(10, format="csr")
    ts = srqcg(A, G, seed_space(None, 2, 10, seed=1234), SrqcgConfig(n_tv=2, k_max=50, residual_tol=1e-8))
    err = np.abs(ts.rayleigh - [1.0, 2.0]).max()
    mono = all(after <= before + 1e-12 * abs(before)
               for hist in ts.rayleigh_history for before, after in hist)
    steps = sum(len(hst) for hst in ts.rayleigh_history)
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-6 and mono and steps > 0
    detail = f"quotients {np.round(ts.rayleigh, 10).tolist()}, max error {err:.1e}, monotone over {steps} updates: {mono}"
    verdict(capsys, 10, "SRQCG eigenvalue oracle", ok, detail, elapsed, 5)


def test_ac11_complexities(capsys, default_runs):
    t0 = time.perf_counter()
    # hand-built two-level hierarchy: sizes 4 + 2, nnz 10 + 4, G nnz 7
    A0 = sp.csr_matrix(sp.diags([np.ones(3), 4 * np.ones(4), np.ones(3)], [-1, 0, 1]))
    A1 = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    G0 = sp.csr_matrix(sp.diags([np.ones(3), np.ones(4)], [-1, 0]))
    hand = complexities(Hierarchy([Level(A0, FsaiSmoother(G0, 1.0)), Level(A1)], None))
    exact = hand == (6 / 4, 14 / 10, 7 / 10)
    cube = assemble_hex_cube(4, 4, 4)
    h2 = amg_setup(cube.stiffness, cube.free_coordinates, HierarchyConfig(max_levels=2, min_coarse_size=1))
    n0, n1 = (lev.n for lev in h2.levels)
    z0, z1 = (lev.A.nnz for lev in h2.levels)
    forced = h2.n_levels == 2 and complexities(h2)[:2] == ((n0 + n1) / n0, (z0 + z1) / z0)
    runs, _ = default_runs
    bounds = all(1 < r["C_gd"] <= 2 and r["C_op"] >= 1 for r in runs.values())
    elapsed = time.perf_counter() - t0
    ok = exact and forced and bounds
    cgd = ", ".join(f"{r['C_gd']:.2f}/{r['C_op']:.2f}" for r in runs.values())
    detail = f"hand-built {hand}, forced 2-level ({n0}, {n1}) exact: {forced}, default C_gd/C_op: {cgd}"
    verdict(capsys, 11, "complexity metrics", ok, detail, elapsed, 60)


def test_ac12_mesh_quality(capsys):
    t0 = time.perf_counter()
    regular = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    flat = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.3, 0.3, 0]], dtype=float)
    collapsed = np.zeros((4, 3))
    q = mesh_quality_tet(regular)
    q0, q1 = mesh_quality_tet(flat), mesh_quality_tet(collapsed)
    elapsed = time.perf_counter() - t0
    ok = abs(q - 1) <= 1e-12 and q0 == 0.0 and q1 == 0.0
    verdict(capsys, 12, "tetrahedron quality", ok, f"regular {q:.15f}, degenerate {q0}, {q1}", elapsed, 1)
