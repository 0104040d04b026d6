"""Adaptive smoothing-and-prolongation algebraic multigrid for SPD systems."""

from aspamg.sparse import (
    adjacency_neighbors,
    as_csr,
    galerkin_triple,
    is_symmetric,
    lower_triangular_solve_transposed,
    spmv,
)
from aspamg.fem import (
    GeneratedProblem,
    Material,
    assemble_hex_cube,
    mesh_quality_tet,
    rigid_body_modes,
)
from aspamg.smoother import (
    FsaiSmoother,
    SmootherConfig,
    afsai_build,
    apply_smoothing_step,
    compute_omega,
    estimate_lambda_max,
    smoother_setup,
)
from aspamg.testspace import SrqcgConfig, TestSpace, seed_space, srqcg
from aspamg.coarsening import (
    CfSplit,
    SocGraph,
    affinity_soc,
    filter_soc,
    select_coarse_mis,
)
from aspamg.prolongation import (
    DplsConfig,
    Prolongation,
    dpls_build,
    interpolation_residual,
)
from aspamg.hierarchy import (
    Hierarchy,
    HierarchyConfig,
    Level,
    amg_setup,
    complexities,
    stationary_solve,
    vcycle_apply,
)
from aspamg.krylov import SolveReport, pcg, power_spectral_radius

__version__ = "0.1.0"
