"""Structured hexahedral linear-elasticity problems and mesh utilities."""
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp

from aspamg.linalg import orthonormalize

__all__ = [
    "Material",
    "GeneratedProblem",
    "hex_element_stiffness",
    "assemble_hex_cube",
    "two_material_field",
    "rigid_body_modes",
    "raw_rigid_body_modes",
    "mesh_quality_tet",
]

FACES = ("x0", "x1", "y0", "y1", "z0", "z1")

# Reference hexahedron vertex signs, counter-clockwise on the bottom face then the top.
_HEX_SIGNS = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class Material:
    """Isotropic linear-elastic material."""

    young_modulus: float
    poisson_ratio: float

    def __post_init__(self):
        if not (np.isfinite(self.young_modulus) and self.young_modulus > 0.0):
            raise ValueError(f"Young modulus must be positive, got {self.young_modulus}")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {self.poisson_ratio}")

    def elasticity_matrix(self):
        """6x6 constitutive matrix in Voigt order (xx, yy, zz, xy, yz, zx)."""
        E, nu = self.young_modulus, self.poisson_ratio
        c = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
        D = np.zeros((6, 6))
        D[:3, :3] = c * nu
        D[np.arange(3), np.arange(3)] = c * (1.0 - nu)
        D[np.arange(3, 6), np.arange(3, 6)] = c * (1.0 - 2.0 * nu) / 2.0
        return D


@dataclass
class GeneratedProblem:
    """Assembled stiffness plus the mesh data needed downstream.

    ``stiffness`` acts on the free DOFs only; ``coordinates`` covers every
    node of the mesh. DOF ``3*p + c`` is component ``c`` of node ``p``.
    """

    stiffness: sp.csr_matrix
    coordinates: np.ndarray
    constrained_dofs: np.ndarray
    elements: np.ndarray
    free_dofs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.free_dofs is None:
            n_dofs = 3 * self.coordinates.shape[0]
            self.free_dofs = np.setdiff1d(np.arange(n_dofs), self.constrained_dofs)

    @property
    def free_nodes(self):
        """Nodes that keep all three DOFs (clamping removes whole nodes)."""
        return np.unique(self.free_dofs // 3)

    @property
    def free_coordinates(self):
        return self.coordinates[self.free_nodes]


def hex_element_stiffness(material, spacing):
    """24x24 stiffness of a cubic trilinear hexahedron, 2x2x2 Gauss rule."""
    D = material.elasticity_matrix()
    h = float(spacing)
    g = 1.0 / np.sqrt(3.0)
    Ke = np.zeros((24, 24))
    det_j = (h / 2.0) ** 3
    for xi, eta, zeta in product((-g, g), repeat=3):
        s = _HEX_SIGNS
        # derivatives of N_a = (1 + s_x xi)(1 + s_y eta)(1 + s_z zeta) / 8
        dxi = s[:, 0] * (1 + s[:, 1] * eta) * (1 + s[:, 2] * zeta) / 8.0
        deta = s[:, 1] * (1 + s[:, 0] * xi) * (1 + s[:, 2] * zeta) / 8.0
        dzeta = s[:, 2] * (1 + s[:, 0] * xi) * (1 + s[:, 1] * eta) / 8.0
        dN = np.vstack([dxi, deta, dzeta]) * (2.0 / h)
        B = np.zeros((6, 24))
        B[0, 0::3] = dN[0]
        B[1, 1::3] = dN[1]
        B[2, 2::3] = dN[2]
        B[3, 0::3] = dN[1]
        B[3, 1::3] = dN[0]
        B[4, 1::3] = dN[2]
        B[4, 2::3] = dN[1]
        B[5, 0::3] = dN[2]
        B[5, 2::3] = dN[0]
        Ke += B.T @ D @ B * det_j
    return (Ke + Ke.T) / 2.0


def _structured_mesh(nx, ny, nz, spacing):
    xs = np.arange(nx + 1) * spacing
    ys = np.arange(ny + 1) * spacing
    zs = np.arange(nz + 1) * spacing
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    coords = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def node(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    elems = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                elems.append(
                    [
                        node(i, j, k),
                        node(i + 1, j, k),
                        node(i + 1, j + 1, k),
                        node(i, j + 1, k),
                        node(i, j, k + 1),
                        node(i + 1, j, k + 1),
                        node(i + 1, j + 1, k + 1),
                        node(i, j + 1, k + 1),
                    ]
                )
    return coords, np.asarray(elems, dtype=np.intp)


def two_material_field(nx, ny, nz, left, right):
    """Per-element materials split at the mid-plane along x."""
    mats = []
    for _k in range(nz):
        for _j in range(ny):
            for i in range(nx):
                mats.append(left if i < nx / 2 else right)
    return mats


def assemble_hex_cube(nx, ny, nz, spacing=1.0, material_field=None, clamped_face="x0"):
    """Assemble linear elasticity on an ``nx x ny x nz`` box of cubic hexahedra.

    Parameters
    ----------
    nx, ny, nz : int
        Element counts per direction.
    spacing : float
        Element edge length.
    material_field : Material or sequence of Material, optional
        One material for the whole box or one per element (x fastest).
        Defaults to E=1, nu=0.3.
    clamped_face : str or None
        One of ``x0, x1, y0, y1, z0, z1``; its nodes are removed from the
        system by symmetric row/column deletion.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError("element counts must be >= 1")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    coords, elems = _structured_mesh(nx, ny, nz, spacing)
    n_elem = elems.shape[0]
    if material_field is None:
        material_field = Material(1.0, 0.3)
    if isinstance(material_field, Material):
        mats = [material_field] * n_elem
    else:
        mats = list(material_field)
        if len(mats) != n_elem:
            raise ValueError(f"expected {n_elem} materials, got {len(mats)}")
        for m in mats:
            if not isinstance(m, Material):
                raise TypeError(f"invalid material {m!r}")

    cache = {}
    iu, ju = np.triu_indices(24)
    rows, cols, vals = [], [], []
    for e in range(n_elem):
        m = mats[e]
        if m not in cache:
            cache[m] = hex_element_stiffness(m, spacing)
        Ke = cache[m]
        dofs = (3 * elems[e][:, None] + np.arange(3)).ravel()
        gi, gj = dofs[iu], dofs[ju]
        v = Ke[iu, ju]
        # store each pair once, in the upper triangle of the global matrix
        swap = gi > gj
        gi, gj = np.where(swap, gj, gi), np.where(swap, gi, gj)
        rows.append(gi)
        cols.append(gj)
        vals.append(v)
    n_dofs = 3 * coords.shape[0]
    U = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_dofs, n_dofs),
    ).tocsr()
    U.sum_duplicates()
    K = (U + sp.triu(U, k=1).T).tocsr()
    K.sort_indices()

    constrained = np.empty(0, dtype=np.intp)
    if clamped_face is not None:
        if clamped_face not in FACES:
            raise ValueError(f"unknown face {clamped_face!r}; expected one of {FACES}")
        axis = "xyz".index(clamped_face[0])
        target = 0.0 if clamped_face[1] == "0" else coords[:, axis].max()
        nodes = np.flatnonzero(np.isclose(coords[:, axis], target))
        constrained = (3 * nodes[:, None] + np.arange(3)).ravel()
    free = np.setdiff1d(np.arange(n_dofs), constrained)
    K = K[free][:, free].tocsr()
    K.sort_indices()
    return GeneratedProblem(K, coords, constrained, elems, free)


def rigid_body_modes(coordinates, drop_tol=1e-12):
    """Orthonormal basis of the rigid body modes of a 3D point cloud.

    Rotations are taken about the centroid. Rank-deficient inputs (fewer
    than three non-collinear points) return fewer than six columns and
    issue a warning.
    """
    B = raw_rigid_body_modes(coordinates)
    Q, kept = orthonormalize(B, drop_tol)
    if len(kept) < 6:
        warnings.warn(
            f"rigid body modes are rank deficient: {len(kept)} of 6 independent",
            RuntimeWarning,
            stacklevel=2,
        )
    return Q


def raw_rigid_body_modes(coordinates):
    """Rigid body modes before orthonormalization (translations, then rotations)."""
    X = np.asarray(coordinates, dtype=np.float64)
    c = X - X.mean(axis=0)
    n = X.shape[0]
    B = np.zeros((3 * n, 6))
    for a in range(3):
        B[a::3, a] = 1.0
    B[1::3, 3], B[2::3, 3] = -c[:, 2], c[:, 1]
    B[0::3, 4], B[2::3, 4] = c[:, 2], -c[:, 0]
    B[0::3, 5], B[1::3, 5] = -c[:, 1], c[:, 0]
    return B


def mesh_quality_tet(vertices):
    """Shape quality ``3 r / R`` of a tetrahedron (1 for the regular one, 0 if flat)."""
    P = np.asarray(vertices, dtype=np.float64).reshape(4, 3)
    a, b, c, d = P
    edges = P[1:] - a
    vol = abs(np.linalg.det(edges)) / 6.0
    scale = max(np.max(np.linalg.norm(P[:, None] - P[None], axis=-1)), np.finfo(float).tiny)
    if vol <= 1e-14 * scale**3:
        return 0.0
    faces = [(b, c, d), (a, c, d), (a, b, d), (a, b, c)]
    area = sum(0.5 * np.linalg.norm(np.cross(q - p, r - p)) for p, q, r in faces)
    inradius = 3.0 * vol / area
    rhs = 0.5 * (np.sum(P[1:] ** 2, axis=1) - a @ a)
    center = np.linalg.solve(edges, rhs)
    circumradius = np.linalg.norm(center - a)
    return float(min(3.0 * inradius / circumradius, 1.0))
