import numpy as np
import pytest
import scipy.sparse as sp

from aspamg.fem import assemble_hex_cube
from aspamg.hierarchy import amg_setup


def random_spd(n, density=0.2, seed=0, shift=1.0):
    """Sparse SPD test matrix: B B^T + shift I on a random pattern."""
    rng = np.random.default_rng(seed)
    B = sp.random(n, n, density=density, random_state=rng, format="csr")
    A = (B @ B.T + shift * sp.eye(n)).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    A.sort_indices()
    return A


def tridiag(n, diag=2.0, off=-1.0):
    A = sp.diags([np.full(n - 1, off), np.full(n, diag), np.full(n - 1, off)], [-1, 0, 1])
    return A.tocsr()


@pytest.fixture(scope="session")
def cube3():
    return assemble_hex_cube(3, 3, 3)


@pytest.fixture(scope="session")
def cube4():
    return assemble_hex_cube(4, 4, 4)


@pytest.fixture(scope="session")
def cube7():
    return assemble_hex_cube(7, 7, 7)


@pytest.fixture(scope="session")
def hier4(cube4):
    return amg_setup(cube4.stiffness, cube4.free_coordinates)
