import numpy as np
import pytest

from surfvort import build_atlas
from surfvort.shapes import bumpy_sphere, ellipsoid, icosphere

# sphericity tolerances sit above each mesh's measured discretization floor
ELLIPSOID_TOL = 4e-3
BLOB_TOL = 1.2e-3


@pytest.fixture(scope="session")
def icosphere2():
    return icosphere(2)


@pytest.fixture(scope="session")
def icosphere3():
    return icosphere(3)


@pytest.fixture(scope="session")
def icosphere4():
    return icosphere(4)


@pytest.fixture(scope="session")
def ellipsoid4():
    return ellipsoid(1.0, 1.0, 1.5, subdivisions=4)


@pytest.fixture(scope="session")
def blob4():
    return bumpy_sphere(4)


@pytest.fixture(scope="session")
def ellipsoid_atlas(ellipsoid4):
    atlas = build_atlas(ellipsoid4, tol=ELLIPSOID_TOL)
    assert atlas.converged
    return atlas


@pytest.fixture(scope="session")
def blob_atlas(blob4):
    atlas = build_atlas(blob4, tol=BLOB_TOL)
    assert atlas.converged
    return atlas


@pytest.fixture(scope="session")
def icosphere_atlas(icosphere4):
    atlas = build_atlas(icosphere4)
    assert atlas.converged
    return atlas


@pytest.fixture()
def rng():
    return np.random.default_rng(20240815)
