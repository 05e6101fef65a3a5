import pytest

from torusgauge.polycomplex import joined_complex, product_with_zn, tetrahedron


@pytest.fixture(scope="session")
def tetra_joined():
    return joined_complex(tetrahedron())


@pytest.fixture(scope="session")
def tetra_product(tetra_joined):
    return {N: product_with_zn(tetra_joined.complex, N) for N in (2, 3)}
