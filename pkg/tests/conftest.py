import pytest

from hcplate import tensors as tn
from hcplate.geometry import InclusionShape, build_cell_mesh, build_macro_mesh

DEMO_RADIUS = 0.26


@pytest.fixture(scope="session")
def demo_material():
    return tn.MaterialSpec(tn.isotropic(1.0, 1.0), tn.isotropic(1.0, 1.0),
                           rho0=1.0, rho1=1.0, nu=0.2)


@pytest.fixture(scope="session")
def demo_shape():
    return InclusionShape("disk", DEMO_RADIUS)


@pytest.fixture(scope="session")
def demo_macro_mesh():
    return build_macro_mesh(1.0, 1.0, 8, 8)


@pytest.fixture(scope="session")
def demo_bloch_memb(demo_material, demo_shape):
    from hcplate.bloch import bloch_spectrum
    return bloch_spectrum(demo_material, demo_shape, 16, "memb_delta", 40,
                          delta=1.0, n_z=4)


@pytest.fixture(scope="session")
def demo_bloch_full(demo_material, demo_shape):
    from hcplate.bloch import bloch_spectrum
    return bloch_spectrum(demo_material, demo_shape, 16, "full_delta", 50,
                          delta=1.0, n_z=4)


@pytest.fixture(scope="session")
def demo_tensor_delta1(demo_material, demo_shape):
    from hcplate.effective import effective_delta
    mesh = build_cell_mesh(demo_shape, n=16, dim=3, n_z=4)
    return effective_delta(demo_material, mesh, delta=1.0)


@pytest.fixture(scope="session")
def demo_zhikov(demo_bloch_memb, demo_material):
    from hcplate.zhikov import zhikov_from_bloch
    return zhikov_from_bloch(demo_bloch_memb, demo_material)
