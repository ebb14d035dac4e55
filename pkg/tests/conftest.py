import math

import numpy as np
import pytest

from cornerfem.mesh import DomainSpec, build_domain_mesh, mesh_hierarchy

OMEGAS = {
    "convex": 3 * math.pi / 4,
    "lshape": 3 * math.pi / 2,
    "slit": 355 * math.pi / 180,
}


@pytest.fixture(params=list(OMEGAS), scope="session")
def omega(request):
    return OMEGAS[request.param]


@pytest.fixture(scope="session")
def hierarchies():
    """Cache of the first few uniform refinement levels per angle."""
    cache = {}

    def get(omega, levels):
        key = round(omega, 12)
        if key not in cache or len(cache[key]) < levels:
            cache[key] = mesh_hierarchy(DomainSpec(omega), levels)
        return cache[key][:levels]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


@pytest.fixture(scope="session")
def coarse_lshape():
    return build_domain_mesh(DomainSpec(3 * math.pi / 2))
