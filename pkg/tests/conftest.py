import numpy as np
import pytest

from fluxspin.kernels import CutoffOneOverF, HomogeneousDiffusion, InhomogeneousDiffusion

# cutoff 1/f fit to the polarization curve (times in us, flux in uPhi0)
PUB_PHI_P = 34.8
PUB_ALPHA = 0.98
PUB_TAU_MIN = 11.6
PUB_TAU_MAX = 8560.0


@pytest.fixture
def published_cutoff():
    return CutoffOneOverF(PUB_ALPHA, PUB_TAU_MIN, PUB_TAU_MAX)


@pytest.fixture(params=["homogeneous", "inhomogeneous", "cutoff"])
def any_kernel(request):
    return {
        "homogeneous": HomogeneousDiffusion(2.5),
        "inhomogeneous": InhomogeneousDiffusion(0.4),
        "cutoff": CutoffOneOverF(0.98, 11.6, 8560.0),
    }[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
