import numpy as np
import pytest

from brownpack import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure compute only."""
    E = np.array([[1.0, 0.0, 0.1], [0.0, 1.0, 0.2], [0.3, 0.2, 1.0]])
    kernels.vec_norm(E[0])
    kernels.angle(E[0], E[1])
    kernels.angle_grad(E[0], E[1])
    kernels.pairwise_angles(E)
    kernels.cross_angles(E, E[:2])
    kernels.granular_embedding_forces(E, 1.4, 1.0)
    kernels.latent_granular_forces(E, 2.0, 1.0)
    kernels.cross_granular_forces(E, E[:2], 0.8, 1.0)
    kernels.angles_to_ref(E, E[0])
    kernels.latent_min_mean(E)
