"""Backend selection for the pair-interaction kernels.

Two interchangeable implementations exist:

* ``numba_backend``: JIT-compiled loops, parallel over rows (default).
* ``numpy_backend``: pure numpy, no compilation step.

The active backend is fixed at import time by the environment variable
``BROWNPACK_BACKEND`` (``auto`` | ``numba`` | ``numpy``, default
``auto``). Both backends implement identical mathematics; results agree
to rounding error but are not guaranteed bit-identical to each other.
Within one backend every kernel is bit-deterministic, including under
any worker count.
"""

import os

from . import numpy_backend

_requested = os.environ.get("BROWNPACK_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"BROWNPACK_BACKEND must be 'auto', 'numba' or 'numpy', got {_requested!r}"
    )

_active = None
if _requested in ("auto", "numba"):
    try:
        from . import numba_backend as _numba_backend

        _active = _numba_backend
        _BACKEND_NAME = "numba"
    except ImportError:
        if _requested == "numba":
            raise
if _active is None:
    _active = numpy_backend
    _BACKEND_NAME = "numpy"

vec_norm = _active.vec_norm
angle = _active.angle
angle_grad = _active.angle_grad
pairwise_angles = _active.pairwise_angles
cross_angles = _active.cross_angles
granular_embedding_forces = _active.granular_embedding_forces
latent_granular_forces = _active.latent_granular_forces
cross_granular_forces = _active.cross_granular_forces
angles_to_ref = _active.angles_to_ref
latent_min_mean = _active.latent_min_mean


def backend_name() -> str:
    return _BACKEND_NAME


def set_workers(n: int) -> int:
    """Set the kernel thread count; returns the effective value.

    Outputs do not depend on this number: parallel kernels assign whole
    rows to threads and accumulate each row sequentially. On the numpy
    backend this is a no-op.
    """
    if n < 1:
        raise ValueError(f"workers must be >= 1, got {n}")
    if _BACKEND_NAME != "numba":
        return 1
    import numba

    effective = min(n, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(effective)
    return effective
