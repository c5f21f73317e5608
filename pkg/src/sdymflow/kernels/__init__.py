"""Backend selection for the batched grid kernels.

Set SDYMFLOW_BACKEND=numpy (or numba) to force a backend; the default
prefers numba and falls back to pure numpy when it is not importable."""

import os

from . import numpy_backend

_requested = os.environ.get("SDYMFLOW_BACKEND", "auto").lower()

if _requested == "numpy":
    backend = numpy_backend
elif _requested in ("auto", "numba"):
    try:
        from . import numba_backend

        backend = numba_backend
    except ImportError:
        if _requested == "numba":
            raise
        backend = numpy_backend
else:
    raise ValueError(f"unknown SDYMFLOW_BACKEND={_requested!r}")

BACKEND_NAME = backend.NAME

det2 = backend.det2
inv2 = backend.inv2
mul2 = backend.mul2
herm_sqrt2 = backend.herm_sqrt2
j_from_modes = backend.j_from_modes
split_residual_modes = backend.split_residual_modes
