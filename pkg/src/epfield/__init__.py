"""Euler-Poincare field equations on trivial principal bundles ``X x G``.

Set ``TOOL_THREADS`` before the first import to cap BLAS/OpenMP threads.
"""

from __future__ import annotations

import os

_threads = os.environ.get("TOOL_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .errors import EPFieldError  # noqa: E402
from .lie import LieAlgebra, LieAlgebraSpec, make_algebra  # noqa: E402
from .jets import Grid, Lagrangian  # noqa: E402

__all__ = ["EPFieldError", "Grid", "Lagrangian", "LieAlgebra", "LieAlgebraSpec", "make_algebra", "__version__"]
