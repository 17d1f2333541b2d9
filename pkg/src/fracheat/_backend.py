"""Pick the compiled kernels when available, else the numpy fallback.

Set ``FRACHEAT_PURE_PYTHON=1`` to force the fallback.
"""

import os

BACKEND = "python"
if os.environ.get("FRACHEAT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels
else:
    from . import _kernels_py as kernels

pair_kernel_matrix = kernels.pair_kernel_matrix
ghost_tail = kernels.ghost_tail
exterior_tail_square = kernels.exterior_tail_square

__all__ = ["BACKEND", "pair_kernel_matrix", "ghost_tail", "exterior_tail_square"]
