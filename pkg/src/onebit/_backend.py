"""Kernel backend selection.

The compiled extension is used when it imports; setting ``ONEBIT_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if os.environ.get("ONEBIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as kernels  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py

MAX_ENTANGLED = _kernels_py.MAX_ENTANGLED
TONER_BACON = _kernels_py.TONER_BACON
SEMIANALYTICAL = _kernels_py.SEMIANALYTICAL
