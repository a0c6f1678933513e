"""Hot kernels: the compiled extension when it was built, else numpy code.

``BACKEND`` is ``"cython"`` or ``"python"``.  Setting ``LAGR_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("LAGR_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

hungarian_kernel = _impl.hungarian
