"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``RLMC_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("RLMC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

argmax_poly = _impl.argmax_poly
clamped_poly = _impl.clamped_poly

python_backend = _kernels_py
