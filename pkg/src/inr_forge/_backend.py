"""Select the kernel implementation at import time.

The compiled core is used when it was built; ``INR_FORGE_BACKEND=python``
forces the NumPy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if os.environ.get("INR_FORGE_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "compiled"

matmul_ordered = kernels.matmul_ordered
radon_forward = kernels.radon_forward
radon_adjoint = kernels.radon_adjoint
