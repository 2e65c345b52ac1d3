"""Pick the kernel implementation at import time.

The compiled ``_kernels`` extension is used when it is importable; set
``SHRINKMETA_BACKEND=python`` to force the numpy fallback.
"""
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if os.environ.get("SHRINKMETA_BACKEND", "").strip().lower() == "python" or _compiled is None:
    kernels = _fallback
else:
    kernels = _compiled

BACKEND = kernels.BACKEND


def available():
    """Names of the kernel backends that can be imported."""
    return ["python"] + (["cython"] if _compiled is not None else [])


def get(name):
    if name == "python":
        return _fallback
    if name == "cython" and _compiled is not None:
        return _compiled
    raise ValueError(f"kernel backend {name!r} is not available")
