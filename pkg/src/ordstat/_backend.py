"""Pick the compiled kernels when importable; ORDSTAT_BACKEND=python forces numpy."""
import os

if os.environ.get("ORDSTAT_BACKEND", "").lower() in ("python", "numpy", "pure"):
    from . import _kernels_py as kernels
    NAME = "python"
else:
    try:
        from . import _kernels as kernels
        NAME = "compiled"
    except ImportError:
        from . import _kernels_py as kernels
        NAME = "python"

__all__ = ["kernels", "NAME"]
