"""Select the kernel implementation at import.

The compiled extension is used when it imports; setting the environment
variable ``CGNL_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _pykernels

python = _pykernels
compiled = None
if os.environ.get("CGNL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

active = compiled if compiled is not None else python
NAME = "compiled" if active is compiled else "python"


def get(name=None):
    """Return a backend module by name (``auto``, ``compiled``, ``python``)."""
    if name in (None, "auto"):
        return active
    if name == "python":
        return python
    if name == "compiled":
        if compiled is None:
            raise RuntimeError("compiled kernels are not available in this build")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
