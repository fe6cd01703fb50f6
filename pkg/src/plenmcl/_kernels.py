"""Kernel backend selection.

The compiled extension is used when it was built and importable; otherwise
the numpy reference kernels are used. Set ``PLENMCL_PURE_PYTHON=1`` to force
the fallback.
"""
import importlib
import logging
import os

logger = logging.getLogger(__name__)

_FORCE_PURE = os.environ.get("PLENMCL_PURE_PYTHON", "").lower() in ("1", "true", "yes")


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "cython":
        return importlib.import_module("plenmcl._ckernels")
    if name == "python":
        return importlib.import_module("plenmcl._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if _FORCE_PURE:
    kernels = load_backend("python")
    BACKEND = "python"
else:
    try:
        kernels = load_backend("cython")
        BACKEND = "cython"
    except ImportError:
        logger.debug("compiled kernels unavailable, using numpy fallback")
        kernels = load_backend("python")
        BACKEND = "python"


def resolve(backend=None):
    """Kernel module for an explicit backend name, or the import-time default."""
    return kernels if backend is None else load_backend(backend)
