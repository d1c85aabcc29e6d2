"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``IBCD_PURE_PYTHON=1`` to force the fallback.
"""
import functools
import os

from . import _kernels_py

if os.environ.get("IBCD_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"
WorstCaseKernel = _impl.WorstCaseKernel
CONSTANT_WRONG = _kernels_py.CONSTANT_WRONG
REGION_HASH = _kernels_py.REGION_HASH
wrong_label = _kernels_py.wrong_label


@functools.lru_cache(maxsize=32)
def pixel_key_table(width, height):
    table = _kernels_py.pixel_key_table(width, height)
    table.flags.writeable = False
    return table


def kernel_modules():
    """Every importable backend, keyed by name (used by tests and benchmarks)."""
    mods = {"python": _kernels_py}
    try:
        from . import _kernels
        mods["cython"] = _kernels
    except ImportError:
        pass
    return mods
