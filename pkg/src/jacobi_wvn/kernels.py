"""Backend selection for the recurrence kernels.

The compiled extension is used when importable.  Setting
``JACOBI_WVN_KERNELS=python`` forces the pure-Python fallback.
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)


def _select():
    if os.environ.get("JACOBI_WVN_KERNELS", "").lower() == "python":
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError as exc:  # pragma: no cover - depends on the build
        log.debug("compiled kernels unavailable (%s); using pure Python", exc)
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _select()

forward = _impl.forward
forward_pair = _impl.forward_pair
backward = _impl.backward


def get_backend(name):
    """Kernel module by name ("cython" or "python"), for benchmarks and tests."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
