"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``CIDP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("CIDP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

link_argmax = _impl.link_argmax
soc_barrier = _impl.soc_barrier
racbf_hops = _impl.racbf_hops
