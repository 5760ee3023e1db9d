"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise, or
when the environment variable ``FLOQUET_PURE_PYTHON`` is set to ``1``, the
pure-Python module with identical semantics is used instead.
"""
import os

from . import _kernels_py

if os.environ.get("FLOQUET_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

normalized_orbit = _impl.normalized_orbit
qr_log_diagonals = _impl.qr_log_diagonals
tau_kappa = _impl.tau_kappa
log_scaled_product = _impl.log_scaled_product
projected_products = _impl.projected_products
RESCALE_HI = _kernels_py.RESCALE_HI


def backends():
    """All importable backends keyed by name (for tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
