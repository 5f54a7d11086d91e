"""Backend selection for the exponential-integral kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``CONFORMAL_DBAR_PURE`` is set to a non-empty value)
the numpy fallback is used. Both expose ``e1_array``, ``h1_array`` and
``hhat_matrix``.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("CONFORMAL_DBAR_PURE"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

e1_array = _impl.e1_array
h1_array = _impl.h1_array
hhat_matrix = _impl.hhat_matrix
EULER_GAMMA = _kernels_py.EULER_GAMMA


def get_backend(name):
    """Return the kernel module for ``name`` ("python" or "cython")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
