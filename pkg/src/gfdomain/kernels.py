"""Kernel selection: the compiled extension when it imports, numpy otherwise.

Set ``GFDOMAIN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("GFDOMAIN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

mul_trunc = _impl.mul_trunc
monomial_values = _impl.monomial_values
track = _impl.track
