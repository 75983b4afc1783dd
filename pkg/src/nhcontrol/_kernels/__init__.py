"""Hot numerical kernels with a compiled core and a numpy fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise the
pure-numpy ``_pykernels`` module is loaded. Set ``NHCONTROL_PURE_PYTHON=1``
to force the fallback (useful for benchmarking and debugging).

``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels

if os.environ.get("NHCONTROL_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

charpoly = _impl.charpoly
chain_product = _impl.chain_product
apply_three_qubit = _impl.apply_three_qubit
swap_bits = _impl.swap_bits

__all__ = [
    "BACKEND",
    "charpoly",
    "chain_product",
    "apply_three_qubit",
    "swap_bits",
]
