"""Backend selection for the statevector kernels.

The compiled extension is used when it imports; ``IONDMET_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("IONDMET_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

pauli_expectation = _impl.pauli_expectation
apply_1q = _impl.apply_1q
apply_2q = _impl.apply_2q
