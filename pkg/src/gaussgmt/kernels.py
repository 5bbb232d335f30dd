"""Backend selection for hot kernels.

The compiled extension is used when it was built; otherwise (or when
``GAUSSGMT_PURE=1``) the numpy implementation is used.  Both satisfy the
same contract and agree to rounding.
"""

import os

from . import _kernels_py

BACKEND = "python"
transport = _kernels_py.transport

if os.environ.get("GAUSSGMT_PURE", "") != "1":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        transport = _ckernels.transport
        BACKEND = "cython"
