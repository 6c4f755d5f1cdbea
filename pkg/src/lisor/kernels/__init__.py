"""Backend selection for the recurrent-layer kernels.

The compiled Cython extension is preferred when it is built; otherwise the
numpy reference implementation takes over. Set ``LISOR_KERNELS=pure`` or
``LISOR_KERNELS=cython`` to force a backend (the latter raises if the
extension is missing).
"""

import os

from . import _pure

_requested = os.environ.get("LISOR_KERNELS", "").strip().lower()

if _requested == "pure":
    _impl = _pure
    BACKEND = "pure-python"
elif _requested == "cython":
    from . import _core as _impl  # noqa: F401  (ImportError here is intentional)

    BACKEND = "cython"
elif _requested == "":
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pure
        BACKEND = "pure-python"
else:
    raise ValueError(f"LISOR_KERNELS={_requested!r}: expected 'pure' or 'cython'")

layer_forward = _impl.layer_forward
layer_backward = _impl.layer_backward
