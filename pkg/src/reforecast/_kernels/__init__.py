"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension is selected at import time when present; set
``REFORECAST_FORCE_NUMPY=1`` to force the fallback (used by the kernel
benchmark and the cross-backend tests).

Only the backward gate kernel routes to the extension: it is pure
arithmetic, which a single fused C loop beats numpy at by 3-5x. The forward
kernel is dominated by exp/tanh, where numpy's vectorized transcendentals
outrun scalar libm calls, so both backends share the numpy forward (see
benchmarks/bench_kernels.py for the numbers).
"""

import os

from . import _numpy_ref

if os.environ.get("REFORECAST_FORCE_NUMPY"):
    _impl = _numpy_ref
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _numpy_ref

BACKEND = _impl.BACKEND_NAME

lstm_gates_forward = _numpy_ref.lstm_gates_forward
lstm_gates_backward = _impl.lstm_gates_backward


def numpy_reference():
    """The fallback module, importable regardless of the active backend."""
    return _numpy_ref
