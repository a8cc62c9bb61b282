"""Backend selection for the fused recurrence kernels.

The compiled extension is preferred when importable; otherwise the
pure-numpy fallback is used. Set ``JOINTLABEL_PURE=1`` to force the
fallback (used by the benchmark and the backend-parity tests).
"""

import os

_force_pure = os.environ.get("JOINTLABEL_PURE", "").strip() not in ("", "0")

if not _force_pure:
    try:
        from ._fastkernels import lstm_backward, lstm_forward
        BACKEND = "compiled"
    except ImportError:
        from ._purekernels import lstm_backward, lstm_forward
        BACKEND = "pure"
else:
    from ._purekernels import lstm_backward, lstm_forward
    BACKEND = "pure"

__all__ = ["lstm_forward", "lstm_backward", "BACKEND"]
