"""Backend selection for the numeric hot loops.

The compiled extension is used when it imports cleanly; otherwise (or when
``PTFLAB_PURE_PYTHON=1`` is set) the numpy implementation is used.  Both
expose the same functions, re-exported here.
"""
import os

BACKEND = "python"

if os.environ.get("PTFLAB_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import (adam_update, mlp_backward_batch, mlp_forward,
                              mlp_forward_batch, param_count, pinball_advance)
else:
    try:
        from ._kernels import (adam_update, mlp_backward_batch, mlp_forward,
                               mlp_forward_batch, param_count, pinball_advance)
        BACKEND = "cython"
    except ImportError:
        from ._kernels_py import (adam_update, mlp_backward_batch, mlp_forward,
                                  mlp_forward_batch, param_count,
                                  pinball_advance)

__all__ = ["BACKEND", "adam_update", "mlp_backward_batch", "mlp_forward",
           "mlp_forward_batch", "param_count", "pinball_advance"]
