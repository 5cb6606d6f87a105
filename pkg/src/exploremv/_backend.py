"""Backend selection for the training-episode kernel.

The compiled Cython extension is used when importable; the pure-numpy
implementation is the fallback.  Set EXPLOREMV_PURE=1 to force the pure
implementation (useful for debugging and for the backend benchmark).
"""

from __future__ import annotations

import os

from . import _episode_py

if os.environ.get("EXPLOREMV_PURE", "") not in ("", "0"):
    kernel = _episode_py
else:
    try:
        from . import _episode_kernel as kernel  # type: ignore[no-redef]
    except ImportError:
        kernel = _episode_py

run_learning_episode = kernel.run_learning_episode
BACKEND_NAME: str = kernel.BACKEND_NAME
