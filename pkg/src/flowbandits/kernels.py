"""Hot-kernel dispatch: compiled Cython core when built, pure Python otherwise.

``BACKEND`` names the implementation picked at import. Both modules stay
importable for benchmarking and cross-checking (``compiled`` is ``None``
when the extension is not built).
"""

from __future__ import annotations

from . import _fallback as fallback

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

_impl = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "python"

blip_fold = _impl.blip_fold
q_fold = _impl.q_fold

__all__ = ["BACKEND", "blip_fold", "q_fold", "compiled", "fallback"]
