"""Selects the compiled or pure-Python implementation of the hot loops.

The compiled extension is used when it was built; set
``GP_EXTREMES_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _fallback

if os.environ.get("GP_EXTREMES_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    NAME = "python"
else:
    try:
        from . import _speedups as _impl
        NAME = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
        NAME = "python"

IMPLEMENTATIONS = {"python": _fallback}
if NAME == "compiled":
    IMPLEMENTATIONS["compiled"] = _impl

philox4x32 = _impl.philox4x32
normals = _impl.normals
uniforms = _impl.uniforms
argmax_rows = _impl.argmax_rows
softmax_rows = _impl.softmax_rows
