"""Backend selection for the pair-sum hot loops.

The compiled extension is used when importable; otherwise the NumPy
implementation takes over.  POLARON_BACKEND=python or =cython forces the
choice (forcing cython without the built extension raises at import).
"""

import os

from .errors import ValidationError

try:
    from . import _pathsum as _compiled
    HAVE_COMPILED = True
except ImportError:
    _compiled = None
    HAVE_COMPILED = False

from . import _pathsum_py as _pure

_forced = os.environ.get("POLARON_BACKEND", "").strip().lower()
if _forced not in ("", "cython", "python"):
    raise ValidationError(f"POLARON_BACKEND must be 'cython' or 'python', got {_forced!r}")
if _forced == "cython" and not HAVE_COMPILED:
    raise ImportError("POLARON_BACKEND=cython but the compiled extension is not available")

if _forced == "python" or not HAVE_COMPILED:
    BACKEND = "python"
    double_sum = _pure.double_sum
    block_delta = _pure.block_delta
else:
    BACKEND = "cython"
    double_sum = _compiled.double_sum
    block_delta = _compiled.block_delta


def get_backend(name=None):
    """Return (double_sum, block_delta) for a named backend, default selected."""
    if name in (None, BACKEND):
        return double_sum, block_delta
    if name == "python":
        return _pure.double_sum, _pure.block_delta
    if name == "cython":
        if not HAVE_COMPILED:
            raise ValidationError("compiled backend requested but not built")
        return _compiled.double_sum, _compiled.block_delta
    raise ValidationError(f"unknown backend {name!r}")
