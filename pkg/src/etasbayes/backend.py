"""Kernel backend selection: compiled extension if importable, numpy otherwise.

Set ETASBAYES_PURE_PYTHON=1 to force the numpy kernels (used by the
benchmark and by tests that compare the two implementations).
"""

from __future__ import annotations

import os

from . import _hawkes_np

__all__ = ["point_logintensity_terms", "backend_name", "HAVE_COMPILED"]

try:
    from . import _hawkes_c

    HAVE_COMPILED = True
except ImportError:
    _hawkes_c = None
    HAVE_COMPILED = False

_FORCED_PYTHON = os.environ.get("ETASBAYES_PURE_PYTHON", "") not in ("", "0")

if HAVE_COMPILED and not _FORCED_PYTHON:
    point_logintensity_terms = _hawkes_c.point_logintensity_terms
else:
    point_logintensity_terms = _hawkes_np.point_logintensity_terms


def backend_name() -> str:
    return "compiled" if (HAVE_COMPILED and not _FORCED_PYTHON) else "python"
