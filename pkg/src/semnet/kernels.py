"""Kernel backend selection.

The compiled extension is used when it imports; setting
``SEMNET_PURE_PYTHON=1`` forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _scan_py

python_backend = _scan_py
compiled_backend = None

if os.environ.get("SEMNET_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _scan_ext as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

linear_scan = backend.linear_scan
ssm_forward = backend.ssm_forward
ssm_backward = backend.ssm_backward
ssm_scan = backend.ssm_scan
