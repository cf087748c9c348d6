"""Kernel selection.

The compiled extension is used when it imports; otherwise the numpy versions
in ``_kernels_py``. Set ``SYMCTL_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py
from ._kernels_py import (  # noqa: F401
    BLOW_UP, DOPRI45, ESCAPED, MAX_STEPS, NON_FINITE, RK4, TIME_LIMIT, drive, single_step,
)

_impl = _kernels_py
if not os.environ.get("SYMCTL_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"


def use_backend(name: str) -> None:
    """Switch backends at runtime ("compiled" or "python"); used by benchmarks and tests."""
    global _impl, BACKEND
    if name == "python":
        _impl = _kernels_py
    elif name == "compiled":
        from . import _kernels
        _impl = _kernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


def poly_eval(coef, exps, rows, x, out):
    _impl.poly_eval(coef, exps, rows, x, out)


def integrate_poly(*args):
    return _impl.integrate_poly(*args)


def step_poly(field, x, h, method):
    return _impl.step_poly(field, x, h, method)
