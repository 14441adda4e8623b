"""Selects the Newton kernel at import.

The compiled extension is used when it was built, unless the environment
variable ``FRACDIFF_PURE_PYTHON`` is set to a non-empty value other than ``0``.
"""
import os

from . import _newton_py

_forced = os.environ.get("FRACDIFF_PURE_PYTHON", "") not in ("", "0")

if _forced:
    newton_solve = _newton_py.newton_solve
    BACKEND = "python"
else:
    try:
        from ._newton_ext import newton_solve  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        newton_solve = _newton_py.newton_solve
        BACKEND = "python"

CONVERGED = _newton_py.CONVERGED
MAXITER = _newton_py.MAXITER
NOT_SPD = _newton_py.NOT_SPD


def compiled_available() -> bool:
    try:
        from . import _newton_ext  # noqa: F401
    except ImportError:
        return False
    return True
