"""Selection between the numba kernels and the pure-numpy fallback.

The environment variable ``DESCRANK_BACKEND`` picks the path: ``numba``
(default when numba imports) or ``numpy``. It is read at fit time, not at
import time, so tests and benchmarks can switch per call.
"""

from __future__ import annotations

import os

from . import _em_numpy

ENV_VAR = "DESCRANK_BACKEND"

try:
    from . import _em_numba

    HAVE_NUMBA = True
except ImportError:
    _em_numba = None
    HAVE_NUMBA = False

_MODULES = {"numpy": _em_numpy, "numba": _em_numba}


def available_backends() -> tuple[str, ...]:
    return ("numpy", "numba") if HAVE_NUMBA else ("numpy",)


def default_backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def active_backend_name() -> str:
    """Backend that :func:`get_backend` would return right now."""
    name = os.environ.get(ENV_VAR, "").strip().lower()
    return name if name else default_backend()


def get_backend(name: str | None = None):
    """Kernel module (``e_step``, ``m_step``) for ``name``, env var, or default."""
    if name is None:
        name = active_backend_name()
    name = name.strip().lower()
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; expected one of {sorted(_MODULES)}")
    module = _MODULES[name]
    if module is None:
        raise RuntimeError("backend 'numba' requested but numba is not installed")
    return module
