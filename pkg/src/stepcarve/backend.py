"""Kernel backend selection.

The hot numeric kernels (DFT butterflies, the quadratic-time reference DFT
and the bin max-pool reduction) exist twice: a numba-jitted version and a
pure-numpy fallback. The active backend is picked once at import time from
the ``STEPCARVE_BACKEND`` environment variable:

* ``auto`` (default): numba when importable, numpy otherwise
* ``numba``: require the jitted kernels, fail if numba is missing
* ``numpy``: force the vectorized fallback

Tests and benchmarks may switch at runtime with :func:`set_backend`; the
switch is process-global and not thread-safe, so do it before spawning
workers.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

_IMPLS = {"numpy": _kernels_numpy}

try:
    from . import _kernels_numba

    _IMPLS["numba"] = _kernels_numba
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    _kernels_numba = None

ENV_VAR = "STEPCARVE_BACKEND"


def _resolve(name: str | None) -> str:
    if name is None or name in ("", "auto"):
        return "numba" if "numba" in _IMPLS else "numpy"
    if name not in _IMPLS:
        known = ", ".join(sorted(_IMPLS) + ["auto"])
        raise ValueError(f"unknown kernel backend {name!r} (expected one of: {known})")
    return name


try:
    _active = _resolve(os.environ.get(ENV_VAR))
except ValueError as _exc:
    raise ValueError(f"{ENV_VAR}: {_exc}") from None


def available_backends() -> list[str]:
    """Names of the backends importable in this process."""
    return sorted(_IMPLS)


def get_backend() -> str:
    return _active


def set_backend(name: str | None) -> str:
    """Select the kernel backend; returns the resolved name."""
    global _active
    _active = _resolve(name)
    return _active


def kernels():
    """The module implementing the active backend's kernels."""
    return _IMPLS[_active]
