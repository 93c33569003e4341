"""Compute-backend selection: compiled extension core with numpy fallback.

The compiled core (`flockuq._core`, Cython) is used when importable; the
pure-numpy fallback (`flockuq._core_py`) implements identical semantics.
Selection happens at import time and can be forced with the environment
variable ``FLOCKUQ_BACKEND=python|compiled`` or programmatically with
:func:`use` / :func:`using`.

Both backends expose ``jet_accel`` and ``jet_rk4`` with the same signature
and, within one backend, satisfy the bit-for-bit contracts (order-0 slice
of a jet run equals a plain run; identical inputs give identical runs).
"""

from __future__ import annotations

import contextlib
import os

from . import _core_py

try:
    from . import _core  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _core = None
    HAVE_COMPILED = False

_BACKENDS = {"python": _core_py}
if HAVE_COMPILED:
    _BACKENDS["compiled"] = _core


def _initial() -> str:
    env = os.environ.get("FLOCKUQ_BACKEND", "").strip().lower()
    if env:
        if env not in _BACKENDS:
            raise ImportError(
                f"FLOCKUQ_BACKEND={env!r} not available; choices: {sorted(_BACKENDS)}"
            )
        return env
    return "compiled" if HAVE_COMPILED else "python"


_active_name = _initial()


def available() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active():
    """The active backend module."""
    return _BACKENDS[_active_name]


def active_name() -> str:
    return _active_name


def get(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choices: {sorted(_BACKENDS)}") from None


def use(name: str) -> None:
    """Switch the active backend for the rest of the process."""
    global _active_name
    get(name)
    _active_name = name


@contextlib.contextmanager
def using(name: str):
    """Temporarily switch the active backend."""
    global _active_name
    prev = _active_name
    use(name)
    try:
        yield _BACKENDS[name]
    finally:
        _active_name = prev


BlowUpError = _core_py.BlowUpError
