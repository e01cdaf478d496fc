"""Selects the compiled core or the numpy fallback at import time.

Set ``SINGLAB_PURE=1`` to force the fallback even when the extension exists.
"""
import os

from . import _fallback

_threads = 1

if os.environ.get("SINGLAB_PURE", "") not in ("", "0"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None

COMPILED = _core is not None
NAME = "compiled" if COMPILED else "fallback"


def get(name=None):
    """Return the backend module by name (``"compiled"``, ``"fallback"`` or default)."""
    if name is None:
        return _core if COMPILED else _fallback
    if name == "fallback":
        return _fallback
    if name == "compiled":
        if _core is None:
            raise RuntimeError("compiled core is not available")
        return _core
    raise ValueError(f"unknown backend {name!r}")


def set_threads(n):
    global _threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(n)


def threads():
    return _threads
