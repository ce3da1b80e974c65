"""Kernel backend selection.

The compiled extension is used when it imports; otherwise everything runs on
the pure-Python step functions.  ``set_backend`` exists for benchmarks and
tests that compare the two.
"""

from __future__ import annotations

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

_active = "compiled" if compiled is not None else "python"


def available() -> list[str]:
    return ["compiled", "python"] if compiled is not None else ["python"]


def active() -> str:
    return _active


def set_backend(name: str) -> str:
    """Select ``"compiled"``, ``"python"`` or ``"auto"``; returns the previous one."""
    global _active
    prev = _active
    if name == "auto":
        name = "compiled" if compiled is not None else "python"
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and compiled is None:
        raise RuntimeError("the compiled extension is not available; rebuild the package")
    _active = name
    return prev


def resolve(name: str | None) -> str:
    if name is None:
        return _active
    if name == "auto":
        return "compiled" if compiled is not None else "python"
    if name == "compiled" and compiled is None:
        raise RuntimeError("the compiled extension is not available; rebuild the package")
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    return name
