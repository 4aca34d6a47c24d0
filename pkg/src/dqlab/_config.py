"""Global physical constants used throughout the package.

Only the reduced Planck constant is configurable.  Every bound in the
formalism is a power of ħ, so the unit-free default of 1 keeps test oracles
simple; pass ``1.054571817e-34`` to work in SI units.
"""

from __future__ import annotations

import contextlib

_HBAR = 1.0


def get_hbar() -> float:
    return _HBAR


def set_hbar(value: float) -> None:
    global _HBAR
    value = float(value)
    if not value > 0 or value != value or value == float("inf"):
        raise ValueError(f"hbar must be a positive finite number, got {value!r}")
    _HBAR = value


@contextlib.contextmanager
def hbar_context(value: float):
    """Temporarily override ħ inside a ``with`` block."""
    old = _HBAR
    set_hbar(value)
    try:
        yield
    finally:
        set_hbar(old)


def resolve_hbar(hbar: float | None) -> float:
    return _HBAR if hbar is None else float(hbar)
