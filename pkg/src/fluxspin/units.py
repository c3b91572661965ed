"""Conversion between lab units and natural (SI, k_B = hbar = 1 for energy) units.

Lab units are the ones used in every file and command-line boundary:
microseconds, micro flux quanta, millikelvin, hertz, microamperes and
micrometres. Natural units are SI with temperatures expressed as energies
(k_B T in joules); they are what the physics formulas consume.
"""

import math
import re

import numpy as np

from .constants import K_B, PHI_0
from .errors import UnitError

# quantity -> (lab unit label, factor such that natural = lab * factor)
LAB_UNITS = {
    "time": ("us", 1e-6),
    "flux": ("uPhi0", 1e-6 * PHI_0),
    "temperature": ("mK", 1e-3 * K_B),
    "frequency": ("Hz", 2.0 * math.pi),     # f [Hz] -> omega [rad/s]
    "rate": ("Hz", 1.0),                    # relaxation rate, 1/s
    "current": ("uA", 1e-6),
    "length": ("um", 1e-6),
    "psd": ("uPhi0^2/Hz", (1e-6 * PHI_0) ** 2),
    "areal_density": ("cm^-2", 1e4),
}

# accepted suffixes per quantity, expressed in the lab unit of that quantity
_SUFFIXES = {
    "time": {"s": 1e6, "ms": 1e3, "us": 1.0, "µs": 1.0, "ns": 1e-3},
    "flux": {"uPhi0": 1.0, "mPhi0": 1e3, "Phi0": 1e6},
    "temperature": {"mK": 1.0, "K": 1e3, "uK": 1e-3},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "mHz": 1e-3},
    "rate": {"Hz": 1.0, "kHz": 1e3, "1/s": 1.0, "1/us": 1e6, "1/ms": 1e3},
    "current": {"uA": 1.0, "nA": 1e-3, "mA": 1e3, "A": 1e6},
    "length": {"um": 1.0, "nm": 1e-3, "mm": 1e3, "cm": 1e4, "m": 1e6},
    "psd": {"uPhi0^2/Hz": 1.0},
    "areal_density": {"cm^-2": 1.0, "m^-2": 1e-4},
}

_QUANTITY_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d].*)?$")


def _factor(quantity):
    try:
        return LAB_UNITS[quantity][1]
    except KeyError:
        raise UnitError(f"unknown quantity {quantity!r}") from None


def to_natural(value, quantity):
    """Convert a lab-unit value (scalar or array) to natural units."""
    factor = _factor(quantity)
    if np.ndim(value):
        return np.asarray(value, dtype=float) * factor
    return float(value) * factor


def to_lab(value, quantity):
    """Convert a natural-unit value (scalar or array) to lab units."""
    factor = _factor(quantity)
    if np.ndim(value):
        return np.asarray(value, dtype=float) / factor
    return float(value) / factor


def unit_of(quantity):
    """Lab unit label for ``quantity``."""
    return LAB_UNITS[quantity][0]


def parse_quantity(text, quantity):
    """Parse ``"5ms"``-style text into a float in the lab unit of ``quantity``.

    A bare number is taken to be in the lab unit already.

    Raises
    ------
    UnitError
        If the suffix belongs to a different kind of quantity.
    """
    if isinstance(text, (int, float)):
        return float(text)
    m = _QUANTITY_RE.match(str(text))
    if m is None:
        raise UnitError(f"cannot parse {text!r} as a {quantity}")
    number, suffix = m.group(1), m.group(2)
    value = float(number)
    if suffix is None:
        return value
    suffix = suffix.strip()
    if suffix.startswith("/"):
        # "3/us" reads as 3 per microsecond
        suffix = "1" + suffix
    table = _SUFFIXES.get(quantity)
    if table is None:
        raise UnitError(f"unknown quantity {quantity!r}")
    if suffix not in table:
        owners = [q for q, t in _SUFFIXES.items() if suffix in t]
        hint = f" (that is a {owners[0]} unit)" if owners else ""
        raise UnitError(f"unit {suffix!r} is not valid for {quantity}{hint}")
    return value * table[suffix]
