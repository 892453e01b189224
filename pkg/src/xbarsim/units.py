"""Strict parsing of unit-suffixed quantities in configuration files.

Dimensioned config values are strings like ``"1.3V"``, ``"50uS"``, ``"800ohm"``
or ``"500us"``.  Parsing is strict: the suffix must name the expected unit,
and bare numbers are rejected for dimensioned fields.  Unit bugs are the
dominant failure mode in this domain, so there is no silent fallback.
"""

from __future__ import annotations

import re

from .errors import ConfigurationError

_PREFIX = {
    "G": 1e9,
    "M": 1e6,
    "k": 1e3,
    "": 1.0,
    "m": 1e-3,
    "u": 1e-6,
    "n": 1e-9,
    "p": 1e-12,
}

# Canonical unit symbols.  "ohm" is spelled out to stay ASCII-safe.
_UNITS = ("V", "A", "S", "ohm", "s")

_QUANTITY_RE = re.compile(r"^\s*([+-]?[0-9.]+(?:[eE][+-]?[0-9]+)?)\s*([A-Za-z]+)\s*$")


def parse_quantity(text, unit: str) -> float:
    """Parse ``text`` (e.g. ``"50uS"``) expecting a value in base ``unit``.

    Returns the value in SI base units (volts, amperes, siemens, ohms, seconds).
    """
    if unit not in _UNITS:
        raise ConfigurationError(f"unknown base unit {unit!r}")
    if isinstance(text, (int, float)):
        raise ConfigurationError(
            f"dimensioned value {text!r} must carry a unit suffix (expected {unit})"
        )
    match = _QUANTITY_RE.match(str(text))
    if not match:
        raise ConfigurationError(f"cannot parse quantity {text!r} (expected e.g. '1.3{unit}')")
    number, suffix = match.groups()
    if not suffix.endswith(unit):
        raise ConfigurationError(f"quantity {text!r} does not carry expected unit {unit!r}")
    prefix = suffix[: -len(unit)]
    if prefix not in _PREFIX:
        raise ConfigurationError(f"unknown SI prefix {prefix!r} in {text!r}")
    try:
        value = float(number)
    except ValueError as exc:
        raise ConfigurationError(f"bad number in quantity {text!r}") from exc
    return value * _PREFIX[prefix]


def format_quantity(value: float, unit: str, prefix: str = "") -> str:
    """Format an SI value with the given prefix, inverse of parse_quantity."""
    scale = _PREFIX[prefix]
    return f"{value / scale:.9g}{prefix}{unit}"
