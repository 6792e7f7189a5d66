"""Exact rational parsing and formatting.

Numerals are always read as exact decimals (``"0.3"`` is 3/10), never as
binary floats.  Fractions such as ``"1/3"`` are accepted as well.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

RationalLike = "Fraction | int | str"


def to_fraction(value) -> Fraction:
    """Convert ``value`` to an exact :class:`Fraction`.

    Strings are parsed as decimals or ``p/q`` fractions.  Floats are rejected
    because their binary expansion is almost never what the user meant.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not an exact rational: {value!r}") from exc
    if isinstance(value, float):
        raise TypeError(f"refusing binary float {value!r}; pass a decimal string")
    raise TypeError(f"cannot convert {type(value).__name__} to Fraction")


def _is_finite_decimal(q: Fraction) -> bool:
    d = q.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def format_fraction(q: Fraction) -> str:
    """Render ``q`` as a finite decimal when possible, otherwise ``p/q``."""
    if q.denominator == 1:
        return str(q.numerator)
    if not _is_finite_decimal(q):
        return f"{q.numerator}/{q.denominator}"
    sign = "-" if q < 0 else ""
    q = abs(q)
    whole, rem = divmod(q.numerator, q.denominator)
    digits = []
    while rem:
        rem *= 10
        digit, rem = divmod(rem, q.denominator)
        digits.append(str(digit))
    return f"{sign}{whole}.{''.join(digits)}"


def format_float(x: float) -> str:
    """Shortest round-trip decimal string for a binary64 value."""
    x = float(x)
    if x == 0.0:
        return "0.0"
    return repr(x)
