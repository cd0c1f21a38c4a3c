"""Small arithmetic helpers shared by the exact and float code paths.

Values are exact (``int`` / ``Fraction``) whenever the inputs are, and fall
back to ``float`` otherwise.  The type of a returned value is its mode tag.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Union

import numpy as np

Scalar = Union[int, Fraction, float]

# bits of precision used for rational lower bounds of square roots
_SQRT_BITS = 64


def as_fraction(x) -> Fraction:
    """Convert ``x`` to a Fraction; floats go through their shortest repr.

    ``0.6`` becomes ``3/5`` rather than the binary expansion, which is what a
    caller typing ``--p 0.6`` means.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(float(x)))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, np.integer)) and not isinstance(x, bool)


def to_float(x) -> float:
    return float(x)


def sqrt_lower(x: Fraction) -> Fraction:
    """Largest dyadic rational ``r = m / 2**64`` with ``r*r <= x``."""
    if x < 0:
        raise ValueError("negative argument")
    scale = 1 << _SQRT_BITS
    # floor(sqrt(x) * scale) == isqrt(floor(x * scale**2))
    m = math.isqrt((x.numerator * scale * scale) // x.denominator)
    return Fraction(m, scale)


def exact_sqrt(x: Fraction) -> Fraction | None:
    """Return sqrt(x) if it is rational, else None."""
    if x < 0:
        return None
    a, b = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if a * a == x.numerator and b * b == x.denominator:
        return Fraction(a, b)
    return None


def icbrt(n: int) -> int | None:
    """Integer cube root when ``n`` is a perfect cube (n >= 0), else None."""
    if n < 0:
        return None
    r = round(n ** (1.0 / 3.0))
    for c in (r - 1, r, r + 1):
        if c >= 0 and c * c * c == n:
            return c
    return None


def pow_real(base, exponent):
    """``base ** exponent`` that stays exact for rational base and integer exponent."""
    if is_exact(base) and isinstance(exponent, (int, np.integer)):
        return Fraction(base) ** int(exponent)
    return float(base) ** float(exponent)
