"""Shared plumbing: error types, exact-rational serialization, seeded substreams."""

from __future__ import annotations

import hashlib
from fractions import Fraction


class ValidationError(ValueError):
    """An input violates a documented precondition or a file schema."""


class InternalCheckError(AssertionError):
    """A guaranteed bound or structural invariant failed at runtime.

    Reaching this indicates a bug in the library (or a falsified guarantee),
    never a user error.  The CLI maps it to exit code 2.
    """


def rat_to_str(x) -> str:
    """Serialize an exact rational as ``"num/den"`` (always with denominator)."""
    f = Fraction(x)
    return f"{f.numerator}/{f.denominator}"


def rat_from_str(s) -> Fraction:
    """Parse a rational serialized by :func:`rat_to_str` (ints also accepted)."""
    if isinstance(s, int):
        return Fraction(s)
    if not isinstance(s, str):
        raise ValidationError(f"expected rational string, got {type(s).__name__}")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"bad rational literal {s!r}: {exc}") from None


def substream_seed(seed: int, name: str) -> int:
    """Derive a stable 63-bit seed for a named random substream.

    Stable across processes and platforms (unlike ``hash``).
    """
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
