"""Shared scalar types for ledger models."""

from __future__ import annotations

from fractions import Fraction
from typing import Annotated

from pydantic import NonNegativeInt
from pydantic import PlainSerializer
from pydantic import PlainValidator
from pydantic import WithJsonSchema

TokenAmount = NonNegativeInt


def to_fraction(value: object) -> Fraction:
    """Accept Fraction, int, "a/b" strings or floats."""
    if isinstance(value, bool):
        msg = "ratio must be numeric"
        raise ValueError(msg)  # noqa: TRY004
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int | str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as e:
            msg = f"invalid ratio: {value!r}"
            raise ValueError(msg) from e
    if isinstance(value, float):
        return Fraction(value).limit_denominator(1_000_000)
    msg = f"invalid ratio: {value!r}"
    raise ValueError(msg)


Ratio = Annotated[
    Fraction,
    PlainValidator(to_fraction),
    PlainSerializer(str, return_type=str, when_used="json"),
    WithJsonSchema({"type": "string", "pattern": r"^-?\d+(/\d+)?$"}),
]
