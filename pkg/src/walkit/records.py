"""Record schema declarations.

A record schema is a ``msgspec.Struct`` subclass. Declaring fields on a
Struct fixes their serialization order (declaration order) and lets both
codecs validate decoded values at native speed. Unsigned 32-bit fields are
declared with the :data:`Uint32` annotated type so range violations are
rejected on decode.
"""

from __future__ import annotations

from typing import Annotated

import msgspec

from .errors import UsageError

# Unsigned 32-bit integer field. Values outside [0, 2**32) fail validation.
Uint32 = Annotated[int, msgspec.Meta(ge=0, le=4294967295)]


class DataPoint(msgspec.Struct):
    """One element of a benchmark record's ``objects`` list."""

    a: Uint32
    b: Uint32


class BenchRecord(msgspec.Struct):
    """Built-in record schema used by the benchmark and the CLI."""

    id: Uint32
    comment: str
    objects: list[DataPoint]


def check_schema(schema: type) -> type:
    """Validate that *schema* is usable as a record schema, returning it."""
    if not (isinstance(schema, type) and issubclass(schema, msgspec.Struct)):
        raise UsageError(
            f"record schema must be a msgspec.Struct subclass, got {schema!r}"
        )
    return schema
