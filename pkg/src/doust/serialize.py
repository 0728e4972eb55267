"""JSON and CSV emission helpers with round-trip-exact float formatting.

All floats are written with 17 significant digits, which is enough for a
binary64 value to survive text round trips bit-for-bit.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np


def format_float(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"cannot serialize non-finite float {value!r}")
    return format(float(value), ".17g")


def _encode(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        import json

        return json.dumps(value)
    if isinstance(value, dict):
        items = ",".join(f"{_encode(str(k))}:{_encode(v)}" for k, v in value.items())
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_json(payload: Any) -> str:
    """json.dumps equivalent that pins float formatting to 17 significant
    digits instead of shortest round-trip repr."""
    return _encode(payload)


def csv_cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if value is None:
        return ""
    return str(value)
