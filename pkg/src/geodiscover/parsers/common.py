"""Shared coercion helpers for the catalog parsers."""
from __future__ import annotations

import re

_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?")


def coerce_coordinate(value: object) -> float | None:
    """Best-effort numeric coordinate; None when unparseable (never an error)."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        # Tolerate unicode minus and trailing units/whitespace.
        text = value.strip().replace("−", "-")
        match = _NUMBER.match(text)
        if match:
            return float(match.group(0))
    return None
