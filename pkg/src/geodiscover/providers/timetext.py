"""Rule-based conversion of temporal phrases into concrete intervals.

Handles the date shapes that actually occur in catalog metadata and user
queries: bare years, year-month, calendar dates, ISO timestamps, and ranges
built from any of those. Underspecified boundaries widen outward, so
"from 1990 to 2020" covers 1990-01-01T00:00:00 through 2020-12-31T23:59:59.
"""
from __future__ import annotations

import calendar
import re
from datetime import datetime, timezone

from ..geometry import TimeInterval

# Longest alternatives first so a full timestamp is not consumed as a bare year.
_DATE_TOKEN = re.compile(
    r"\b(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}(?::\d{2})?(?:Z|[+-]\d{2}:\d{2})?"
    r"|\d{4}-\d{2}-\d{2}"
    r"|\d{4}-\d{2}"
    r"|[12]\d{3})\b"
)

_PRESENT = re.compile(r"\b(present|now|ongoing|current|today)\b", re.IGNORECASE)


def _parse_token(token: str, *, end: bool) -> datetime:
    """Parse one date token, widening missing parts toward the interval edge."""
    if "T" in token:
        stamp = token[:-1] + "+00:00" if token.endswith("Z") else token
        parsed = datetime.fromisoformat(stamp)
        if parsed.tzinfo is not None:
            parsed = parsed.astimezone(timezone.utc).replace(tzinfo=None)
        return parsed
    parts = token.split("-")
    if len(parts) == 3:
        year, month, day = int(parts[0]), int(parts[1]), int(parts[2])
        base = datetime(year, month, day)
        return base.replace(hour=23, minute=59, second=59) if end else base
    if len(parts) == 2:
        year, month = int(parts[0]), int(parts[1])
        if end:
            last = calendar.monthrange(year, month)[1]
            return datetime(year, month, last, 23, 59, 59)
        return datetime(year, month, 1)
    year = int(token)
    return datetime(year, 12, 31, 23, 59, 59) if end else datetime(year, 1, 1)


def widen_begin(token: str) -> datetime:
    return _parse_token(token, end=False)


def widen_end(token: str) -> datetime:
    return _parse_token(token, end=True)


def parse_time_text(text: str) -> TimeInterval | None:
    """Extract a concrete interval from free text, or None if there is none.

    The first two date tokens found are treated as the range boundaries; a
    single token yields the interval spanning that whole period. A trailing
    "present"-style word after the first token yields an open-ended interval.
    """
    if not text or not text.strip():
        return None
    tokens = [m.group(1) for m in _DATE_TOKEN.finditer(text)]
    if not tokens:
        return None
    if len(tokens) == 1:
        first_end = _DATE_TOKEN.search(text).end()
        if _PRESENT.search(text[first_end:]):
            return TimeInterval(widen_begin(tokens[0]), None)
        begin, end = widen_begin(tokens[0]), widen_end(tokens[0])
        return TimeInterval(begin, end)
    begin, end = widen_begin(tokens[0]), widen_end(tokens[1])
    if end < begin:
        begin2, end2 = widen_begin(tokens[1]), widen_end(tokens[0])
        if end2 >= begin2:
            return TimeInterval(begin2, end2)
        return None
    return TimeInterval(begin, end)
