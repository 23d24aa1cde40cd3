"""Temporal phrase parsing: widening, ranges, open ends."""

from __future__ import annotations

from datetime import datetime

import pytest

from geodiscover.providers.timetext import parse_time_text, widen_begin, widen_end


def test_widen_year():
    assert widen_begin("1990") == datetime(1990, 1, 1)
    assert widen_end("1990") == datetime(1990, 12, 31, 23, 59, 59)


def test_widen_year_month():
    assert widen_begin("2004-02") == datetime(2004, 2, 1)
    assert widen_end("2004-02") == datetime(2004, 2, 29, 23, 59, 59)  # leap year
    assert widen_end("2021-04") == datetime(2021, 4, 30, 23, 59, 59)


def test_widen_calendar_date():
    assert widen_begin("2010-07-04") == datetime(2010, 7, 4)
    assert widen_end("2010-07-04") == datetime(2010, 7, 4, 23, 59, 59)


def test_iso_timestamps_kept_exact():
    assert widen_begin("2010-07-04T06:30:15") == datetime(2010, 7, 4, 6, 30, 15)
    assert widen_end("2010-07-04T06:30:15") == datetime(2010, 7, 4, 6, 30, 15)
    assert widen_begin("2010-07-04T06:30") == datetime(2010, 7, 4, 6, 30)
    # Zone designators are folded into UTC.
    assert widen_begin("2010-07-04T06:30:15Z") == datetime(2010, 7, 4, 6, 30, 15)
    assert widen_begin("2010-07-04T06:30:15+02:00") == datetime(2010, 7, 4, 4, 30, 15)


def test_range_from_two_tokens():
    interval = parse_time_text("from 1990 to 2020")
    assert interval is not None
    assert interval.begin.replace(tzinfo=None) == datetime(1990, 1, 1)
    assert interval.end.replace(tzinfo=None) == datetime(2020, 12, 31, 23, 59, 59)


def test_extra_tokens_beyond_two_are_ignored():
    interval = parse_time_text("1990 to 2000, revised 2005")
    assert interval.end.replace(tzinfo=None) == datetime(2000, 12, 31, 23, 59, 59)


def test_single_token_spans_whole_period():
    interval = parse_time_text("observations during 2004-02")
    assert interval.begin.replace(tzinfo=None) == datetime(2004, 2, 1)
    assert interval.end.replace(tzinfo=None) == datetime(2004, 2, 29, 23, 59, 59)


@pytest.mark.parametrize("word", ["present", "now", "ongoing", "current", "today"])
def test_trailing_present_word_opens_the_interval(word: str):
    interval = parse_time_text(f"1981 to {word}")
    assert interval.begin.replace(tzinfo=None) == datetime(1981, 1, 1)
    assert interval.end is None


def test_present_word_before_the_token_does_not_open():
    interval = parse_time_text("currently covering 2001")
    assert interval.end is not None


def test_reversed_range_is_swapped():
    interval = parse_time_text("2020 back to 1990")
    assert interval.begin.replace(tzinfo=None) == datetime(1990, 1, 1)
    assert interval.end.replace(tzinfo=None) == datetime(2020, 12, 31, 23, 59, 59)


def test_no_dates_means_no_interval():
    assert parse_time_text("recent measurements") is None
    assert parse_time_text("") is None
    assert parse_time_text("   ") is None


def test_full_timestamp_not_consumed_as_year():
    interval = parse_time_text("1990-06-15T12:00:00 to 1991-01-01T00:00:00")
    assert interval.begin.replace(tzinfo=None) == datetime(1990, 6, 15, 12, 0, 0)
    assert interval.end.replace(tzinfo=None) == datetime(1991, 1, 1)
