"""Catalog harvesting: pagination, replay capture, and HTTP failure policy."""

from __future__ import annotations

import json

import pytest
import requests

from conftest import fixture_path
from geodiscover.errors import AuthRejected, Unreachable
from geodiscover.harvest import (
    HttpFetcher,
    ReplayFetcher,
    canonical_url,
    harvest_catalog,
    load_sources,
)


def test_canonical_url_sorts_params():
    assert canonical_url("https://x.test/api") == "https://x.test/api"
    assert canonical_url("https://x.test/api", {"rows": 10, "fq": "a b"}) == \
        "https://x.test/api?fq=a+b&rows=10"
    assert canonical_url("https://x.test/api?v=1", {"b": 2}) == \
        "https://x.test/api?v=1&b=2"


def test_replay_fetcher_requires_manifest(tmp_path):
    with pytest.raises(Unreachable):
        ReplayFetcher(tmp_path)

    (tmp_path / "manifest.json").write_text(
        json.dumps({"requests": {"https://x.test/a?p=1": "a.json"}}),
        encoding="utf-8")
    (tmp_path / "a.json").write_text('{"ok": true}', encoding="utf-8")
    fetcher = ReplayFetcher(tmp_path)
    assert fetcher.get("https://x.test/a", {"p": 1}) == '{"ok": true}'
    with pytest.raises(Unreachable):
        fetcher.get("https://x.test/never-captured")


def test_load_sources_reads_fixture_config():
    sources = {cfg.source_id: cfg for cfg in load_sources(fixture_path("sources.yaml"))}
    assert set(sources) == {"openeo", "datagov", "usgs-fgdc"}
    assert sources["openeo"].standard == "stac"
    assert sources["openeo"].page_size == 10
    assert sources["datagov"].standard == "ckan"
    assert sources["usgs-fgdc"].standard == "fgdc"
    assert len(sources["usgs-fgdc"].document_ids) == 9


def test_stac_harvest_follows_next_links():
    cfg = next(c for c in load_sources(fixture_path("sources.yaml"))
               if c.source_id == "openeo")
    records = []
    report = harvest_catalog(cfg, records.append,
                             replay_dir=fixture_path("replay", "openeo"))
    # Two pages; one collection lacks an id and is tallied as a failure.
    assert report.fetched == 13
    assert report.parsed_ok == 12 == len(records)
    assert [reason for _, reason in report.parse_failures] == \
        ["STAC collection has no id"]
    assert all(r.standard == "stac" and r.source_id == "openeo" for r in records)
    assert "openeo::prism-daily-and" in {r.identity for r in records}


def test_ckan_harvest_pages_until_count():
    cfg = next(c for c in load_sources(fixture_path("sources.yaml"))
               if c.source_id == "datagov")
    records = []
    report = harvest_catalog(cfg, records.append,
                             replay_dir=fixture_path("replay", "datagov"))
    assert (report.fetched, report.parsed_ok) == (18, 18)
    assert len({r.identity for r in records}) == 18


def test_fgdc_harvest_fetches_each_document():
    cfg = next(c for c in load_sources(fixture_path("sources.yaml"))
               if c.source_id == "usgs-fgdc")
    records = []
    report = harvest_catalog(cfg, records.append,
                             replay_dir=fixture_path("replay", "usgs-fgdc"))
    assert report.fetched == 9
    assert report.parsed_ok == 8
    assert report.parse_failures[0][0] == "broken-xml"


def test_replay_of_all_sources_yields_the_known_corpus():
    records = []
    for cfg in load_sources(fixture_path("sources.yaml")):
        harvest_catalog(cfg, records.append,
                        replay_dir=fixture_path("replay", cfg.source_id))
    assert len(records) == 38
    assert len({r.identity for r in records}) == 38


class _Response:
    def __init__(self, status_code: int, text: str = ""):
        self.status_code = status_code
        self.text = text


class _StubSession:
    """Scripted requests.Session stand-in; records calls, pops canned replies."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.headers: dict[str, str] = {}
        self.calls: list[tuple[str, dict | None]] = []

    def get(self, url, params=None, timeout=None):
        self.calls.append((url, params))
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


def make_fetcher(replies, **kwargs) -> tuple[HttpFetcher, _StubSession]:
    fetcher = HttpFetcher(sleep=lambda _: None, **kwargs)
    stub = _StubSession(replies)
    stub.headers.update(fetcher._session.headers)
    fetcher._session = stub
    return fetcher, stub


def test_http_fetcher_sends_bearer_token():
    fetcher, stub = make_fetcher([_Response(200, "ok")], auth_token="sekrit")
    assert fetcher.get("https://x.test/a") == "ok"
    assert stub.headers["Authorization"] == "Bearer sekrit"


def test_http_fetcher_auth_rejection_is_not_retried():
    fetcher, stub = make_fetcher([_Response(401)])
    with pytest.raises(AuthRejected):
        fetcher.get("https://x.test/a")
    assert len(stub.calls) == 1

    fetcher, stub = make_fetcher([_Response(403)])
    with pytest.raises(AuthRejected):
        fetcher.get("https://x.test/a")


def test_http_fetcher_client_errors_fail_fast():
    fetcher, stub = make_fetcher([_Response(404)])
    with pytest.raises(Unreachable):
        fetcher.get("https://x.test/gone")
    assert len(stub.calls) == 1


def test_http_fetcher_retries_server_errors():
    fetcher, stub = make_fetcher(
        [_Response(503), _Response(503), _Response(200, "finally")])
    assert fetcher.get("https://x.test/a") == "finally"
    assert len(stub.calls) == 3

    fetcher, stub = make_fetcher([_Response(500)] * 3)
    with pytest.raises(Unreachable):
        fetcher.get("https://x.test/a")
    assert len(stub.calls) == 3


def test_http_fetcher_retries_connection_failures():
    fetcher, stub = make_fetcher(
        [requests.ConnectionError("refused"), _Response(200, "up")])
    assert fetcher.get("https://x.test/a") == "up"
