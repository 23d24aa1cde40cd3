"""Catalog harvesting over HTTP, with a replay mode for offline runs.

A harvest run walks one catalog's listing (STAC collection pages, CKAN
package_search pages, or a per-document id list for FGDC sources), parses
every document, and feeds the resulting records to a sink callable.
Per-record parse failures are tallied without aborting the run.

Replay mode substitutes a directory of captured responses for the network:
a manifest.json maps canonical request URLs to response files, and the
harvest code path is identical either way.
"""
from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Callable, Protocol
from urllib.parse import urlencode

import requests
import yaml

from .errors import AuthRejected, MalformedDocument, MissingRequiredField, Unreachable
from .parsers import parse_ckan_package, parse_fgdc_record, parse_stac_collection
from .records import HarvestReport, NormalizedRecord, SourceConfig

RecordSink = Callable[[NormalizedRecord], None]


def canonical_url(url: str, params: dict | None = None) -> str:
    """Stable request identity: query parameters appended in sorted key order."""
    if not params:
        return url
    query = urlencode(sorted(params.items()))
    return f"{url}{'&' if '?' in url else '?'}{query}"


class Fetcher(Protocol):
    def get(self, url: str, params: dict | None = None) -> str: ...


class HttpFetcher:
    """Live HTTP with bearer auth, request spacing, and transient retries."""

    def __init__(
        self,
        auth_token: str | None = None,
        rate_limit: float = 10.0,
        timeout: float = 30.0,
        attempts: int = 3,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._session = requests.Session()
        if auth_token:
            self._session.headers["Authorization"] = f"Bearer {auth_token}"
        self._min_interval = 1.0 / rate_limit
        self._timeout = timeout
        self._attempts = attempts
        self._sleep = sleep
        self._last_request = 0.0

    def get(self, url: str, params: dict | None = None) -> str:
        wait = self._min_interval - (time.monotonic() - self._last_request)
        if wait > 0:
            self._sleep(wait)
        failure = ""
        for attempt in range(self._attempts):
            self._last_request = time.monotonic()
            try:
                response = self._session.get(url, params=params, timeout=self._timeout)
            except requests.RequestException as exc:
                failure = str(exc)
            else:
                if response.status_code in (401, 403):
                    raise AuthRejected(f"HTTP {response.status_code} from {url}")
                if response.status_code < 400:
                    return response.text
                if response.status_code < 500:
                    # Client errors will not improve with retries.
                    raise Unreachable(f"HTTP {response.status_code} from {url}")
                failure = f"HTTP {response.status_code}"
            if attempt + 1 < self._attempts:
                self._sleep(0.25 * (2 ** attempt))
        raise Unreachable(f"{url}: {failure} after {self._attempts} attempts")


class ReplayFetcher:
    """Serves captured responses from a directory instead of the network."""

    def __init__(self, root: str | Path):
        self._root = Path(root)
        manifest_path = self._root / "manifest.json"
        if not manifest_path.is_file():
            raise Unreachable(f"replay directory has no manifest.json: {self._root}")
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        self._requests: dict[str, str] = manifest.get("requests", {})

    def get(self, url: str, params: dict | None = None) -> str:
        key = canonical_url(url, params)
        filename = self._requests.get(key)
        if filename is None:
            raise Unreachable(f"no captured response for {key}")
        return (self._root / filename).read_text(encoding="utf-8")


def _next_link(payload: dict) -> str | None:
    for link in payload.get("links") or []:
        if isinstance(link, dict) and link.get("rel") == "next" and link.get("href"):
            return link["href"]
    return None


def _harvest_stac(cfg: SourceConfig, fetcher: Fetcher, sink: RecordSink,
                  report: HarvestReport) -> None:
    url: str | None = cfg.base_url
    params: dict | None = {"limit": cfg.page_size}
    while url:
        try:
            payload = json.loads(fetcher.get(url, params))
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"STAC listing at {url} is not JSON: {exc}") from exc
        for doc in payload.get("collections") or []:
            report.fetched += 1
            native_id = str(doc.get("id", "?")) if isinstance(doc, dict) else "?"
            try:
                sink(parse_stac_collection(doc, cfg.source_id))
                report.parsed_ok += 1
            except (MalformedDocument, MissingRequiredField) as exc:
                report.record_failure(native_id, str(exc))
        url, params = _next_link(payload), None


def _harvest_ckan(cfg: SourceConfig, fetcher: Fetcher, sink: RecordSink,
                  report: HarvestReport) -> None:
    start = 0
    while True:
        params: dict = {"rows": cfg.page_size, "start": start}
        if cfg.dataset_filter:
            params["fq"] = cfg.dataset_filter
        try:
            payload = json.loads(fetcher.get(cfg.base_url, params))
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"CKAN listing is not JSON: {exc}") from exc
        if not payload.get("success", True):
            raise MalformedDocument(f"CKAN API reported failure: {payload.get('error')}")
        result = payload.get("result") or {}
        docs = result.get("results") or []
        for doc in docs:
            report.fetched += 1
            native_id = str(doc.get("name") or doc.get("id") or "?") if isinstance(doc, dict) else "?"
            try:
                sink(parse_ckan_package(doc, cfg.source_id))
                report.parsed_ok += 1
            except (MalformedDocument, MissingRequiredField) as exc:
                report.record_failure(native_id, str(exc))
        start += len(docs)
        if not docs or start >= int(result.get("count", 0)):
            break


def _harvest_fgdc(cfg: SourceConfig, fetcher: Fetcher, sink: RecordSink,
                  report: HarvestReport) -> None:
    for doc_id in cfg.document_ids:
        if "{id}" in cfg.base_url:
            url = cfg.base_url.format(id=doc_id)
        else:
            url = f"{cfg.base_url.rstrip('/')}/{doc_id}"
        report.fetched += 1
        try:
            sink(parse_fgdc_record(fetcher.get(url), cfg.source_id, doc_id))
            report.parsed_ok += 1
        except (MalformedDocument, MissingRequiredField, Unreachable) as exc:
            report.record_failure(doc_id, str(exc))


_HARVESTERS = {"stac": _harvest_stac, "ckan": _harvest_ckan, "fgdc": _harvest_fgdc}


def harvest_catalog(
    cfg: SourceConfig,
    sink: RecordSink,
    fetcher: Fetcher | None = None,
    replay_dir: str | Path | None = None,
) -> HarvestReport:
    """Harvest one source, feeding records to ``sink``; returns the tally."""
    if fetcher is None:
        if replay_dir is not None:
            fetcher = ReplayFetcher(replay_dir)
        else:
            fetcher = HttpFetcher(auth_token=cfg.auth_token, rate_limit=cfg.rate_limit)
    report = HarvestReport(source_id=cfg.source_id)
    _HARVESTERS[cfg.standard](cfg, fetcher, sink, report)
    report.close()
    return report


def load_sources(path: str | Path) -> list[SourceConfig]:
    """Read a sources YAML file into SourceConfig values."""
    with open(path, encoding="utf-8") as fh:
        payload = yaml.safe_load(fh) or {}
    sources = []
    for row in payload.get("sources") or []:
        sources.append(SourceConfig(
            source_id=row["id"],
            standard=row["standard"],
            base_url=row["url"],
            page_size=int(row.get("page_size", 100)),
            auth_token=row.get("auth_token"),
            rate_limit=float(row.get("rate_limit", 10.0)),
            dataset_filter=row.get("filter"),
            document_ids=tuple(row.get("ids", [])),
        ))
    return sources
