"""FGDC CSDGM XML parser.

Maps the citation title, abstract, originator, theme/place keywords, access
plus use constraints (joined by a newline) as the license, the bounding
coordinates, and the time period (range or single date, with year- and
month-granular dates widened to the full covered span, and a "Present"
ending date meaning open-ended). CSDGM records carry no usable native id,
so the caller supplies one from the source's own id scheme.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET

from ..errors import MalformedDocument, MissingRequiredField
from ..geometry import BBox, TimeInterval
from ..providers.timetext import widen_begin, widen_end
from ..records import LicenseRef, NormalizedRecord, OrgRef, ResourceRef
from .common import coerce_coordinate

_OPEN_END_WORDS = {"present", "now", "ongoing", "current", "unknown"}


def _text(root: ET.Element, path: str) -> str | None:
    node = root.find(path)
    if node is None or node.text is None:
        return None
    text = node.text.strip()
    return text or None


def _date_token(raw: str) -> str | None:
    """Normalize CSDGM calendar dates (YYYY, YYYYMM, YYYYMMDD) to ISO tokens."""
    text = raw.strip()
    if not text:
        return None
    digits = text.replace("-", "")
    if not digits.isdigit():
        return None
    if len(digits) == 4:
        return digits
    if len(digits) == 6:
        return f"{digits[:4]}-{digits[4:6]}"
    if len(digits) == 8:
        return f"{digits[:4]}-{digits[4:6]}-{digits[6:8]}"
    return None


def _space(root: ET.Element, provenance: dict[str, str]) -> BBox | None:
    bounding = root.find("idinfo/spdom/bounding")
    if bounding is None:
        return None
    raw = {side: _text(bounding, f"{side}bc") for side in ("west", "east", "north", "south")}
    coords = {side: coerce_coordinate(value) for side, value in raw.items()}
    if any(v is None for v in coords.values()):
        return None
    try:
        box = BBox(coords["west"], coords["south"], coords["east"], coords["north"])  # type: ignore[arg-type]
    except ValueError:
        return None
    for side in ("west", "east", "north", "south"):
        provenance[f"idinfo.spdom.bounding.{side}bc"] = raw[side] or ""
    return box


def _time(root: ET.Element, provenance: dict[str, str]) -> TimeInterval | None:
    timeinfo = root.find("idinfo/timeperd/timeinfo")
    if timeinfo is None:
        return None
    rng = timeinfo.find("rngdates")
    if rng is not None:
        begin_raw = _text(rng, "begdate") or ""
        end_raw = _text(rng, "enddate") or ""
        begin_token = _date_token(begin_raw)
        if begin_token is None:
            return None
        end_token = None
        open_ended = end_raw.casefold() in _OPEN_END_WORDS or not end_raw
        if not open_ended:
            end_token = _date_token(end_raw)
            if end_token is None:
                return None
        try:
            interval = TimeInterval(
                widen_begin(begin_token),
                widen_end(end_token) if end_token else None,
            )
        except ValueError:
            return None
        provenance["idinfo.timeperd.timeinfo.rngdates.begdate"] = begin_raw
        if end_raw:
            provenance["idinfo.timeperd.timeinfo.rngdates.enddate"] = end_raw
        return interval
    single = _text(timeinfo, "sngdate/caldate")
    if single:
        token = _date_token(single)
        if token is None:
            return None
        try:
            interval = TimeInterval(widen_begin(token), widen_end(token))
        except ValueError:
            return None
        provenance["idinfo.timeperd.timeinfo.sngdate.caldate"] = single
        return interval
    return None


def _resources(root: ET.Element, provenance: dict[str, str]) -> tuple[ResourceRef, ...]:
    resources: list[ResourceRef] = []
    for digform in root.findall("distinfo/stdorder/digform"):
        formname = _text(digform, "digtinfo/formname")
        url = _text(digform, "digtopt/onlinopt/computer/networka/networkr")
        if not url:
            continue
        resources.append(ResourceRef(url=url, title=formname, format=formname))
    if resources:
        provenance["distinfo.stdorder.digform[]"] = ";".join(r.url for r in resources)
    return tuple(resources)


def parse_fgdc_record(doc: str, source_id: str, native_id: str) -> NormalizedRecord:
    try:
        root = ET.fromstring(doc)
    except ET.ParseError as exc:
        raise MalformedDocument(f"not valid XML: {exc}") from exc
    if root.tag != "metadata":
        raise MalformedDocument(f"expected <metadata> root, got <{root.tag}>")
    if not native_id or not native_id.strip():
        raise MissingRequiredField("FGDC record needs a caller-supplied native id")

    title = _text(root, "idinfo/citation/citeinfo/title")
    if not title:
        raise MissingRequiredField(f"FGDC record {native_id!r} has no citation title")
    provenance: dict[str, str] = {"idinfo.citation.citeinfo.title": title}

    description = _text(root, "idinfo/descript/abstract") or ""
    if description:
        provenance["idinfo.descript.abstract"] = description

    organization = None
    originator = _text(root, "idinfo/citation/citeinfo/origin")
    if originator:
        organization = OrgRef(title=originator)
        provenance["idinfo.citation.citeinfo.origin"] = originator

    keywords: list[str] = []
    placekeys: list[str] = []
    for node in root.findall("idinfo/keywords/theme/themekey"):
        if node.text and node.text.strip():
            keywords.append(node.text.strip())
    for node in root.findall("idinfo/keywords/place/placekey"):
        if node.text and node.text.strip():
            placekeys.append(node.text.strip())
    keywords.extend(placekeys)
    if keywords:
        provenance["idinfo.keywords"] = ";".join(keywords)
    if placekeys:
        # Kept separately so enrichment can geocode place keywords directly.
        provenance["idinfo.keywords.place"] = ";".join(placekeys)

    license_ref = None
    constraints = [
        text for text in (_text(root, "idinfo/accconst"), _text(root, "idinfo/useconst"))
        if text
    ]
    if constraints:
        license_ref = LicenseRef(title="\n".join(constraints))
        provenance["idinfo.accconst+useconst"] = "\n".join(constraints)

    url = _text(root, "idinfo/citation/citeinfo/onlink")
    if url:
        provenance["idinfo.citation.citeinfo.onlink"] = url

    return NormalizedRecord(
        source_id=source_id,
        native_id=native_id,
        title=title,
        standard="fgdc",
        description=description,
        url=url,
        organization=organization,
        keywords=tuple(keywords),
        license=license_ref,
        space=_space(root, provenance),
        time=_time(root, provenance),
        resources=_resources(root, provenance),
        raw_provenance=provenance,
    )
