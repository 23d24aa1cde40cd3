"""Spatial and temporal primitives plus the overlap F1 math used for relevance scoring.

Bounding boxes are WGS84 lon/lat degree rectangles and all areas are planar
degree-rectangle areas. Durations are exact seconds between UTC instants.
Both choices were validated against the published per-dataset score fixtures
before anything else was built on top of them.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone


@dataclass(frozen=True)
class BBox:
    """Axis-aligned lon/lat rectangle [west, south, east, north].

    A box with west > east is the normalized form of an antimeridian-crossing
    extent; ``parts()`` expands it into at most two plain rectangles and every
    measure sums over the parts.
    """

    west: float
    south: float
    east: float
    north: float

    def __post_init__(self) -> None:
        if not (-180.0 <= self.west <= 180.0 and -180.0 <= self.east <= 180.0):
            raise ValueError(f"longitude out of range: west={self.west} east={self.east}")
        if not (-90.0 <= self.south <= self.north <= 90.0):
            raise ValueError(f"latitude out of range: south={self.south} north={self.north}")

    @property
    def crosses_antimeridian(self) -> bool:
        return self.west > self.east

    def parts(self) -> tuple[BBox, ...]:
        """Expand into 1 or 2 west<=east rectangles."""
        if not self.crosses_antimeridian:
            return (self,)
        return (
            BBox(self.west, self.south, 180.0, self.north),
            BBox(-180.0, self.south, self.east, self.north),
        )

    def as_list(self) -> list[float]:
        return [self.west, self.south, self.east, self.north]


#: Sentinel meaning "this interval has no declared end" (dataset still growing).
OPEN_ENDED = None


@dataclass(frozen=True)
class TimeInterval:
    """Closed UTC interval at second resolution; ``end=None`` is open-ended."""

    begin: datetime
    end: datetime | None

    def __post_init__(self) -> None:
        object.__setattr__(self, "begin", _as_utc(self.begin))
        if self.end is not None:
            object.__setattr__(self, "end", _as_utc(self.end))
            if self.begin > self.end:
                raise ValueError(f"interval begins after it ends: {self.begin} > {self.end}")

    @property
    def is_open(self) -> bool:
        return self.end is None

    def closed(self, clamp: datetime) -> TimeInterval:
        """Resolve an open end to ``clamp`` (normally the graph build instant)."""
        if self.end is not None:
            return self
        clamp = _as_utc(clamp)
        return TimeInterval(self.begin, max(self.begin, clamp))

    def duration_seconds(self) -> float:
        if self.end is None:
            raise ValueError("open-ended interval has no duration; clamp it first")
        return (self.end - self.begin).total_seconds()


@dataclass(frozen=True)
class OverlapScore:
    """Precision/recall/F1 of a coverage overlap, each in [0, 1]."""

    precision: float
    recall: float
    f1: float


def _as_utc(value: datetime) -> datetime:
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


def _harmonic_f1(precision: float, recall: float) -> float:
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _simple_intersection(a: BBox, b: BBox) -> BBox | None:
    # Both operands must be plain (west <= east) rectangles.
    west = max(a.west, b.west)
    south = max(a.south, b.south)
    east = min(a.east, b.east)
    north = min(a.north, b.north)
    if west > east or south > north:
        return None
    return BBox(west, south, east, north)


def bbox_area(box: BBox) -> float:
    """Planar degree-rectangle area; wrap boxes sum their parts."""
    return sum((p.east - p.west) * (p.north - p.south) for p in box.parts())


def bbox_overlap_area(a: BBox, b: BBox) -> float:
    """Exact overlap area, summing over all part pairs."""
    total = 0.0
    for pa in a.parts():
        for pb in b.parts():
            piece = _simple_intersection(pa, pb)
            if piece is not None:
                total += bbox_area(piece)
    return total


def bbox_intersection(a: BBox, b: BBox) -> BBox | None:
    """Overlapping rectangle of two boxes, or None when disjoint.

    Touching edges yield a degenerate zero-area box. When both operands wrap
    the antimeridian the overlap can itself wrap; two overlap pieces adjacent
    at +/-180 are merged back into wrap form. In the rare case of two pieces
    that are not adjacent there (not representable as a single box) the larger
    piece is returned; area-based scoring uses bbox_overlap_area and is exact
    regardless.
    """
    pieces: list[BBox] = []
    for pa in a.parts():
        for pb in b.parts():
            piece = _simple_intersection(pa, pb)
            if piece is not None:
                pieces.append(piece)
    if not pieces:
        return None
    if len(pieces) == 1:
        return pieces[0]
    pieces.sort(key=lambda p: p.west)
    west_piece, east_piece = pieces[0], pieces[-1]
    if west_piece.east >= 180.0 and east_piece.west <= -180.0:
        # Should not happen with normalized parts, guard anyway.
        pass
    if east_piece.east == 180.0 and west_piece.west == -180.0:
        return BBox(east_piece.west, min(p.south for p in pieces), west_piece.east,
                    max(p.north for p in pieces))
    return max(pieces, key=lambda p: (bbox_area(p), -p.west))


def spatial_f1(dataset: BBox, query: BBox) -> OverlapScore:
    """Coverage-overlap F1 between a dataset footprint and a query region.

    precision = overlap area / dataset area, recall = overlap / query area.
    Degenerate (zero-area) geometry: the degenerate side scores 1 on its own
    axis when it lies inside the other operand, 0 otherwise; two equal
    degenerate boxes count as a perfect match.
    """
    overlap = bbox_overlap_area(dataset, query)
    dataset_area = bbox_area(dataset)
    query_area = bbox_area(query)

    if dataset_area == 0.0 and query_area == 0.0:
        if dataset == query:
            return OverlapScore(1.0, 1.0, 1.0)
        return OverlapScore(0.0, 0.0, 0.0)
    if dataset_area == 0.0:
        precision = 1.0 if intersects(dataset, query) else 0.0
        return OverlapScore(precision, 0.0, 0.0)
    if query_area == 0.0:
        recall = 1.0 if intersects(dataset, query) else 0.0
        return OverlapScore(0.0, recall, 0.0)

    precision = overlap / dataset_area
    recall = overlap / query_area
    return OverlapScore(precision, recall, _harmonic_f1(precision, recall))


def temporal_f1(
    dataset: TimeInterval,
    query: TimeInterval,
    clamp: datetime | None = None,
) -> OverlapScore:
    """Coverage-overlap F1 between time spans, durations in exact seconds.

    Open-ended interval ends must be resolved by ``clamp`` (the graph build
    instant); passing an open interval without one is an error.
    """
    if dataset.is_open or query.is_open:
        if clamp is None:
            raise ValueError("open-ended interval requires a clamp instant")
        dataset = dataset.closed(clamp)
        query = query.closed(clamp)

    lo = max(dataset.begin, query.begin)
    hi = min(dataset.end, query.end)  # type: ignore[type-var]
    overlap = max(0.0, (hi - lo).total_seconds())
    dataset_dur = dataset.duration_seconds()
    query_dur = query.duration_seconds()

    if dataset_dur == 0.0 and query_dur == 0.0:
        if dataset == query:
            return OverlapScore(1.0, 1.0, 1.0)
        return OverlapScore(0.0, 0.0, 0.0)
    if dataset_dur == 0.0:
        precision = 1.0 if intersects(dataset, query) else 0.0
        return OverlapScore(precision, 0.0, 0.0)
    if query_dur == 0.0:
        recall = 1.0 if intersects(dataset, query) else 0.0
        return OverlapScore(0.0, recall, 0.0)

    precision = overlap / dataset_dur
    recall = overlap / query_dur
    return OverlapScore(precision, recall, _harmonic_f1(precision, recall))


def intersects(a: BBox | TimeInterval, b: BBox | TimeInterval) -> bool:
    """Closed-interval overlap test: touching boundaries count."""
    if isinstance(a, BBox) and isinstance(b, BBox):
        for pa in a.parts():
            for pb in b.parts():
                if (pa.west <= pb.east and pb.west <= pa.east
                        and pa.south <= pb.north and pb.south <= pa.north):
                    return True
        return False
    if isinstance(a, TimeInterval) and isinstance(b, TimeInterval):
        a_end = a.end
        b_end = b.end
        if (a_end is None or b.begin <= a_end) and (b_end is None or a.begin <= b_end):
            return True
        return False
    raise TypeError(f"mismatched operand kinds: {type(a).__name__} vs {type(b).__name__}")
