"""Location metadata, visit records, and trajectory construction.

Trajectories keep one multiset of location tokens per time period; the order
inside a period is decided only at realization time, freshly per call.
"""

import csv
from collections import Counter
from dataclasses import dataclass

from .errors import InputError, ParseError, SchemaError

METADATA_HEADER = [
    "id", "name", "latitude", "longitude", "country", "region",
    "sector", "external_population", "general_parent",
]
VISITS_HEADER = ["entity_id", "location_id", "period"]

SECTORS = ("University", "Hospital", "Government", "Other", "Unspecified")


@dataclass(frozen=True)
class LocationRecord:
    """One row of location metadata; empty optionals are None."""

    id: str
    name: str
    latitude: float | None
    longitude: float | None
    country: str
    region: str
    sector: str
    external_population: float | None
    general_parent: str | None


@dataclass(frozen=True)
class Visit:
    entity_id: str
    location_id: str
    period: int


@dataclass(frozen=True)
class Trajectory:
    """One entity's visits, grouped by period, ascending.

    Each group is a (period, tokens) pair where tokens is a sorted tuple
    holding multiplicity; within-period order is meaningless until realize().
    """

    entity_id: str
    groups: tuple[tuple[int, tuple[str, ...]], ...]

    def tokens(self):
        for _, group in self.groups:
            yield from group

    def distinct(self):
        return set(self.tokens())


@dataclass(frozen=True)
class Vocabulary:
    """Token inventory with corpus counts and dense indices."""

    tokens: tuple[str, ...]
    counts: dict
    index: dict

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index


def _parse_float(text, line_num, column):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"line {line_num}: {column} is not a number: {text!r}") from None


def parse_metadata(path):
    """Read a location metadata CSV into LocationRecords.

    Header must be exactly METADATA_HEADER; empty strings mark absent
    optionals; latitude and longitude must be given together or not at all.
    """
    records = []
    seen = set()
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read metadata file: {path}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != METADATA_HEADER:
            raise SchemaError(
                f"metadata header mismatch in {path}: expected "
                f"{','.join(METADATA_HEADER)}"
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(METADATA_HEADER):
                raise ParseError(f"line {line}: expected {len(METADATA_HEADER)} fields, got {len(row)}")
            (loc_id, name, lat, lon, country, region, sector, ext_pop, parent) = row
            if not loc_id:
                raise ParseError(f"line {line}: empty id")
            if loc_id in seen:
                raise SchemaError(f"duplicate location id {loc_id!r} (line {line})")
            seen.add(loc_id)
            if (lat == "") != (lon == ""):
                raise ParseError(f"line {line}: latitude and longitude must be given together")
            latitude = longitude = None
            if lat != "":
                latitude = _parse_float(lat, line, "latitude")
                longitude = _parse_float(lon, line, "longitude")
                if not -90.0 <= latitude <= 90.0:
                    raise ParseError(f"line {line}: latitude {latitude} outside [-90, 90]")
                if not -180.0 <= longitude <= 180.0:
                    raise ParseError(f"line {line}: longitude {longitude} outside [-180, 180]")
            sector = sector or "Unspecified"
            if sector not in SECTORS:
                raise ParseError(f"line {line}: unknown sector {sector!r}")
            population = None
            if ext_pop != "":
                population = _parse_float(ext_pop, line, "external_population")
                if population < 0:
                    raise ParseError(f"line {line}: external_population must be nonnegative")
            records.append(LocationRecord(
                id=loc_id, name=name, latitude=latitude, longitude=longitude,
                country=country, region=region, sector=sector,
                external_population=population, general_parent=parent or None,
            ))
    return records


def parse_visits(path):
    """Read a visits CSV (entity_id, location_id, period) into Visit records."""
    visits = []
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read visits file: {path}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != VISITS_HEADER:
            raise SchemaError(
                f"visits header mismatch in {path}: expected {','.join(VISITS_HEADER)}"
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"line {line}: expected 3 fields, got {len(row)}")
            entity_id, location_id, period = row
            if not entity_id or not location_id:
                raise ParseError(f"line {line}: empty entity_id or location_id")
            try:
                period_int = int(period)
            except ValueError:
                raise ParseError(f"line {line}: period is not an integer: {period!r}") from None
            visits.append(Visit(entity_id, location_id, period_int))
    return visits


def metadata_by_id(records):
    return {record.id: record for record in records}


def build_trajectories(visits):
    """Group visits into one Trajectory per entity, periods ascending.

    Multiplicity is preserved: an entity recorded at A four times in one
    period contributes A four times to that period's group.
    """
    per_entity = {}
    for visit in visits:
        periods = per_entity.setdefault(visit.entity_id, {})
        periods.setdefault(visit.period, []).append(visit.location_id)
    trajectories = []
    for entity_id in sorted(per_entity):
        groups = tuple(
            (period, tuple(sorted(per_entity[entity_id][period])))
            for period in sorted(per_entity[entity_id])
        )
        trajectories.append(Trajectory(entity_id, groups))
    return trajectories


def filter_mobile(trajectories):
    """Keep trajectories touching at least two distinct locations."""
    return [t for t in trajectories if len(t.distinct()) >= 2]


def prune_general(trajectories, metadata):
    """Drop general locations from trajectories where a specific child appears.

    A location's general_parent is removed from a trajectory whenever the
    child is present anywhere in the same trajectory; trajectories holding
    only the parent are left alone.
    """
    if not isinstance(metadata, dict):
        metadata = metadata_by_id(metadata)
    parent_of = {
        loc_id: record.general_parent
        for loc_id, record in metadata.items()
        if record.general_parent
    }
    for start in parent_of:
        node, chain = start, {start}
        while node in parent_of:
            node = parent_of[node]
            if node in chain:
                raise SchemaError(f"cyclic general_parent chain through {start!r}")
            chain.add(node)

    pruned = []
    for trajectory in trajectories:
        present = trajectory.distinct()
        doomed = {
            parent_of[token]
            for token in present
            if token in parent_of and parent_of[token] in present
        }
        if not doomed:
            pruned.append(trajectory)
            continue
        groups = []
        for period, group in trajectory.groups:
            kept = tuple(token for token in group if token not in doomed)
            if kept:
                groups.append((period, kept))
        if groups:
            pruned.append(Trajectory(trajectory.entity_id, tuple(groups)))
    return pruned


def build_vocabulary(trajectories, f_min=50):
    """Count tokens across all groups and keep those appearing >= f_min times.

    Index order is descending count with lexicographic tie-break, so builds
    are deterministic regardless of input order.
    """
    if f_min < 1:
        raise InputError(f"f_min must be >= 1, got {f_min}")
    counter = Counter()
    for trajectory in trajectories:
        counter.update(trajectory.tokens())
    kept = [token for token, count in counter.items() if count >= f_min]
    if not kept:
        raise InputError(f"no token appears at least {f_min} times; vocabulary is empty")
    kept.sort(key=lambda token: (-counter[token], token))
    return Vocabulary(
        tokens=tuple(kept),
        counts={token: counter[token] for token in kept},
        index={token: i for i, token in enumerate(kept)},
    )


def realize(trajectory, vocabulary, rng, collapse_duplicates=False):
    """Flatten a trajectory into a token sequence for one training pass.

    Groups are emitted in period order; tokens within a group get a fresh
    uniform shuffle from rng; out-of-vocabulary tokens are dropped; with
    collapse_duplicates, runs of identical consecutive tokens shrink to one.
    """
    sequence = []
    for _, group in trajectory.groups:
        kept = [token for token in group if token in vocabulary]
        if len(kept) > 1:
            order = rng.permutation(len(kept))
            kept = [kept[i] for i in order]
        sequence.extend(kept)
    if collapse_duplicates:
        collapsed = []
        for token in sequence:
            if not collapsed or collapsed[-1] != token:
                collapsed.append(token)
        sequence = collapsed
    return sequence
