"""City-level gazetteer: locations, venue names and great-circle distances.

A gazetteer is loaded from a tab separated file with one location per line::

    city<TAB>region<TAB>lat<TAB>lon

Every distinct normalized city name becomes a venue whose referents are all
locations sharing that name, so ``"princeton"`` resolves to every Princeton.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

EARTH_RADIUS_MILES = 3958.8

US_STATES = {
    "AL": "Alabama", "AK": "Alaska", "AZ": "Arizona", "AR": "Arkansas",
    "CA": "California", "CO": "Colorado", "CT": "Connecticut",
    "DE": "Delaware", "DC": "District of Columbia", "FL": "Florida",
    "GA": "Georgia", "HI": "Hawaii", "ID": "Idaho", "IL": "Illinois",
    "IN": "Indiana", "IA": "Iowa", "KS": "Kansas", "KY": "Kentucky",
    "LA": "Louisiana", "ME": "Maine", "MD": "Maryland",
    "MA": "Massachusetts", "MI": "Michigan", "MN": "Minnesota",
    "MS": "Mississippi", "MO": "Missouri", "MT": "Montana",
    "NE": "Nebraska", "NV": "Nevada", "NH": "New Hampshire",
    "NJ": "New Jersey", "NM": "New Mexico", "NY": "New York",
    "NC": "North Carolina", "ND": "North Dakota", "OH": "Ohio",
    "OK": "Oklahoma", "OR": "Oregon", "PA": "Pennsylvania",
    "RI": "Rhode Island", "SC": "South Carolina", "SD": "South Dakota",
    "TN": "Tennessee", "TX": "Texas", "UT": "Utah", "VT": "Vermont",
    "VA": "Virginia", "WA": "Washington", "WV": "West Virginia",
    "WI": "Wisconsin", "WY": "Wyoming", "PR": "Puerto Rico",
}
_STATE_BY_NAME = {name.lower(): abbr for abbr, name in US_STATES.items()}

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)
_SPACE = re.compile(r"\s+")


class GazetteerError(ValueError):
    """Raised for malformed gazetteer input."""


def normalize_name(text: str) -> str:
    """Lowercase, strip punctuation and collapse whitespace."""
    text = _PUNCT.sub(" ", text.lower())
    return _SPACE.sub(" ", text).strip()


def _region_key(region: str) -> str:
    """Canonical lookup key for a region: its abbreviation when known."""
    r = region.strip()
    if r.upper() in US_STATES:
        return r.upper()
    by_name = _STATE_BY_NAME.get(normalize_name(r))
    if by_name is not None:
        return by_name
    return normalize_name(r)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or math.isnan(self.lat):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0) or math.isnan(self.lon):
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class Location:
    loc_id: int
    city_name: str
    region: str
    point: GeoPoint

    @property
    def label(self) -> str:
        return f"{self.city_name}, {self.region}"


@dataclass(frozen=True)
class Venue:
    venue_id: int
    name: str
    referent_locs: frozenset


def distance(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine great-circle distance in miles."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    h = min(1.0, max(0.0, h))
    return 2.0 * EARTH_RADIUS_MILES * math.asin(math.sqrt(h))


def distance_matrix(lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
    """Pairwise haversine distances (miles) between two coordinate vectors."""
    lat = np.radians(np.asarray(lat, dtype=float))
    lon = np.radians(np.asarray(lon, dtype=float))
    dphi = lat[None, :] - lat[:, None]
    dlmb = lon[None, :] - lon[:, None]
    h = np.sin(dphi / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlmb / 2) ** 2
    d = 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    np.fill_diagonal(d, 0.0)
    return d


@dataclass
class Gazetteer:
    locations: list
    venues: list
    _loc_index: dict = field(default_factory=dict, repr=False)
    _venue_index: dict = field(default_factory=dict, repr=False)
    _by_city: dict = field(default_factory=dict, repr=False)
    _dist: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for loc in self.locations:
            key = (normalize_name(loc.city_name), _region_key(loc.region))
            if key in self._loc_index:
                raise GazetteerError(f"duplicate location {loc.label!r}")
            self._loc_index[key] = loc.loc_id
            self._by_city.setdefault(key[0], []).append(loc.loc_id)
        n = len(self.locations)
        for v in self.venues:
            if not v.referent_locs or any(not 0 <= l < n for l in v.referent_locs):
                raise GazetteerError(f"venue {v.name!r} has invalid referents")
            self._venue_index[v.name] = v.venue_id

    @classmethod
    def from_records(cls, records: Iterable) -> "Gazetteer":
        """Build from ``(city, region, lat, lon)`` tuples in loc_id order."""
        locations = []
        for i, (city, region, lat, lon) in enumerate(records):
            locations.append(Location(i, city.strip(), region.strip(), GeoPoint(float(lat), float(lon))))
        names: dict = {}
        for loc in locations:
            names.setdefault(normalize_name(loc.city_name), []).append(loc.loc_id)
        venues = [Venue(k, name, frozenset(ids)) for k, (name, ids) in enumerate(names.items())]
        return cls(locations, venues)

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def n_venues(self) -> int:
        return len(self.venues)

    def venue_id(self, name: str) -> Optional[int]:
        return self._venue_index.get(normalize_name(name))

    def lookup(self, city: str, region: str) -> Optional[int]:
        return self._loc_index.get((normalize_name(city), _region_key(region)))

    def label(self, loc_id: int) -> str:
        return self.locations[loc_id].label

    def coords(self) -> tuple:
        lat = np.array([l.point.lat for l in self.locations])
        lon = np.array([l.point.lon for l in self.locations])
        return lat, lon

    def distances(self) -> np.ndarray:
        """Dense |L| x |L| distance matrix, computed once."""
        if self._dist is None:
            self._dist = distance_matrix(*self.coords())
        return self._dist

    def dist(self, a: int, b: int) -> float:
        if self._dist is not None:
            return float(self._dist[a, b])
        return distance(self.locations[a].point, self.locations[b].point)

    def write(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("city\tregion\tlat\tlon\n")
            for loc in self.locations:
                fh.write(f"{loc.city_name}\t{loc.region}\t{loc.point.lat!r}\t{loc.point.lon!r}\n")


def load_gazetteer(source) -> Gazetteer:
    """Load a gazetteer from a path, an open file or an iterable of lines.

    A first line whose latitude field is not numeric is treated as a header.
    """
    if isinstance(source, str) and "\n" in source:
        source = io.StringIO(source)
    elif isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return load_gazetteer(fh)
    records = []
    seen = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise GazetteerError(f"line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
        city, region, lat_s, lon_s = parts
        try:
            lat, lon = float(lat_s), float(lon_s)
        except ValueError:
            if lineno == 1 and not records:
                continue
            raise GazetteerError(f"line {lineno}: unparseable coordinates {lat_s!r}, {lon_s!r}") from None
        try:
            GeoPoint(lat, lon)
        except ValueError as exc:
            raise GazetteerError(f"line {lineno}: {exc}") from None
        key = (normalize_name(city), _region_key(region))
        if key in seen:
            raise GazetteerError(f"line {lineno}: duplicate location {city}, {region} (first on line {seen[key]})")
        seen[key] = lineno
        records.append((city, region, lat, lon))
    return Gazetteer.from_records(records)


def resolve_venue(name: str, g: Gazetteer) -> set:
    vid = g.venue_id(name)
    if vid is None:
        return set()
    return set(g.venues[vid].referent_locs)


def parse_profile_location(text: str, g: Gazetteer) -> Optional[int]:
    """Map free profile text of the form ``"City, ST"`` or ``"City, State"``
    to a loc_id. Anything that is not city-level and unambiguous gives None.
    """
    if not text or "," not in text:
        return None
    city, _, region = text.rpartition(",")
    if not city.strip() or not region.strip():
        return None
    return g.lookup(city, region)


def bundled_gazetteer_path() -> Path:
    """Small US city gazetteer shipped with the package."""
    return Path(__file__).parent / "data" / "us_cities.tsv"
