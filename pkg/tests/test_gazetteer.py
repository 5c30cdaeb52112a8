import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoprofile.gazetteer import (
    EARTH_RADIUS_MILES,
    Gazetteer,
    GazetteerError,
    GeoPoint,
    bundled_gazetteer_path,
    distance,
    distance_matrix,
    load_gazetteer,
    normalize_name,
    parse_profile_location,
    resolve_venue,
)


@pytest.fixture(scope="module")
def us():
    return load_gazetteer(bundled_gazetteer_path())


points = st.builds(GeoPoint, st.floats(-90, 90), st.floats(-180, 180))


def test_three_distinct_rows():
    g = load_gazetteer("A\tX\t1\t1\nB\tX\t2\t2\nC\tY\t3\t3\n")
    assert g.n_locations == 3 and g.n_venues == 3
    assert all(len(v.referent_locs) == 1 for v in g.venues)


def test_princeton_has_nineteen_referents(us):
    assert len(resolve_venue("princeton", us)) == 19
    assert len(us.venues[us.venue_id("Princeton")].referent_locs) == 19


def test_header_is_optional():
    with_header = load_gazetteer("city\tregion\tlat\tlon\nA\tX\t1\t1\n")
    without = load_gazetteer("A\tX\t1\t1\n")
    assert with_header.locations == without.locations


@pytest.mark.parametrize("text, fragment", [
    ("A\tX\t91\t0\n", "line 1"),
    ("A\tX\t1\t1\nB\tX\tabc\t1\n", "line 2"),
    ("A\tX\t1\n", "line 1"),
    ("A\tX\t1\t1\nA\tX\t2\t2\n", "duplicate"),
    ("A\tCA\t1\t1\na\tCalifornia\t2\t2\n", "duplicate"),
])
def test_load_errors(text, fragment):
    with pytest.raises(GazetteerError, match=fragment):
        load_gazetteer(text)


def test_load_from_path_and_write_round_trip(tmp_path, us):
    p = tmp_path / "g.tsv"
    us.write(p)
    again = load_gazetteer(p)
    assert again.locations == us.locations
    assert [v.name for v in again.venues] == [v.name for v in us.venues]


def test_distance_examples():
    a = GeoPoint(0, 0)
    assert distance(a, a) == 0.0
    assert distance(a, GeoPoint(0, 1)) == pytest.approx(2 * math.pi * EARTH_RADIUS_MILES / 360, abs=1e-9)
    assert distance(a, GeoPoint(0, 1)) == pytest.approx(69.09, abs=0.01)
    # antipodal: half the great circle
    assert distance(a, GeoPoint(0, 180)) == pytest.approx(math.pi * 3958.8, abs=1e-6)


def test_geopoint_bounds():
    with pytest.raises(ValueError):
        GeoPoint(91, 0)
    with pytest.raises(ValueError):
        GeoPoint(0, -180.5)


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_distance_symmetric_non_negative(a, b):
    assert distance(a, b) == pytest.approx(distance(b, a), abs=1e-9)
    assert distance(a, b) >= 0


@settings(max_examples=300, deadline=None)
@given(points, points, points)
def test_triangle_inequality(a, b, c):
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-6


def test_distance_matrix_matches_scalar(us):
    lat, lon = us.coords()
    D = distance_matrix(lat, lon)
    for i in (0, 5, 20):
        for j in (1, 7, 30):
            assert D[i, j] == pytest.approx(distance(us.locations[i].point, us.locations[j].point), abs=1e-6)
    assert (D.diagonal() == 0).all()


def test_resolve_venue(us):
    assert resolve_venue("nowhere at all", us) == set()
    assert resolve_venue("austin", us) == {us.lookup("Austin", "TX")}


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["princeton", "springfield", "portland", "los angeles", "miami", "nope"]))
def test_resolve_matches_normalized_city(name):
    g = load_gazetteer(bundled_gazetteer_path())
    expected = {l.loc_id for l in g.locations if normalize_name(l.city_name) == name}
    assert resolve_venue(name, g) == expected


@pytest.mark.parametrize("text, expected", [
    ("Los Angeles, CA", ("Los Angeles", "CA")),
    ("los angeles, california", ("Los Angeles", "CA")),
    ("Princeton, New Jersey", ("Princeton", "NJ")),
    ("St. Louis, MO", ("St. Louis", "MO")),
])
def test_parse_profile_location(us, text, expected):
    assert parse_profile_location(text, us) == us.lookup(*expected)


@pytest.mark.parametrize("text", ["my home", "CA", "", "Atlantis, CA", ", CA", "Princeton"])
def test_parse_profile_location_absent(us, text):
    assert parse_profile_location(text, us) is None


def test_normalize_name():
    assert normalize_name("  St. Louis ") == "st louis"
    assert normalize_name("LOS   Angeles") == "los angeles"


def test_from_records_shared_names():
    g = Gazetteer.from_records([("Springfield", "IL", 39.8, -89.6), ("Springfield", "MO", 37.2, -93.3)])
    assert g.n_venues == 1
    assert g.venues[0].referent_locs == frozenset({0, 1})
    assert g.label(1) == "Springfield, MO"
