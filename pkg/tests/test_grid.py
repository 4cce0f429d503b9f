import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridbp.grid import (
    ExtentError,
    GridParseError,
    MgrsGrid,
    MgrsId,
    PlanarGrid,
    PlanarId,
    center_of,
    common_prefix_strip,
    decode_keys,
    encode_cells,
    format_id,
    format_mgrs,
    id_of,
    offset_id,
    parse_mgrs,
    parse_planar,
)

mgrs = pytest.importorskip("mgrs")
utm = pytest.importorskip("utm")

COLS = "ABCDEFGHJKLMNPQRSTUVWXYZ"
ROWS = "ABCDEFGHJKLMNPQRSTUV"
BANDS = "CDEFGHJKLMNPQRSTUVWX"


# -- planar ------------------------------------------------------------------


@pytest.mark.parametrize("p, d, expected", [
    ((0.5, 0.5), 1.0, (0, 0)),
    ((1.0, 0.0), 1.0, (1, 0)),
    ((5.3, 3.9), 2.0, (2, 1)),
])
def test_id_of_planar(p, d, expected):
    assert id_of(p, PlanarGrid(cell_size=d)) == PlanarId(*expected)


@pytest.mark.parametrize("gid, d, expected", [
    ((0, 0), 1.0, (0.5, 0.5)),
    ((3, 7), 1.0, (3.5, 7.5)),
    ((2, 1), 2.0, (5.0, 3.0)),
])
def test_center_of_planar(gid, d, expected):
    np.testing.assert_allclose(center_of(PlanarId(*gid), PlanarGrid(cell_size=d)), expected)


def test_planar_offset():
    assert offset_id(PlanarId(2, 3), 1, -1, PlanarGrid()) == PlanarId(3, 2)


def test_planar_origin_shifts_lattice():
    g = PlanarGrid(cell_size=2.0, origin=(10.0, -4.0))
    assert id_of((10.0, -4.0), g) == PlanarId(0, 0)
    np.testing.assert_allclose(center_of(PlanarId(1, 1), g), (13.0, -1.0))


def test_planar_extent():
    g = PlanarGrid(shape=(10, 10))
    with pytest.raises(ExtentError):
        id_of((10.0, 5.0), g)
    with pytest.raises(ExtentError):
        offset_id(PlanarId(9, 9), 1, 0, g)
    with pytest.raises(ExtentError):
        id_of((-0.1, 5.0), g)


def test_planar_text_round_trip():
    pid = PlanarId(-3, 12)
    assert str(pid) == "c:-3,r:12"
    assert parse_planar(format_id(pid)) == pid
    with pytest.raises(GridParseError):
        parse_planar("c:1;r:2")


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.sampled_from([0.5, 1.0, 2.0, 10.0]))
def test_planar_point_round_trip(x, y, d):
    g = PlanarGrid(cell_size=d)
    c = center_of(id_of((x, y), g), g)
    assert np.max(np.abs(c - (x, y))) <= d / 2 + 1e-9


@settings(max_examples=200, deadline=None)
@given(*[st.integers(-50, 50)] * 6)
def test_planar_group_action(e, n, a, b, c, d):
    g = PlanarGrid()
    x = PlanarId(e, n)
    assert offset_id(offset_id(x, a, b, g), c, d, g) == offset_id(x, a + c, b + d, g)
    assert offset_id(offset_id(x, a, b, g), -a, -b, g) == x
    assert offset_id(x, 0, 0, g) == x


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(1 - 2**30, 2**30 - 1), st.integers(1 - 2**30, 2**30 - 1)),
                min_size=1, max_size=20))
def test_key_encoding_round_trip(cells):
    cells = np.array(cells, dtype=np.int64)
    np.testing.assert_array_equal(decode_keys(encode_cells(cells)), cells)
    # key order is lexicographic in (east, north)
    keys = encode_cells(cells)
    order = np.lexsort((cells[:, 1], cells[:, 0]))
    assert np.all(np.diff(keys[order]) >= 0)


def test_key_encoding_rejects_huge_cells():
    with pytest.raises(ExtentError):
        encode_cells([[2**31, 0]])


# -- MGRS text -----------------------------------------------------------------


def test_parse_mgrs_example():
    m = parse_mgrs("10QCG12345678")
    assert (m.gzd, m.square, m.easting, m.northing) == ("10Q", "CG", 1234, 5678)
    assert m.precision == 10.0
    assert format_mgrs(m) == "10QCG12345678"


def test_parse_mgrs_one_metre():
    m = parse_mgrs("10QCG1234567890")
    assert (m.easting, m.northing, m.precision) == (12345, 67890, 1.0)


@pytest.mark.parametrize("text", [
    "10QCG123",        # odd digit count
    "10QCI12345678",   # I in square
    "10QOG12345678",   # O in square
    "61QCG1234",       # zone out of range
    "0QCG1234",
    "10ACG1234",       # polar band
    "10QCG",           # no digits
    "10QCG12345678901234",
    "10QZG1234",       # column letter outside zone 10's set
])
def test_parse_mgrs_rejects(text):
    with pytest.raises(GridParseError):
        parse_mgrs(text)


def test_parse_mgrs_canonicalizes_case():
    assert format_mgrs(parse_mgrs("10qcg1234")) == "10QCG1234"


def _random_mgrs(rng) -> str:
    zone = int(rng.integers(1, 61))
    start = 8 * ((zone - 1) % 3)
    col = COLS[start + int(rng.integers(0, 8))]
    row = ROWS[int(rng.integers(0, 20))]
    band = BANDS[int(rng.integers(0, len(BANDS)))]
    n = int(rng.integers(1, 6))
    digits = "".join(str(int(d)) for d in rng.integers(0, 10, size=2 * n))
    return f"{zone}{band}{col}{row}{digits}"


def test_mgrs_round_trip_1000_random():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        text = _random_mgrs(rng)
        m = parse_mgrs(text)
        assert format_mgrs(m) == text
        assert m.precision == 10.0 ** (5 - len(text.split(m.square, 1)[1]) // 2)


# -- MGRS arithmetic -----------------------------------------------------------


def _oracle_offset(text: str, d_h: int, d_v: int, precision: int) -> str:
    """Independent route: MGRS -> lat/lon -> UTM metres -> shift -> MGRS."""
    conv = mgrs.MGRS()
    m = parse_mgrs(text)
    step = 10 ** (5 - precision)
    # aim at the cell center so projection round-off cannot cross an edge
    center = f"{m.gzd}{m.square}{m.easting * step + step // 2:05d}{m.northing * step + step // 2:05d}"
    if step == 1:
        center = f"{m.gzd}{m.square}{m.easting:05d}{m.northing:05d}"
    lat, lon = conv.toLatLon(center)
    e, n, zone, _ = utm.from_latlon(lat, lon, force_zone_number=m.zone)
    if step == 1:
        e, n = e + 0.5, n + 0.5
    lat2, lon2 = utm.to_latlon(e + d_h * step, n + d_v * step, zone, northern=True, strict=False)
    return conv.toMGRS(lat2, lon2, MGRSPrecision=precision)


def test_mgrs_offset_example_matches_library():
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=10.0)
    got = format_mgrs(offset_id(parse_mgrs("10QCG12345678"), 1, 0, g))
    assert got == "10QCG12355678"
    assert _oracle_offset("10QCG12345678", 1, 0, 4) == got


def test_mgrs_column_rollover_matches_library():
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=10.0)
    got = format_mgrs(offset_id(parse_mgrs("10QCG99995678"), 1, 0, g))
    assert got == "10QDG00005678"
    assert _oracle_offset("10QCG99995678", 1, 0, 4) == got
    # H is the last column of zone 10's set; the next is in zone 11
    with pytest.raises(ExtentError):
        offset_id(parse_mgrs("10QHG99995678"), 1, 0, g)


def test_mgrs_column_skips_i_and_o():
    # zone 11 columns are J K L M N P Q R; O is never used
    g = MgrsGrid(gzd="11Q", origin_square="NG", cell_size=10.0)
    assert offset_id(parse_mgrs("11QNG99990000"), 1, 0, g).square == "PG"


def test_mgrs_row_rollover_matches_library():
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=10.0)
    got = format_mgrs(offset_id(parse_mgrs("10QCG12349999"), 0, 1, g))
    assert got == "10QCH12340000"
    assert _oracle_offset("10QCG12349999", 0, 1, 4) == got


def test_mgrs_row_letters_wrap_v_to_a():
    g = MgrsGrid(gzd="10Q", origin_square="CV", cell_size=10.0)
    assert offset_id(parse_mgrs("10QCV12349999"), 0, 1, g).square == "CA"


@pytest.mark.parametrize("seed", range(40))
def test_mgrs_random_offsets_match_library(seed):
    rng = np.random.default_rng(seed)
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=1.0)
    east = int(rng.integers(0, 200_000))
    north = int(rng.integers(-100_000, 200_000))
    start = g.id_of_cell(east, north)
    d_h, d_v = (int(v) for v in rng.integers(-20_000, 20_000, size=2))
    got = format_mgrs(offset_id(start, d_h, d_v, g))
    assert got == _oracle_offset(format_mgrs(start), d_h, d_v, 5)


def test_mgrs_lettering_al_shifts_rows():
    aa = MgrsGrid(gzd="10Q", origin_square="CG", lettering="AA", cell_size=10.0)
    al = MgrsGrid(gzd="10Q", origin_square="CG", lettering="AL", cell_size=10.0)
    # same square name, same lattice cell at the origin; crossing north differs
    assert offset_id(parse_mgrs("10QCG00009999"), 0, 1, aa).square == "CH"
    assert offset_id(parse_mgrs("10QCG00009999"), 0, 1, al).square == "CH"
    assert aa.cell_of_id(parse_mgrs("10QCG00000000")) == al.cell_of_id(parse_mgrs("10QCG00000000"))
    with pytest.raises(ValueError):
        MgrsGrid(lettering="XX")


def test_mgrs_rejects_other_zone_and_precision():
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=10.0)
    with pytest.raises(ExtentError):
        g.cell_of_id(parse_mgrs("11QJG12345678"))
    with pytest.raises(GridParseError):
        g.cell_of_id(parse_mgrs("10QCG1234567890"))
    with pytest.raises(ValueError):
        MgrsGrid(cell_size=3.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 299_999), st.integers(-400_000, 400_000),
       st.integers(-5000, 5000), st.integers(-5000, 5000))
def test_mgrs_agrees_with_planar(east, north, a, b):
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=1.0)
    p = PlanarGrid()
    m = g.id_of_cell(east, north)
    moved = offset_id(m, a, b, g)
    assert g.cell_of_id(moved) == tuple(offset_id(PlanarId(east, north), a, b, p))
    assert g.cell_of_id(m) == (east, north)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 99_999), st.integers(0, 99_999), *[st.integers(-30_000, 30_000)] * 4)
def test_mgrs_group_action(e, n, a, b, c, d):
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=1.0)
    x = g.id_of_cell(e, n)
    assert offset_id(offset_id(x, a, b, g), c, d, g) == offset_id(x, a + c, b + d, g)
    assert offset_id(offset_id(x, a, b, g), -a, -b, g) == x


def test_mgrs_points_and_centers():
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=10.0)
    m = id_of((12345.0, 56789.0), g)
    assert format_mgrs(m) == "10QCG12345678"
    np.testing.assert_allclose(center_of(m, g), (12345.0, 56785.0))


# -- prefix stripping ------------------------------------------------------------


def test_common_prefix_mgrs():
    ids = [parse_mgrs("10QCG12345678"), parse_mgrs("10QCG12355678")]
    assert common_prefix_strip(ids) == ("10QCG", ["12345678", "12355678"])


def test_common_prefix_single_and_different_zones():
    one = parse_mgrs("10QCG12345678")
    assert common_prefix_strip([one]) == ("10QCG12345678", [""])
    assert common_prefix_strip([one, parse_mgrs("11QJG12345678")])[0] == ""


def test_common_prefix_planar_and_mixed():
    prefix, rest = common_prefix_strip([PlanarId(3, 1), PlanarId(3, 2)])
    assert prefix == "c:3,"
    assert [prefix + r for r in rest] == ["c:3,r:1", "c:3,r:2"]
    with pytest.raises(TypeError):
        common_prefix_strip([PlanarId(0, 0), parse_mgrs("10QCG1234")])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 150_000), st.integers(0, 150_000)), min_size=1, max_size=8))
def test_common_prefix_is_lossless(cells):
    g = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=1.0)
    ids = [g.id_of_cell(e, n) for e, n in cells]
    prefix, rest = common_prefix_strip(ids)
    assert [parse_mgrs(prefix + r) for r in rest] == ids


def test_mgrs_id_validation():
    with pytest.raises(GridParseError):
        MgrsId("10Q", "CG", 10_000, 5, 4)
    assert math.isclose(MgrsId("10Q", "CG", 1, 5, 1).precision, 10_000.0)
