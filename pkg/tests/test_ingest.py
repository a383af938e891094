from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mei_dispatch.errors import (
    EmptySeries,
    InvalidRecord,
    MissingColumn,
    NonHourlySpacing,
    NonNumericCell,
    UnknownFuel,
)
from mei_dispatch.ingest import (
    COLUMNS,
    FUELS,
    GridSeries,
    HourlyGridRecord,
    parse_grid_csv,
    residual_demand,
    serialize_grid_csv,
)

from conftest import tiny_series


def _csv(series):
    return serialize_grid_csv(series).decode()


def test_round_trip_is_byte_identical():
    s = tiny_series(24)
    data = serialize_grid_csv(s)
    back = parse_grid_csv(data)
    assert back == s
    assert serialize_grid_csv(back) == data


def test_header_order_and_extra_columns_are_tolerated():
    s = tiny_series(3)
    lines = _csv(s).splitlines()
    header = lines[0].split(",")
    perm = list(reversed(range(len(header))))
    rows = [[r.split(",")[i] for i in perm] + ["x"] for r in lines]
    rows[0][-1] = "comment"
    assert parse_grid_csv("\n".join(",".join(r) for r in rows).encode()) == s


def test_missing_column_is_named():
    text = _csv(tiny_series(3)).replace(",biofuel", ",bio")
    with pytest.raises(MissingColumn) as err:
        parse_grid_csv(text.encode())
    assert err.value.column == "biofuel"
    assert "MissingColumn" in str(err.value)


def test_non_numeric_cell_reports_file_row():
    lines = _csv(tiny_series(4)).splitlines()
    cells = lines[3].split(",")
    cells[COLUMNS.index("price")] = "n/a"
    lines[3] = ",".join(cells)
    with pytest.raises(NonNumericCell) as err:
        parse_grid_csv("\n".join(lines).encode())
    assert (err.value.row, err.value.column, err.value.value) == (4, "price", "n/a")


def test_gap_in_hours_is_rejected():
    lines = _csv(tiny_series(4)).splitlines()
    del lines[2]
    with pytest.raises(NonHourlySpacing) as err:
        parse_grid_csv("\n".join(lines).encode())
    assert err.value.gap_hours == 2


def test_out_of_order_rows_are_rejected():
    lines = _csv(tiny_series(4)).splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    with pytest.raises(NonHourlySpacing):
        parse_grid_csv("\n".join(lines).encode())


def test_dst_transition_is_hourly_in_utc():
    t0 = datetime.fromisoformat("2024-11-03T00:00:00-04:00")
    stamps = [t0 + timedelta(hours=i) for i in range(4)]
    stamps[3] = stamps[3].astimezone(datetime.fromisoformat("2024-11-03T01:00:00-05:00").tzinfo)
    gen = {f: np.ones(4) for f in FUELS}
    s = GridSeries(stamps, np.full(4, 10.0), gen, np.zeros(4), np.zeros(4))
    assert parse_grid_csv(serialize_grid_csv(s)) == s


def test_naive_timestamp_rejected():
    text = _csv(tiny_series(2)).replace("+00:00", "")
    with pytest.raises(InvalidRecord):
        parse_grid_csv(text.encode())


def test_empty_inputs():
    with pytest.raises(EmptySeries):
        parse_grid_csv(b"")
    with pytest.raises(EmptySeries):
        parse_grid_csv((",".join(COLUMNS) + "\n").encode())


def test_negative_generation_rejected():
    s = tiny_series(2)
    gen = dict(s.gen)
    gen["wind"] = np.array([1.0, -1.0])
    with pytest.raises(InvalidRecord):
        GridSeries(s.timestamps, s.total_demand, gen, s.net_imports, s.price)


def test_negative_price_and_imports_allowed():
    s = tiny_series(3)
    s2 = GridSeries(s.timestamps, s.total_demand, s.gen, -np.abs(s.net_imports) - 1, -np.abs(s.price) - 1)
    assert np.all(s2.price < 0)


def test_residual_demand_scalar_matches_vector():
    s = tiny_series(50, seed=3)
    vec = s.residual_demand()
    for i in range(len(s)):
        assert residual_demand(s[i]) == vec[i]


def test_residual_demand_respects_fuel_set():
    rec = tiny_series(1)[0]
    assert residual_demand(rec, ()) == rec.total_demand
    expected = rec.total_demand - rec.gen["nuclear"] - rec.gen["hydro"]
    assert residual_demand(rec, {"nuclear", "hydro"}) == pytest.approx(expected, rel=1e-15)
    with pytest.raises(UnknownFuel):
        residual_demand(rec, {"coal"})


def test_residual_can_be_negative():
    t0 = datetime.fromisoformat("2025-01-01T00:00:00+00:00")
    gen = {f: 0.0 for f in FUELS}
    gen["nuclear"] = 100.0
    rec = HourlyGridRecord(t0, 40.0, gen, 0.0, 0.0)
    assert residual_demand(rec) == -60.0


def test_slicing_and_records():
    s = tiny_series(10)
    part = s[2:5]
    assert len(part) == 3
    assert part[0] == s[2]
    assert GridSeries.from_records(s.records) == s
    with pytest.raises(ValueError):
        s.price[0] = 1.0


finite = st.floats(0, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(finite, *(finite for _ in FUELS), st.floats(-1e5, 1e5), st.floats(-1e3, 1e4)),
                min_size=1, max_size=20))
def test_serialise_parse_round_trip_property(rows):
    t0 = datetime.fromisoformat("2025-03-01T00:00:00+00:00")
    arr = np.array(rows, dtype=float)
    gen = {f: arr[:, 1 + i] for i, f in enumerate(FUELS)}
    s = GridSeries([t0 + timedelta(hours=i) for i in range(len(rows))], arr[:, 0], gen, arr[:, -2], arr[:, -1])
    data = serialize_grid_csv(s)
    assert parse_grid_csv(data) == s
