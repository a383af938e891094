"""Hourly grid time series: validation, CSV I/O and residual demand."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import BinaryIO, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptySeries,
    InvalidRecord,
    MissingColumn,
    NonHourlySpacing,
    NonNumericCell,
    UnknownFuel,
)

FUELS = ("nuclear", "hydro", "wind", "solar", "biofuel", "gas")
COLUMNS = ("timestamp", "total_demand", *FUELS, "net_imports", "price")

# Hydro stays in the residual by default: the source data does not split
# baseload from dispatchable hydro.
DEFAULT_NON_DISPATCHABLE = frozenset({"nuclear", "wind", "solar", "biofuel"})

HOUR = timedelta(hours=1)


@dataclass(frozen=True)
class HourlyGridRecord:
    timestamp: datetime
    total_demand: float
    gen: Mapping[str, float]
    net_imports: float
    price: float

    def __post_init__(self):
        if self.timestamp.utcoffset() is None:
            raise InvalidRecord(f"timestamp {self.timestamp} has no UTC offset")
        missing = [f for f in FUELS if f not in self.gen]
        if missing:
            raise MissingColumn(missing[0])
        if not self.total_demand >= 0:
            raise InvalidRecord(f"{self.timestamp}: total_demand must be >= 0, got {self.total_demand}")
        for fuel in FUELS:
            if not self.gen[fuel] >= 0:
                raise InvalidRecord(f"{self.timestamp}: {fuel} generation must be >= 0, got {self.gen[fuel]}")


def _nd_order(non_dispatchable: Iterable[str], known: Iterable[str]) -> list[str]:
    known = set(known)
    names = set(non_dispatchable)
    for name in sorted(names):
        if name not in known:
            raise UnknownFuel(name)
    # fixed summation order so scalar and vector paths round identically
    return [f for f in FUELS if f in names]


def residual_demand(record: HourlyGridRecord,
                    non_dispatchable: Iterable[str] = DEFAULT_NON_DISPATCHABLE) -> float:
    """Total demand minus the output of the non-dispatchable fuels (MWh).

    The result may be negative when must-run output exceeds demand.
    """
    acc = 0.0
    for fuel in _nd_order(non_dispatchable, record.gen):
        acc = acc + record.gen[fuel]
    return record.total_demand - acc


class GridSeries:
    """Hourly grid records stored column-wise.

    Timestamps must be offset-aware and exactly one hour apart. All arrays
    are read-only; slicing returns a new series.
    """

    def __init__(self, timestamps: Sequence[datetime], total_demand, gen: Mapping[str, Sequence[float]],
                 net_imports, price):
        n = len(timestamps)
        if n == 0:
            raise EmptySeries()
        self.timestamps = tuple(timestamps)
        self.total_demand = _column(total_demand, n, "total_demand")
        self.gen = {f: _column(gen[f], n, f) if f in gen else _missing(f) for f in FUELS}
        self.net_imports = _column(net_imports, n, "net_imports")
        self.price = _column(price, n, "price")
        self._validate()

    def _validate(self):
        for i, ts in enumerate(self.timestamps):
            if ts.utcoffset() is None:
                raise InvalidRecord(f"timestamp {ts} has no UTC offset")
            if i and ts - self.timestamps[i - 1] != HOUR:
                gap = (ts - self.timestamps[i - 1]).total_seconds() / 3600.0
                raise NonHourlySpacing(ts.isoformat(), gap)
        for name, col in (("total_demand", self.total_demand), *self.gen.items()):
            bad = np.flatnonzero(~(col >= 0))
            if bad.size:
                i = bad[0]
                raise InvalidRecord(f"{self.timestamps[i].isoformat()}: {name} must be >= 0, got {col[i]}")
        for name, col in (("net_imports", self.net_imports), ("price", self.price)):
            if not np.all(np.isfinite(col)):
                raise InvalidRecord(f"non-finite value in {name}")

    @classmethod
    def from_records(cls, records: Iterable[HourlyGridRecord]) -> GridSeries:
        records = list(records)
        if not records:
            raise EmptySeries()
        return cls(
            [r.timestamp for r in records],
            [r.total_demand for r in records],
            {f: [r.gen[f] for r in records] for f in FUELS},
            [r.net_imports for r in records],
            [r.price for r in records],
        )

    def __len__(self):
        return len(self.timestamps)

    def __getitem__(self, key):
        if isinstance(key, slice):
            return GridSeries(self.timestamps[key], self.total_demand[key],
                              {f: v[key] for f, v in self.gen.items()},
                              self.net_imports[key], self.price[key])
        i = range(len(self))[key]
        return HourlyGridRecord(self.timestamps[i], float(self.total_demand[i]),
                                {f: float(v[i]) for f, v in self.gen.items()},
                                float(self.net_imports[i]), float(self.price[i]))

    @property
    def records(self) -> tuple[HourlyGridRecord, ...]:
        return tuple(self[i] for i in range(len(self)))

    def residual_demand(self, non_dispatchable: Iterable[str] = DEFAULT_NON_DISPATCHABLE) -> np.ndarray:
        acc = np.zeros(len(self))
        for fuel in _nd_order(non_dispatchable, self.gen):
            acc = acc + self.gen[fuel]
        return self.total_demand - acc

    def __eq__(self, other):
        if not isinstance(other, GridSeries):
            return NotImplemented
        return (self.timestamps == other.timestamps
                and np.array_equal(self.total_demand, other.total_demand)
                and all(np.array_equal(self.gen[f], other.gen[f]) for f in FUELS)
                and np.array_equal(self.net_imports, other.net_imports)
                and np.array_equal(self.price, other.price))

    __hash__ = None

    def __repr__(self):
        return f"GridSeries({len(self)} h, {self.timestamps[0].isoformat()} .. {self.timestamps[-1].isoformat()})"


def _column(values, n, name):
    arr = np.array(values, dtype=float)
    if arr.shape != (n,):
        raise InvalidRecord(f"column {name!r} has shape {arr.shape}, expected ({n},)")
    arr.flags.writeable = False
    return arr


def _missing(name):
    raise MissingColumn(name)


# -- CSV ------------------------------------------------------------------

def parse_grid_csv(source: BinaryIO | bytes) -> GridSeries:
    """Parse a UTF-8 grid CSV (see ``COLUMNS``) into a validated series.

    Ordering and spacing are checked, never repaired.
    """
    raw = source if isinstance(source, (bytes, bytearray)) else source.read()
    text = raw.decode("utf-8-sig") if isinstance(raw, (bytes, bytearray)) else raw
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise EmptySeries("EmptySeries: file has no header")
    header = [h.strip() for h in header]
    for col in COLUMNS:
        if col not in header:
            raise MissingColumn(col)
    idx = {col: header.index(col) for col in COLUMNS}

    timestamps = []
    values = {col: [] for col in COLUMNS[1:]}
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise InvalidRecord(f"row {line_no}: expected {len(header)} fields, got {len(row)}")
        cell = row[idx["timestamp"]].strip()
        try:
            ts = datetime.fromisoformat(cell)
        except ValueError:
            raise NonNumericCell(line_no, "timestamp", cell) from None
        if ts.utcoffset() is None:
            raise InvalidRecord(f"row {line_no}: timestamp {cell!r} has no UTC offset")
        timestamps.append(ts)
        for col in COLUMNS[1:]:
            cell = row[idx[col]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCell(line_no, col, cell) from None
            if not math.isfinite(v):
                raise NonNumericCell(line_no, col, cell)
            values[col].append(v)
    if not timestamps:
        raise EmptySeries()
    return GridSeries(timestamps, values["total_demand"], {f: values[f] for f in FUELS},
                      values["net_imports"], values["price"])


def read_grid_csv(path) -> GridSeries:
    with open(path, "rb") as fh:
        return parse_grid_csv(fh)


def fmt_float(x: float) -> str:
    """Shortest round-tripping plain decimal (no exponent)."""
    return np.format_float_positional(float(x), unique=True, trim="-")


def serialize_grid_csv(series: GridSeries) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for i, ts in enumerate(series.timestamps):
        w.writerow([ts.isoformat(), fmt_float(series.total_demand[i]),
                    *(fmt_float(series.gen[f][i]) for f in FUELS),
                    fmt_float(series.net_imports[i]), fmt_float(series.price[i])])
    return buf.getvalue().encode("utf-8")


def write_grid_csv(series: GridSeries, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_grid_csv(series))
