"""Three-case comparison, capacity x carbon-price sweeps and normalised scores."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .accounting import OperationReport, evaluate
from .dispatch import (
    DEFAULT_TIE_BREAK,
    CaseMode,
    DispatchSchedule,
    EssParams,
    PriceSignals,
    effective_price,
    rolling_horizon,
    serialize_schedule_csv,
    schedule_sidecar,
)
from .errors import ConfigError, MeiDispatchError, SolverError
from .ingest import DEFAULT_NON_DISPATCHABLE, GridSeries, fmt_float
from .mei import MeiTable, mei_series

CASES = (CaseMode.ELECTRICITY_ONLY, CaseMode.CARBON_ONLY, CaseMode.COMBINED)


def price_signals(series: GridSeries, table: MeiTable, carbon_price,
                  non_dispatchable=DEFAULT_NON_DISPATCHABLE) -> PriceSignals:
    return PriceSignals(series.price, carbon_price, mei_series(series, table, non_dispatchable),
                        series.timestamps)


@dataclass(frozen=True)
class CaseRun:
    schedule: DispatchSchedule
    report: OperationReport


@dataclass(frozen=True)
class CaseStudyResult:
    prices: PriceSignals
    ess: EssParams
    carbon_price: float
    runs: Mapping[CaseMode, CaseRun]

    def __getitem__(self, mode) -> CaseRun:
        return self.runs[CaseMode.parse(mode)]

    def reports(self) -> dict[CaseMode, OperationReport]:
        return {m: r.report for m, r in self.runs.items()}


def _solve_and_score(prices, ess, mode, window, step, tie_break, epc_window):
    sched = rolling_horizon(prices, ess, mode, window, step, tie_break=tie_break)
    return CaseRun(sched, evaluate(sched, prices, ess, epc_window))


def run_cases(series: GridSeries, table: MeiTable, ess: EssParams, carbon_price: float = 80.0, *,
              non_dispatchable=DEFAULT_NON_DISPATCHABLE, window: int | None = None, step: int | None = None,
              tie_break: float = DEFAULT_TIE_BREAK, epc_window: int | None = None) -> CaseStudyResult:
    """Solve and score the electricity-only, carbon-only and combined cases on identical inputs."""
    prices = price_signals(series, table, carbon_price, non_dispatchable)
    runs = {m: _solve_and_score(prices, ess, m, window, step, tie_break, epc_window) for m in CASES}
    return CaseStudyResult(prices, ess, float(carbon_price), runs)


def dominance_violations(result: CaseStudyResult, slack: float = 1e-6) -> list[str]:
    """Orderings every optimal three-case run must satisfy; returns the broken ones."""
    e1, e2, e3 = (result[m].report.elec_revenue for m in CASES)
    r1, r2, r3 = (result[m].report.emission_reduction for m in CASES)
    out = []
    if not e1 >= e3 - slack:
        out.append(f"elec revenue: electricity-only {e1} < combined {e3}")
    if not e3 >= e2 - slack:
        out.append(f"elec revenue: combined {e3} < carbon-only {e2}")
    if not r2 >= r3 - slack:
        out.append(f"emission reduction: carbon-only {r2} < combined {r3}")
    if not r3 >= r1 - slack:
        out.append(f"emission reduction: combined {r3} < electricity-only {r1}")
    c3 = effective_price(result.prices, CaseMode.COMBINED)
    best = float(np.dot(c3, result[CaseMode.COMBINED].schedule.p_grid))
    for m in CASES[:2]:
        other = float(np.dot(c3, result[m].schedule.p_grid))
        if not best >= other - slack:
            out.append(f"combined objective {best} < {m.value} schedule under combined prices {other}")
    return out


def normalized_performance(results) -> dict[CaseMode, tuple[float, float, float]]:
    """Min-max scale (total revenue, emission reduction, remaining lifetime) across cases.

    A metric that is equal for every case maps to 1.
    """
    reports = results.reports() if isinstance(results, CaseStudyResult) else dict(results)
    if not reports:
        raise ConfigError("no reports to normalise")
    modes = list(reports)
    metrics = np.array([[reports[m].total_revenue, reports[m].emission_reduction,
                         reports[m].remaining_lifetime] for m in modes])
    lo = metrics.min(axis=0)
    hi = metrics.max(axis=0)
    span = hi - lo
    scaled = np.where(span > 0, (metrics - lo) / np.where(span > 0, span, 1.0), 1.0)
    return {m: tuple(float(v) for v in scaled[i]) for i, m in enumerate(modes)}


def case_bundle(result: CaseStudyResult) -> dict:
    norm = normalized_performance(result)
    return {
        "carbon_price": result.carbon_price,
        "ess": result.ess.as_dict(),
        "cases": {
            m.value: {
                "objective": run.schedule.objective,
                "report": run.report.to_dict(),
                "normalized": dict(zip(("revenue", "emission_reduction", "remaining_lifetime"), norm[m])),
                "schedule_csv": f"schedule_{m.value}.csv",
            }
            for m, run in result.runs.items()
        },
    }


def write_case_bundle(result: CaseStudyResult, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for m, run in result.runs.items():
        path = os.path.join(out_dir, f"schedule_{m.value}.csv")
        with open(path, "wb") as fh:
            fh.write(serialize_schedule_csv(run.schedule))
        written.append(path)
        side = os.path.join(out_dir, f"schedule_{m.value}.json")
        with open(side, "w") as fh:
            json.dump(schedule_sidecar(run.schedule, result.ess, m, carbon_price=result.carbon_price), fh, indent=2)
        written.append(side)
    path = os.path.join(out_dir, "cases.json")
    with open(path, "w") as fh:
        json.dump(case_bundle(result), fh, indent=2)
    written.append(path)
    return written


# -- sensitivity sweep ----------------------------------------------------

class SweepCellError(SolverError):
    def __init__(self, capacity, carbon_price, cause):
        self.capacity = capacity
        self.carbon_price = carbon_price
        super().__init__(f"sweep cell (capacity={capacity}, carbon_price={carbon_price}) failed: {cause}")


@dataclass(frozen=True)
class SweepGrid:
    capacities: tuple[float, ...]
    carbon_prices: tuple[float, ...]
    emission_reduction: np.ndarray
    revenue: np.ndarray
    mode: CaseMode = CaseMode.CARBON_ONLY
    c_rate: float = 1.0

    @property
    def emissions(self) -> np.ndarray:
        """Overall emissions impact of the unit: the negated reduction."""
        return -self.emission_reduction

    def rows(self):
        for i, cap in enumerate(self.capacities):
            for j, price in enumerate(self.carbon_prices):
                yield cap, price, float(self.emissions[i, j]), float(self.revenue[i, j])

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for cap, price, em, rev in self.rows():
            w.writerow([fmt_float(cap), fmt_float(price), fmt_float(em), fmt_float(rev)])
        return buf.getvalue().encode("utf-8")

    @classmethod
    def from_csv(cls, data: bytes, mode: CaseMode = CaseMode.CARBON_ONLY, c_rate: float = 1.0) -> SweepGrid:
        rows = list(csv.reader(io.StringIO(data.decode("utf-8"))))
        if not rows or tuple(rows[0]) != SWEEP_COLUMNS:
            raise ConfigError(f"sweep header must be {','.join(SWEEP_COLUMNS)}")
        body = [[float(v) for v in r] for r in rows[1:] if r]
        caps = tuple(dict.fromkeys(r[0] for r in body))
        prices = tuple(dict.fromkeys(r[1] for r in body))
        if len(body) != len(caps) * len(prices):
            raise ConfigError("sweep CSV is not a full grid")
        em = np.array([r[2] for r in body]).reshape(len(caps), len(prices))
        rev = np.array([r[3] for r in body]).reshape(len(caps), len(prices))
        return cls(caps, prices, -em, rev, mode, c_rate)


SWEEP_COLUMNS = ("capacity", "carbon_price", "emissions", "revenue")


def _sweep_cell(args):
    prices, ess, mode, cap, price, tie_break = args
    try:
        cell_prices = replace(prices, carbon_price=np.full(len(prices), float(price)))
        sched = rolling_horizon(cell_prices, ess, mode, tie_break=tie_break)
        rep = evaluate(sched, cell_prices, ess)
        return rep.emission_reduction, rep.total_revenue
    except MeiDispatchError as exc:
        raise SweepCellError(cap, price, exc) from exc


def sensitivity_sweep(series: GridSeries, table: MeiTable, capacities: Sequence[float],
                      carbon_prices: Sequence[float], mode: CaseMode = CaseMode.CARBON_ONLY, *,
                      c_rate: float = 1.0, ess: EssParams | None = None,
                      non_dispatchable=DEFAULT_NON_DISPATCHABLE, tie_break: float = DEFAULT_TIE_BREAK,
                      workers: int = 1) -> SweepGrid:
    """One solve per (capacity, carbon price) cell, power limits = capacity * c_rate.

    ``ess`` supplies efficiencies and the remaining unit settings; its
    capacity and power limits are overridden per cell. Cells may run in
    ``workers`` processes; results are always laid out capacity-major.
    """
    mode = CaseMode.parse(mode)
    if mode is CaseMode.ELECTRICITY_ONLY:
        raise ConfigError("electricity-only dispatch does not depend on the carbon price; sweep "
                          "carbon_only or combined")
    if not capacities or not carbon_prices:
        raise ConfigError("sweep axes must be non-empty")
    base = ess or EssParams(1.0, 1.0, 1.0)
    prices = price_signals(series, table, 0.0, non_dispatchable)
    jobs = []
    for cap in capacities:
        cell_ess = replace(base, capacity=float(cap), p_ch_max=float(cap) * c_rate, p_dis_max=float(cap) * c_rate)
        for price in carbon_prices:
            jobs.append((prices, cell_ess, mode, float(cap), float(price), tie_break))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_sweep_cell, jobs))
    else:
        out = [_sweep_cell(j) for j in jobs]

    shape = (len(capacities), len(carbon_prices))
    er = np.array([o[0] for o in out]).reshape(shape)
    rev = np.array([o[1] for o in out]).reshape(shape)
    return SweepGrid(tuple(float(c) for c in capacities), tuple(float(p) for p in carbon_prices),
                     er, rev, mode, float(c_rate))
