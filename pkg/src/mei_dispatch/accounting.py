"""Revenue, emission-reduction, EPC and lifetime metrics for a schedule."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .dispatch import DispatchSchedule, EssParams, PriceSignals
from .errors import LengthMismatch


@dataclass(frozen=True)
class OperationReport:
    elec_revenue: float
    carbon_revenue: float
    total_revenue: float
    emission_reduction: float
    epc_quantity: float
    epc_value: float
    fec: float
    remaining_lifetime: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> OperationReport:
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n not in d]
        if missing:
            raise LengthMismatch(f"report is missing fields {missing}")
        return cls(**{n: float(d[n]) for n in names})


def full_equivalent_cycles(schedule: DispatchSchedule, ess: EssParams) -> float:
    """Discharged energy over capacity (one-hour steps)."""
    return float(np.sum(schedule.p_dis)) / ess.capacity


def remaining_lifetime(schedule: DispatchSchedule, ess: EssParams) -> float:
    """``1 - FEC / cycle_life``; goes negative once cycle life is exceeded."""
    return 1.0 - full_equivalent_cycles(schedule, ess) / ess.cycle_life


def evaluate(schedule: DispatchSchedule, prices: PriceSignals, ess: EssParams,
             epc_window: int | None = None) -> OperationReport:
    """Score a schedule against the price signals.

    Emission reduction is the MEI-weighted net export: discharging displaces
    marginal generation, charging adds to it. EPCs are earned per compliance
    window of ``epc_window`` hours (whole horizon by default) and only for
    windows with a net reduction.
    """
    T = len(schedule)
    if len(prices) != T:
        raise LengthMismatch(f"schedule has {T} hours, prices have {len(prices)}")
    if epc_window is not None and epc_window < 1:
        raise LengthMismatch("epc_window must be >= 1 hour")

    g = schedule.p_grid
    elec = float(np.dot(prices.elec_price, g))
    carbon = float(np.dot(prices.carbon_price * prices.mei, g))
    hourly_er = prices.mei * g
    er = float(np.sum(hourly_er))

    width = T if epc_window is None else int(epc_window)
    qty = 0.0
    value = 0.0
    for start in range(0, T, width):
        w_er = float(np.sum(hourly_er[start:start + width]))
        if w_er > 0:
            qty += w_er
            value += w_er * float(np.mean(prices.carbon_price[start:start + width]))

    fec = full_equivalent_cycles(schedule, ess)
    return OperationReport(
        elec_revenue=elec,
        carbon_revenue=carbon,
        total_revenue=elec + carbon,
        emission_reduction=er,
        epc_quantity=qty,
        epc_value=value,
        fec=fec,
        remaining_lifetime=1.0 - fec / ess.cycle_life,
    )
