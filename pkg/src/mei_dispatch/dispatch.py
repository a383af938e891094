"""Emission-aware storage dispatch.

The storage unit maximises ``sum_t c_t * (p_dis_t - p_ch_t)`` where the
effective price ``c_t`` combines the electricity price and the carbon-valued
MEI. Powers are in MW with one-hour steps, so MW and MWh coincide per step.

A small throughput penalty picks the least-cycling optimum. It rules out
simultaneous charging and discharging whenever ``c_t >= 0``; for negative
effective prices, burning energy through conversion losses is genuinely
profitable in the LP, so those hours get a binary charge/discharge switch
unless ``exclusive=False``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .errors import ConfigError, Infeasible, LengthMismatch, SolverError
from .ingest import fmt_float

DEFAULT_TIE_BREAK = 1e-6
TERMINAL_POLICIES = ("free", "at_least_initial")


class CaseMode(enum.Enum):
    ELECTRICITY_ONLY = "electricity_only"
    CARBON_ONLY = "carbon_only"
    COMBINED = "combined"

    @classmethod
    def parse(cls, value) -> CaseMode:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"1": "electricity_only", "2": "carbon_only", "3": "combined",
                   "electricity": "electricity_only", "carbon": "carbon_only"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown case mode {value!r}") from None


@dataclass(frozen=True)
class EssParams:
    capacity: float
    p_ch_max: float
    p_dis_max: float
    eta_ch: float = 0.92
    eta_dis: float = 0.92
    soc0: float = 0.0
    cycle_life: float = 3000.0
    terminal_policy: str = "free"

    def __post_init__(self):
        if not self.capacity > 0:
            raise ConfigError(f"capacity must be > 0, got {self.capacity}")
        if not (self.p_ch_max >= 0 and self.p_dis_max >= 0):
            raise ConfigError("power limits must be >= 0")
        for name in ("eta_ch", "eta_dis"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {getattr(self, name)}")
        if not 0 <= self.soc0 <= 1:
            raise ConfigError(f"soc0 must lie in [0, 1], got {self.soc0}")
        if not self.cycle_life > 0:
            raise ConfigError("cycle_life must be > 0")
        if self.terminal_policy not in TERMINAL_POLICIES:
            raise ConfigError(f"terminal_policy must be one of {TERMINAL_POLICIES}")

    @classmethod
    def with_c_rate(cls, capacity: float, c_rate: float = 1.0, **kw) -> EssParams:
        return cls(capacity, capacity * c_rate, capacity * c_rate, **kw)

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class PriceSignals:
    """Hourly electricity price ($/MWh), carbon price ($/tCO2) and MEI (tCO2e/MWh).

    A scalar carbon price is broadcast over the horizon.
    """

    elec_price: np.ndarray
    carbon_price: np.ndarray
    mei: np.ndarray
    timestamps: tuple[datetime, ...] | None = None

    def __post_init__(self):
        elec = np.array(self.elec_price, dtype=float).reshape(-1)
        mei = np.array(self.mei, dtype=float).reshape(-1)
        carbon = np.array(self.carbon_price, dtype=float)
        if carbon.ndim == 0:
            carbon = np.full(elec.shape, float(carbon))
        carbon = carbon.reshape(-1)
        if not (elec.size == carbon.size == mei.size) or elec.size == 0:
            raise LengthMismatch(
                f"price signals need equal non-zero lengths, got {elec.size}, {carbon.size}, {mei.size}")
        for name, arr in (("elec_price", elec), ("carbon_price", carbon), ("mei", mei)):
            if not np.all(np.isfinite(arr)):
                raise LengthMismatch(f"{name} contains non-finite values")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != elec.size:
                raise LengthMismatch("timestamps length differs from prices")
            object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return self.elec_price.size

    def __getitem__(self, key: slice) -> PriceSignals:
        return PriceSignals(self.elec_price[key], self.carbon_price[key], self.mei[key],
                            None if self.timestamps is None else self.timestamps[key])


@dataclass(frozen=True)
class DispatchSchedule:
    p_ch: np.ndarray
    p_dis: np.ndarray
    soc: np.ndarray
    objective: float
    effective_price: np.ndarray
    soc0: float
    tie_break_cost: float = 0.0
    timestamps: tuple[datetime, ...] | None = None
    p_grid: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("p_ch", "p_dis", "soc", "effective_price"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        p_grid = self.p_dis - self.p_ch
        p_grid.flags.writeable = False
        object.__setattr__(self, "p_grid", p_grid)

    def __len__(self):
        return self.p_ch.size


def effective_price(prices: PriceSignals, mode: CaseMode) -> np.ndarray:
    """Per-hour value of one MWh delivered to the grid under ``mode``."""
    mode = CaseMode.parse(mode)
    if mode is CaseMode.ELECTRICITY_ONLY:
        return prices.elec_price.copy()
    carbon = prices.carbon_price * prices.mei
    if mode is CaseMode.CARBON_ONLY:
        return carbon
    return prices.elec_price + carbon


def cost_scale(c: np.ndarray) -> float:
    """Largest power of two not above max|c| (1 for an all-zero vector).

    Costs are divided by this before solving, which is exact in floating
    point, so positively rescaled price vectors that differ by a power of
    two produce bit-identical problems.
    """
    m = float(np.max(np.abs(c))) if np.size(c) else 0.0
    if m == 0.0:
        return 1.0
    return math.ldexp(1.0, math.frexp(m)[1] - 1)


def soc_trajectory(p_ch, p_dis, ess: EssParams, soc0: float | None = None) -> np.ndarray:
    soc0 = ess.soc0 if soc0 is None else soc0
    inc = ess.eta_ch * np.asarray(p_ch) / ess.capacity - np.asarray(p_dis) / (ess.eta_dis * ess.capacity)
    return np.cumsum(np.concatenate([[soc0], inc]))[1:]


def _repair(p_ch, p_dis, ess: EssParams, soc0: float):
    """Snap solver round-off and walk the SoC recursion so every bound holds exactly."""
    p_ch = np.clip(np.asarray(p_ch, dtype=float), 0.0, ess.p_ch_max)
    p_dis = np.clip(np.asarray(p_dis, dtype=float), 0.0, ess.p_dis_max)
    tol = 1e-9 * max(1.0, ess.p_ch_max, ess.p_dis_max)
    p_ch[p_ch < tol] = 0.0
    p_dis[p_dis < tol] = 0.0
    p_ch[ess.p_ch_max - p_ch < tol] = ess.p_ch_max
    p_dis[ess.p_dis_max - p_dis < tol] = ess.p_dis_max

    a = ess.eta_ch / ess.capacity
    b = 1.0 / (ess.eta_dis * ess.capacity)
    soc = soc0
    for t in range(p_ch.size):
        nxt = soc + a * p_ch[t] - b * p_dis[t]
        # trim only the offending flow; any leftover overshoot is round-off
        if nxt > 1.0:
            p_ch[t] -= min(p_ch[t], (nxt - 1.0) / a)
        elif nxt < 0.0:
            p_dis[t] -= min(p_dis[t], -nxt / b)
        soc = soc + a * p_ch[t] - b * p_dis[t]
    return p_ch, p_dis


def solve_dispatch(prices: PriceSignals, ess: EssParams, mode: CaseMode = CaseMode.COMBINED, *,
                   tie_break: float = DEFAULT_TIE_BREAK, exclusive: bool = True) -> DispatchSchedule:
    """Globally optimal dispatch under perfect foresight.

    ``tie_break`` is charged per MWh of throughput in units of the cost
    scale (see ``cost_scale``) and is left out of the reported objective.
    """
    mode = CaseMode.parse(mode)
    c = effective_price(prices, mode)
    T = c.size
    if T < 1:
        raise ConfigError("horizon must be at least one hour")
    if tie_break < 0:
        raise ConfigError("tie_break must be >= 0")
    scale = cost_scale(c)
    cn = c / scale

    a = ess.eta_ch / ess.capacity
    b = 1.0 / (ess.eta_dis * ess.capacity)
    neg = np.flatnonzero(cn < 0) if exclusive else np.array([], dtype=int)
    K = neg.size
    nvar = 3 * T + K

    obj = np.concatenate([cn + tie_break, -cn + tie_break, np.zeros(T), np.zeros(K)])

    # soc_t - soc_{t-1} - a p_ch_t + b p_dis_t = 0   (soc_{-1} = soc0)
    eye = sp.identity(T, format="csr")
    shift = sp.eye(T, k=-1, format="csr")
    a_eq = sp.hstack([-a * eye, b * eye, eye - shift, sp.csr_matrix((T, K))], format="csr")
    b_eq = np.zeros(T)
    b_eq[0] = ess.soc0

    lo = np.zeros(nvar)
    hi = np.concatenate([np.full(T, ess.p_ch_max), np.full(T, ess.p_dis_max), np.ones(T), np.ones(K)])
    if ess.terminal_policy == "at_least_initial":
        lo[3 * T - 1] = ess.soc0

    if K == 0:
        res = linprog(obj, A_eq=a_eq, b_eq=b_eq, bounds=np.column_stack([lo, hi]), method="highs-ds",
                      options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
        status, x = res.status, res.x
    else:
        # p_ch_t <= P_ch z_t ;  p_dis_t <= P_dis (1 - z_t)   on negative-price hours
        rows = np.arange(K)
        sel = sp.csr_matrix((np.ones(K), (rows, neg)), shape=(K, T))
        zk = sp.identity(K, format="csr")
        zero = sp.csr_matrix((K, T))
        a_ub = sp.vstack([
            sp.hstack([sel, zero, zero, -ess.p_ch_max * zk]),
            sp.hstack([zero, sel, zero, ess.p_dis_max * zk]),
        ], format="csr")
        ub = np.concatenate([np.zeros(K), np.full(K, ess.p_dis_max)])
        integrality = np.concatenate([np.zeros(3 * T), np.ones(K)])
        res = milp(obj, integrality=integrality, bounds=Bounds(lo, hi),
                   constraints=[LinearConstraint(a_eq, b_eq, b_eq), LinearConstraint(a_ub, -np.inf, ub)],
                   options={"mip_rel_gap": 0.0})
        status, x = res.status, res.x

    if status == 2:
        raise Infeasible(f"dispatch problem infeasible: {res.message}")
    if status != 0 or x is None:
        raise SolverError(f"solver failed (status {status}): {res.message}")

    p_ch = np.array(x[:T])
    p_dis = np.array(x[T:2 * T])
    if K:
        # integrality is only met to a tolerance; honour the rounded switch exactly
        on = np.round(x[3 * T:]) > 0
        p_ch[neg[~on]] = 0.0
        p_dis[neg[on]] = 0.0
    p_ch, p_dis = _repair(p_ch, p_dis, ess, ess.soc0)
    return _schedule(p_ch, p_dis, c, ess, ess.soc0, tie_break * scale, prices.timestamps)


def _schedule(p_ch, p_dis, c, ess, soc0, eps_money, timestamps) -> DispatchSchedule:
    soc = soc_trajectory(p_ch, p_dis, ess, soc0)
    objective = float(np.dot(c, p_dis - p_ch))
    penalty = float(eps_money * (p_ch.sum() + p_dis.sum()))
    return DispatchSchedule(p_ch, p_dis, soc, objective, c, soc0, penalty, timestamps)


def rolling_horizon(prices: PriceSignals, ess: EssParams, mode: CaseMode = CaseMode.COMBINED,
                    window: int | None = None, step: int | None = None, *,
                    tie_break: float = DEFAULT_TIE_BREAK, exclusive: bool = True) -> DispatchSchedule:
    """Receding-horizon dispatch: solve ``window`` hours, keep the first ``step``, roll on.

    The terminal SoC of each committed block seeds the next window. Every
    window uses the unit's terminal policy relative to its own start SoC.
    """
    mode = CaseMode.parse(mode)
    T = len(prices)
    window = T if window is None else int(window)
    step = window if step is None else int(step)
    if not 1 <= step <= window <= T:
        raise ConfigError(f"need 1 <= step <= window <= T, got step={step}, window={window}, T={T}")

    if window == T:
        return solve_dispatch(prices, ess, mode, tie_break=tie_break, exclusive=exclusive)

    p_ch = np.zeros(T)
    p_dis = np.zeros(T)
    penalty = 0.0
    soc = ess.soc0
    start = 0
    while start < T:
        stop = min(start + window, T)
        sub = solve_dispatch(prices[start:stop], replace(ess, soc0=soc), mode,
                             tie_break=tie_break, exclusive=exclusive)
        keep = min(step, T - start)
        p_ch[start:start + keep] = sub.p_ch[:keep]
        p_dis[start:start + keep] = sub.p_dis[:keep]
        penalty += tie_break * cost_scale(sub.effective_price) * float(sub.p_ch[:keep].sum() + sub.p_dis[:keep].sum())
        soc = float(sub.soc[keep - 1])
        start += keep

    c = effective_price(prices, mode)
    sched = _schedule(p_ch, p_dis, c, ess, ess.soc0, 0.0, prices.timestamps)
    return replace(sched, tie_break_cost=penalty)


# -- invariants -----------------------------------------------------------

def schedule_violations(schedule: DispatchSchedule, ess: EssParams, tol: float = 1e-9) -> list[str]:
    """Every broken schedule invariant, as readable strings (empty when valid)."""
    out = []
    if np.any(schedule.p_ch < -tol) or np.any(schedule.p_ch > ess.p_ch_max + tol):
        out.append("p_ch outside [0, p_ch_max]")
    if np.any(schedule.p_dis < -tol) or np.any(schedule.p_dis > ess.p_dis_max + tol):
        out.append("p_dis outside [0, p_dis_max]")
    if not np.array_equal(schedule.p_grid, schedule.p_dis - schedule.p_ch):
        out.append("p_grid != p_dis - p_ch")
    inc = ess.eta_ch * schedule.p_ch / ess.capacity - schedule.p_dis / (ess.eta_dis * ess.capacity)
    expected = schedule.soc0 + np.cumsum(inc)
    drift = float(np.max(np.abs(expected - schedule.soc))) if len(schedule) else 0.0
    if drift > tol:
        out.append(f"SoC recursion drift {drift:.3e}")
    if np.any(schedule.soc < -tol) or np.any(schedule.soc > 1 + tol):
        out.append("SoC outside [0, 1]")
    if ess.terminal_policy == "at_least_initial" and schedule.soc[-1] < schedule.soc0 - tol:
        out.append("terminal SoC below initial")
    return out


def simultaneous_hours(schedule: DispatchSchedule) -> np.ndarray:
    return np.flatnonzero((schedule.p_ch > 0) & (schedule.p_dis > 0))


# -- serialisation --------------------------------------------------------

SCHEDULE_COLUMNS = ("timestamp", "p_ch", "p_dis", "p_grid", "soc", "effective_price")


def serialize_schedule_csv(schedule: DispatchSchedule) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCHEDULE_COLUMNS)
    for t in range(len(schedule)):
        stamp = str(t) if schedule.timestamps is None else schedule.timestamps[t].isoformat()
        w.writerow([stamp, fmt_float(schedule.p_ch[t]), fmt_float(schedule.p_dis[t]),
                    fmt_float(schedule.p_grid[t]), fmt_float(schedule.soc[t]),
                    fmt_float(schedule.effective_price[t])])
    return buf.getvalue().encode("utf-8")


def schedule_sidecar(schedule: DispatchSchedule, ess: EssParams, mode: CaseMode, **settings) -> dict:
    return {
        "objective": schedule.objective,
        "tie_break_cost": schedule.tie_break_cost,
        "hours": len(schedule),
        "soc0": schedule.soc0,
        "mode": CaseMode.parse(mode).value,
        "ess": ess.as_dict(),
        "settings": settings,
    }


def parse_schedule_csv(source: bytes, soc0: float = 0.0, objective: float | None = None) -> DispatchSchedule:
    """Read a schedule CSV back; used to validate written output."""
    text = source.decode("utf-8") if isinstance(source, (bytes, bytearray)) else source
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != SCHEDULE_COLUMNS:
        raise LengthMismatch(f"schedule header must be {','.join(SCHEDULE_COLUMNS)}")
    body = [r for r in rows[1:] if r]
    cols = list(zip(*body)) if body else [()] * len(SCHEDULE_COLUMNS)
    stamps = cols[0]
    timestamps = None
    if stamps and not all(s.isdigit() for s in stamps):
        timestamps = tuple(datetime.fromisoformat(s) for s in stamps)
    p_ch, p_dis, p_grid, soc, price = (np.array(c, dtype=float) for c in cols[1:])
    if not np.array_equal(p_grid, p_dis - p_ch):
        raise LengthMismatch("p_grid column is not p_dis - p_ch")
    if objective is None:
        objective = float(np.dot(price, p_grid))
    return DispatchSchedule(p_ch, p_dis, soc, objective, price, soc0, 0.0, timestamps)


def write_schedule(schedule: DispatchSchedule, ess: EssParams, mode: CaseMode, csv_path, json_path,
                   **settings) -> None:
    with open(csv_path, "wb") as fh:
        fh.write(serialize_schedule_csv(schedule))
    with open(json_path, "w") as fh:
        json.dump(schedule_sidecar(schedule, ess, mode, **settings), fh, indent=2)

