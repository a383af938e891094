"""Dynamic-programming reference solver for the dispatch problem.

SoC is restricted to the lattice ``k / soc_steps``. Each hour moves the
unit from one lattice point to another; the powers realising a move are
unique when charging and discharging are exclusive. Otherwise the move can
also carry a simultaneous "burn" component, discretised into
``power_steps`` levels. Because every lattice schedule is feasible for the
continuous problem, the DP optimum is a lower bound on the LP optimum and
approaches it as the lattice is refined.
"""

from __future__ import annotations

import numpy as np

from .dispatch import (
    DEFAULT_TIE_BREAK,
    CaseMode,
    DispatchSchedule,
    EssParams,
    PriceSignals,
    cost_scale,
    effective_price,
    soc_trajectory,
)
from .errors import BudgetExceeded, ConfigError

DEFAULT_BUDGET = 10 ** 8


def _moves(src: np.ndarray, dst: np.ndarray, ess: EssParams):
    """Powers for every (src, dst) SoC pair; NaN where the move is infeasible."""
    delta = dst[None, :] - src[:, None]
    p_ch = np.where(delta > 0, delta * ess.capacity / ess.eta_ch, 0.0)
    p_dis = np.where(delta < 0, -delta * ess.capacity * ess.eta_dis, 0.0)
    slack = 1e-12 * max(1.0, ess.p_ch_max, ess.p_dis_max)
    ok = (p_ch <= ess.p_ch_max + slack) & (p_dis <= ess.p_dis_max + slack)
    p_ch = np.minimum(p_ch, ess.p_ch_max)
    p_dis = np.minimum(p_dis, ess.p_dis_max)
    return p_ch, p_dis, ok


def dp_oracle(prices: PriceSignals, ess: EssParams, mode: CaseMode = CaseMode.COMBINED,
              soc_steps: int = 200, power_steps: int = 50, *, tie_break: float = DEFAULT_TIE_BREAK,
              exclusive: bool = True, budget: int = DEFAULT_BUDGET) -> tuple[float, DispatchSchedule]:
    """Exact optimum over the SoC lattice; returns ``(objective, schedule)``.

    The objective excludes the throughput tie-break, matching ``solve_dispatch``.
    """
    mode = CaseMode.parse(mode)
    if soc_steps < 10 or power_steps < 2:
        raise ConfigError("dp_oracle needs soc_steps >= 10 and power_steps >= 2")
    c = effective_price(prices, mode)
    T = c.size
    if T * soc_steps * power_steps > budget:
        raise BudgetExceeded(f"T*soc_steps*power_steps = {T * soc_steps * power_steps} exceeds budget {budget}")

    eps = tie_break * cost_scale(c)
    rt = ess.eta_ch * ess.eta_dis
    lattice = np.arange(soc_steps + 1) / soc_steps

    terminal = np.zeros(soc_steps + 1)
    if ess.terminal_policy == "at_least_initial":
        terminal[lattice < ess.soc0 - 1e-12] = -np.inf

    def hour_reward(ct, p_ch, p_dis, ok):
        grid = p_dis - p_ch
        thru = p_ch + p_dis
        r = ct * grid - eps * thru
        burn = np.zeros_like(p_ch)
        if not exclusive:
            # reward is affine in the burn level, so the best of the
            # power_steps + 1 levels is one of the two end points
            bmax = np.maximum(np.minimum(ess.p_ch_max - p_ch, (ess.p_dis_max - p_dis) / rt), 0.0)
            gain = (ct * (rt - 1.0) - eps * (1.0 + rt)) * bmax
            take = gain > 0
            r = np.where(take, r + gain, r)
            burn = np.where(take, bmax, 0.0)
        return np.where(ok, r, -np.inf), burn

    inner = _moves(lattice, lattice, ess)
    policy = np.zeros((T, soc_steps + 1), dtype=int)
    burns = np.zeros((T, soc_steps + 1))
    value = terminal
    for t in range(T - 1, 0, -1):
        r, burn = hour_reward(c[t], *inner)
        q = r + value[None, :]
        best = np.argmax(q, axis=1)
        policy[t] = best
        burns[t] = burn[np.arange(soc_steps + 1), best]
        value = q[np.arange(soc_steps + 1), best]

    first = _moves(np.array([ess.soc0]), lattice, ess)
    r0, burn0 = hour_reward(c[0], *first)
    q0 = r0[0] + value
    j = int(np.argmax(q0))
    if not np.isfinite(q0[j]):
        raise ConfigError("no feasible lattice schedule (terminal SoC unreachable on this lattice)")

    states = np.empty(T + 1)
    states[0] = ess.soc0
    idx = np.empty(T, dtype=int)
    idx[0] = j
    burn_seq = np.empty(T)
    burn_seq[0] = burn0[0, j]
    for t in range(1, T):
        idx[t] = policy[t, idx[t - 1]]
        burn_seq[t] = burns[t, idx[t - 1]]
    states[1:] = lattice[idx]

    delta = np.diff(states)
    p_ch = np.minimum(np.where(delta > 0, delta * ess.capacity / ess.eta_ch, 0.0), ess.p_ch_max)
    p_dis = np.minimum(np.where(delta < 0, -delta * ess.capacity * ess.eta_dis, 0.0), ess.p_dis_max)
    p_ch = p_ch + burn_seq
    p_dis = p_dis + rt * burn_seq

    soc = soc_trajectory(p_ch, p_dis, ess)
    objective = float(np.dot(c, p_dis - p_ch))
    schedule = DispatchSchedule(p_ch, p_dis, soc, objective, c, ess.soc0,
                                float(eps * (p_ch.sum() + p_dis.sum())), prices.timestamps)
    return objective, schedule
