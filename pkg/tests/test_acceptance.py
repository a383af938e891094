"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np

from mei_dispatch.dispatch import (
    CaseMode,
    EssParams,
    PriceSignals,
    schedule_violations,
    simultaneous_hours,
    solve_dispatch,
)
from mei_dispatch.dp import dp_oracle
from mei_dispatch.harness import dominance_violations, run_cases, sensitivity_sweep
from mei_dispatch.mei import (
    EmissionFactors,
    estimate_mei,
    mei_table,
    ontario_shares,
)
from mei_dispatch.synth import SynthParams, synth_generate

from conftest import ACCEPTANCE_LINES

PUBLISHED_MEI = np.array([-0.053, 0.020, 0.087, 0.151, 0.200, 0.236, 0.258, 0.269, 0.266, 0.250,
                          0.222, 0.179, 0.127, 0.361, 0.369])


def verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_published_ontario_mei():
    t0 = time.perf_counter()
    table = mei_table(ontario_shares(), EmissionFactors(gas=0.37, hydro=0.0, imports=0.44), (14, 15))
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(table.mei - PUBLISHED_MEI)))
    spots = {s: round(float(table.mei[s - 1]), 3) for s in (1, 5, 14, 15)}
    ok = err <= 1e-3 and elapsed < 1.0 and spots == {1: -0.053, 5: 0.2, 14: 0.361, 15: 0.369}
    verdict(1, ok, f"published MEI max abs error {err:.2e} (<= 1e-3), spots {spots}, {elapsed:.3f} s")


def test_criterion_2_lp_matches_dp_oracle():
    rng = np.random.default_rng(2024)
    units = (EssParams(1.0, 1.0, 1.0), EssParams(4.0, 1.0, 1.0))
    n = 120
    worst_low, worst_rel = np.inf, 0.0
    bad = []
    t0 = time.perf_counter()
    for k in range(n):
        p = PriceSignals(rng.uniform(-20, 150, 24), 80.0, rng.uniform(-0.05, 0.4, 24))
        ess = units[k % 2]
        lp = solve_dispatch(p, ess, CaseMode.COMBINED).objective
        dp, _ = dp_oracle(p, ess, CaseMode.COMBINED, soc_steps=200, power_steps=50)
        gap = lp - dp
        worst_low = min(worst_low, gap)
        worst_rel = max(worst_rel, gap / max(abs(lp), 1e-12))
        if not (-1e-9 <= gap <= 0.02 * abs(lp) + 1e-6):
            bad.append(k)
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    verdict(2, ok, f"{n} instances, min(LP-DP) {worst_low:.2e}, max (LP-DP)/|LP| {worst_rel:.4f} (<= 0.02), "
                   f"failures {bad}, {elapsed:.1f} s")


def test_criterion_3_two_hour_closed_form():
    t0 = time.perf_counter()
    s = solve_dispatch(PriceSignals([0.0, 100.0], 0.0, [0.0, 0.0]), EssParams(1.0, 1.0, 1.0),
                       CaseMode.ELECTRICITY_ONLY)
    elapsed = time.perf_counter() - t0
    ok = abs(s.objective - 84.64) <= 1e-6 and elapsed < 1.0
    verdict(3, ok, f"objective {s.objective:.10f} vs 84.64, {elapsed:.3f} s")


def test_criterion_4_dominance_chain(half_year, half_year_table):
    result = run_cases(half_year[0][:720], half_year_table, EssParams(4.0, 1.0, 1.0), 80.0)
    problems = dominance_violations(result, slack=1e-6)
    r = result.reports()
    e = [r[m].elec_revenue for m in CaseMode]
    er = [r[m].emission_reduction for m in CaseMode]
    verdict(4, not problems, f"elec revenue {[round(v, 2) for v in e]}, ER {[round(v, 3) for v in er]}, "
                             f"violations {problems}")


def test_criterion_5_carbon_only_sweep(half_year, half_year_table):
    t0 = time.perf_counter()
    grid = sensitivity_sweep(half_year[0], half_year_table, [1, 2, 4, 8], [40, 80, 160], CaseMode.CARBON_ONLY)
    elapsed = time.perf_counter() - t0
    er = grid.emission_reduction
    flat = bool(np.all(er == er[:, :1]))
    rising = bool(np.all(np.diff(er, axis=0) >= 0))
    ok = flat and rising and elapsed < 30
    verdict(5, ok, f"ER constant across price {flat}, non-decreasing in capacity {rising}, "
                   f"ER by capacity {np.round(er[:, 0], 3).tolist()}, {elapsed:.1f} s")


def test_criterion_6_regression_recovery(half_year, half_year_table):
    clean, truth = synth_generate(SynthParams(noise_scale=0.0))
    _, fits = estimate_mei(clean)
    worst_curve, worst_r2 = 0.0, 0.0
    for r, fit in fits.items():
        xs = np.linspace(*fit.fit_domain, 2001)
        ref = truth.evaluate(r, xs)
        worst_curve = max(worst_curve, float(np.max(np.abs(fit(xs) - ref)) / np.max(np.abs(ref))))
        worst_r2 = max(worst_r2, abs(1.0 - fit.r_squared))
    noise_ok = True
    worst_share = 0.0
    shares = half_year_table.shares
    busy = shares.sample_counts >= 50
    for k, (lo, hi) in enumerate(shares.windows):
        if not busy[k]:
            continue
        for r in ("gas", "hydro", "import"):
            d = abs(shares.shares[r][k] - truth.chord(r, lo, hi))
            worst_share = max(worst_share, d)
            noise_ok &= d <= 0.05
    ok = worst_curve <= 1e-6 and worst_r2 <= 1e-9 and noise_ok
    verdict(6, ok, f"noise-free curve rel error {worst_curve:.1e}, |1-R2| {worst_r2:.1e}; noisy share "
                   f"error {worst_share:.3f} (<= 0.05) on {int(busy.sum())} segments with >= 50 samples")


def test_criterion_7_full_horizon_solve(half_year, half_year_table):
    from mei_dispatch.harness import price_signals

    series = half_year[0]
    prices = price_signals(series, half_year_table, 80.0)
    ess = EssParams(4.0, 1.0, 1.0)
    t0 = time.perf_counter()
    s = solve_dispatch(prices, ess, CaseMode.COMBINED)
    elapsed = time.perf_counter() - t0
    problems = schedule_violations(s, ess, tol=1e-9)
    both = simultaneous_hours(s)
    ok = len(series) == 4380 and elapsed < 60 and not problems and both.size == 0
    verdict(7, ok, f"{len(series)} h solved in {elapsed:.2f} s, violations {problems}, "
                   f"simultaneous hours {both.size}")


def test_criterion_8_constant_price_is_idle():
    rng = np.random.default_rng(8)
    active = []
    for k in range(50):
        T = int(rng.integers(1, 200))
        ess = EssParams(rng.uniform(0.5, 10), rng.uniform(0.1, 5), rng.uniform(0.1, 5),
                        rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0))
        mode = list(CaseMode)[k % 3]
        p = PriceSignals(np.full(T, rng.uniform(0, 150)), rng.uniform(0, 200), np.full(T, rng.uniform(0, 0.4)))
        s = solve_dispatch(p, ess, mode)
        if np.any(s.p_ch != 0) or np.any(s.p_dis != 0):
            active.append(k)
    verdict(8, not active, f"50 constant non-negative price instances, non-idle schedules {active}")
