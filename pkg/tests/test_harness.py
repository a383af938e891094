import numpy as np
import pytest

from mei_dispatch.dispatch import CaseMode, EssParams, PriceSignals, solve_dispatch
from mei_dispatch.errors import ConfigError
from mei_dispatch.harness import (
    SweepGrid,
    case_bundle,
    dominance_violations,
    normalized_performance,
    run_cases,
    sensitivity_sweep,
)
from mei_dispatch.accounting import OperationReport


@pytest.fixture(scope="module")
def month(half_year):
    return half_year[0][:720]


@pytest.fixture(scope="module")
def cases(month, half_year_table):
    return run_cases(month, half_year_table, EssParams(4.0, 1.0, 1.0))


def test_dominance_chain_holds(cases):
    assert dominance_violations(cases) == []
    reports = cases.reports()
    assert reports[CaseMode.CARBON_ONLY].emission_reduction > reports[CaseMode.ELECTRICITY_ONLY].emission_reduction


def test_case_objectives_match_single_solves(cases):
    for mode in CaseMode:
        direct = solve_dispatch(cases.prices, cases.ess, mode)
        assert cases[mode].schedule.objective == pytest.approx(direct.objective, rel=1e-12)


def test_dominance_detects_swapped_reports(cases):
    runs = dict(cases.runs)
    runs[CaseMode.ELECTRICITY_ONLY], runs[CaseMode.CARBON_ONLY] = runs[CaseMode.CARBON_ONLY], runs[CaseMode.ELECTRICITY_ONLY]
    broken = type(cases)(cases.prices, cases.ess, cases.carbon_price, runs)
    assert dominance_violations(broken)


def test_normalised_scores(cases):
    norm = normalized_performance(cases)
    for scores in norm.values():
        assert all(0.0 <= v <= 1.0 for v in scores)
    for k in range(3):
        assert max(v[k] for v in norm.values()) == 1.0
    same = OperationReport(1.0, 0.0, 1.0, 0.5, 0.5, 40.0, 2.0, 0.9)
    assert normalized_performance({CaseMode.COMBINED: same, CaseMode.CARBON_ONLY: same}) == {
        CaseMode.COMBINED: (1.0, 1.0, 1.0), CaseMode.CARBON_ONLY: (1.0, 1.0, 1.0)}
    with pytest.raises(ConfigError):
        normalized_performance({})


def test_case_bundle_lists_every_mode(cases):
    bundle = case_bundle(cases)
    assert set(bundle["cases"]) == {m.value for m in CaseMode}
    assert bundle["carbon_price"] == 80.0


def test_carbon_only_sweep_properties(month, half_year_table):
    grid = sensitivity_sweep(month, half_year_table, [1, 2, 4], [40, 80, 160])
    er = grid.emission_reduction
    assert np.all(er == er[:, :1])
    assert np.all(np.diff(er[:, 0]) >= 0)
    np.testing.assert_allclose(er[:, 0], er[0, 0] * np.array([1, 2, 4]), rtol=1e-9)
    back = SweepGrid.from_csv(grid.to_csv())
    np.testing.assert_array_equal(back.emission_reduction, er)
    assert len(grid.to_csv().decode().splitlines()) == 10


def test_one_cell_sweep(month, half_year_table):
    grid = sensitivity_sweep(month[:48], half_year_table, [2.0], [80.0])
    assert list(grid.rows())[0][:2] == (2.0, 80.0)


def test_combined_reduction_grows_with_carbon_price(month, half_year_table):
    grid = sensitivity_sweep(month, half_year_table, [4.0], [0, 20, 40, 80, 160, 320, 640], CaseMode.COMBINED)
    assert np.all(np.diff(grid.emission_reduction[0]) >= -1e-9)


def test_combined_sweep_diagonal_is_non_increasing(month, half_year_table):
    # holds once the unit is a net reducer at the lowest price: reduction is
    # linear in capacity and non-decreasing in carbon price
    axis_c = [1, 2, 4, 8, 16]
    axis_p = [160, 240, 320, 480, 640]
    grid = sensitivity_sweep(month, half_year_table, axis_c, axis_p, CaseMode.COMBINED)
    assert grid.emission_reduction[0, 0] >= 0
    diag = np.diag(grid.emissions)
    assert np.all(np.diff(diag) <= 1e-9)
    assert grid.emissions[-1, -1] == grid.emissions.min()


def test_parallel_sweep_matches_serial(month, half_year_table):
    a = sensitivity_sweep(month[:168], half_year_table, [1, 2], [40, 80], CaseMode.COMBINED)
    b = sensitivity_sweep(month[:168], half_year_table, [1, 2], [40, 80], CaseMode.COMBINED, workers=2)
    np.testing.assert_array_equal(a.emission_reduction, b.emission_reduction)
    np.testing.assert_array_equal(a.revenue, b.revenue)


def test_sweep_rejects_bad_axes(month, half_year_table):
    with pytest.raises(ConfigError):
        sensitivity_sweep(month, half_year_table, [1], [40], CaseMode.ELECTRICITY_ONLY)
    with pytest.raises(ConfigError):
        sensitivity_sweep(month, half_year_table, [], [40])


def test_price_signal_identity():
    p = PriceSignals([1.0, 2.0], 80.0, [0.1, 0.2])
    np.testing.assert_array_equal(p.carbon_price, [80.0, 80.0])
