"""Marginal emission intensity estimation and carbon-aware storage dispatch."""

from .accounting import OperationReport, evaluate
from .dispatch import CaseMode, DispatchSchedule, EssParams, PriceSignals, rolling_horizon, solve_dispatch
from .dp import dp_oracle
from .errors import ConfigError, DataError, MeiDispatchError, SolverError
from .harness import run_cases, sensitivity_sweep
from .ingest import GridSeries, HourlyGridRecord, parse_grid_csv, read_grid_csv
from .mei import EmissionFactors, MeiTable, SegmentationConfig, estimate_mei, mei_table, ontario_shares
from .synth import SynthParams, synth_generate

__all__ = [
    "CaseMode", "ConfigError", "DataError", "DispatchSchedule", "EmissionFactors", "EssParams",
    "GridSeries", "HourlyGridRecord", "MeiDispatchError", "MeiTable", "OperationReport", "PriceSignals",
    "SegmentationConfig", "SolverError", "SynthParams", "dp_oracle", "estimate_mei", "evaluate",
    "mei_table", "ontario_shares", "parse_grid_csv", "read_grid_csv", "rolling_horizon", "run_cases",
    "sensitivity_sweep", "solve_dispatch", "synth_generate",
]
