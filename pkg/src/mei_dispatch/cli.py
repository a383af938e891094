"""``mei-dispatch`` command line: synth, fit, dispatch, cases and sweep.

Each command loads a ``RunConfig`` (YAML, all keys optional), runs the
pipeline stage by stage and writes its outputs under ``--out``. Every file
written is read back and checked before the process exits. Failures print
``error [<stage>]: <message>`` and exit with 2 (config), 3 (data) or
4 (solver).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from .accounting import OperationReport, evaluate
from .config import RunConfig, load_config, parse_shares_csv
from .dispatch import (
    parse_schedule_csv,
    rolling_horizon,
    schedule_violations,
    write_schedule,
)
from .errors import ConfigError, DataError, MeiDispatchError
from .harness import SweepGrid, price_signals, run_cases, sensitivity_sweep, write_case_bundle
from .ingest import GridSeries, parse_grid_csv, read_grid_csv, write_grid_csv
from .mei import MeiTable, fit_resources, mei_table, supply_shares
from .synth import SynthParams, synth_generate

COMMANDS = ("synth", "fit", "dispatch", "cases", "sweep")


class StageError(Exception):
    def __init__(self, stage: str, cause: MeiDispatchError):
        self.stage = stage
        self.cause = cause
        super().__init__(f"error [{stage}]: {cause}")


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except MeiDispatchError as exc:
        raise StageError(name, exc) from exc
    except OSError as exc:
        raise StageError(name, ConfigError(f"file system error: {exc}")) from exc


def _out_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "isoformat"):
        return o.isoformat()
    raise TypeError(type(o).__name__)


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _reload_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise DataError(f"output {path} failed to re-parse: {exc}") from None


# -- pipeline stages --------------------------------------------------------

def load_series(cfg: RunConfig):
    """Returns ``(series, ground_truth)``; the truth is None for CSV input."""
    cfg.check_source()
    if cfg.input is not None:
        try:
            return read_grid_csv(cfg.input), None
        except OSError as exc:
            raise DataError(f"cannot read input {cfg.input}: {exc}") from None
    return synth_generate(cfg.synth)


def build_table(cfg: RunConfig, series: GridSeries | None, shares_file: str | None):
    """Returns ``(table, fits)``; fits is None when shares come from a file."""
    if shares_file is not None:
        try:
            shares = parse_shares_csv(_read_bytes(shares_file), cfg.segmentation)
        except OSError as exc:
            raise ConfigError(f"cannot read shares file {shares_file}: {exc}") from None
        return mei_table(shares, cfg.emission_factors, cfg.import_rule), None
    fits = fit_resources(series, cfg.non_dispatchable)
    shares = supply_shares(fits, cfg.segmentation, series, cfg.non_dispatchable, cfg.share_method)
    return mei_table(shares, cfg.emission_factors, cfg.import_rule), fits


def _data_and_table(cfg, shares_file):
    with stage("ingest"):
        series, _ = load_series(cfg)
    with stage("mei"):
        table, fits = build_table(cfg, series, shares_file)
    return series, table, fits


def _write_table(table: MeiTable, fits, out: str) -> list[str]:
    path = os.path.join(out, "mei_table.json")
    with open(path, "w") as fh:
        fh.write(table.to_json() + "\n")
    back = MeiTable.from_dict(_reload_json(path))
    if not np.array_equal(back.mei, table.mei):
        raise DataError(f"{path}: MEI column did not round-trip")
    written = [path]
    if fits is not None:
        diag = os.path.join(out, "fit_diagnostics.json")
        payload = {"fits": {r: f.as_dict() for r, f in fits.items()},
                   "shares": table.to_dict()["segments"]}
        _write_json(diag, payload)
        if set(_reload_json(diag)["fits"]) != set(fits):
            raise DataError(f"{diag}: fit diagnostics did not round-trip")
        written.append(diag)
    return written


# -- commands -----------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out: str, shares_file=None) -> list[str]:
    if cfg.synth is None:
        raise ConfigError("synth needs synthetic parameters, not an input CSV")
    with stage("synth"):
        series, truth = synth_generate(cfg.synth)
    with stage("output"):
        grid = os.path.join(out, "grid.csv")
        write_grid_csv(series, grid)
        if parse_grid_csv(_read_bytes(grid)) != series:
            raise DataError(f"{grid} did not round-trip")
        gt = os.path.join(out, "ground_truth.json")
        _write_json(gt, {"params": asdict(cfg.synth),
                         "gas": asdict(truth.gas), "hydro": asdict(truth.hydro),
                         "import": "residual_demand - gas - hydro"})
        _reload_json(gt)
    return [grid, gt]


def cmd_fit(cfg: RunConfig, out: str, shares_file=None) -> list[str]:
    series = None
    if shares_file is None:
        with stage("ingest"):
            series, _ = load_series(cfg)
    with stage("mei"):
        table, fits = build_table(cfg, series, shares_file)
    with stage("output"):
        return _write_table(table, fits, out)


def cmd_dispatch(cfg: RunConfig, out: str, shares_file=None) -> list[str]:
    series, table, fits = _data_and_table(cfg, shares_file)
    with stage("dispatch"):
        prices = price_signals(series, table, cfg.carbon_price, cfg.non_dispatchable)
        sched = rolling_horizon(prices, cfg.ess, cfg.mode, cfg.window, cfg.step, tie_break=cfg.tie_break)
    with stage("accounting"):
        report = evaluate(sched, prices, cfg.ess, cfg.epc_window)
    with stage("output"):
        written = _write_table(table, fits, out)
        csv_path = os.path.join(out, "schedule.csv")
        json_path = os.path.join(out, "schedule.json")
        write_schedule(sched, cfg.ess, cfg.mode, csv_path, json_path, carbon_price=cfg.carbon_price,
                       window=cfg.window, step=cfg.step, tie_break=cfg.tie_break)
        back = parse_schedule_csv(_read_bytes(csv_path), cfg.ess.soc0)
        if not (np.array_equal(back.p_ch, sched.p_ch) and np.array_equal(back.p_dis, sched.p_dis)):
            raise DataError(f"{csv_path} did not round-trip")
        problems = schedule_violations(back, cfg.ess)
        if problems:
            raise DataError(f"{csv_path}: written schedule breaks invariants: {problems[:3]}")
        _reload_json(json_path)
        rep_path = os.path.join(out, "report.json")
        _write_json(rep_path, report.to_dict())
        if OperationReport.from_dict(_reload_json(rep_path)) != report:
            raise DataError(f"{rep_path} did not round-trip")
    return written + [csv_path, json_path, rep_path]


def cmd_cases(cfg: RunConfig, out: str, shares_file=None) -> list[str]:
    series, table, fits = _data_and_table(cfg, shares_file)
    with stage("harness"):
        result = run_cases(series, table, cfg.ess, cfg.carbon_price, non_dispatchable=cfg.non_dispatchable,
                           window=cfg.window, step=cfg.step, tie_break=cfg.tie_break,
                           epc_window=cfg.epc_window)
    with stage("output"):
        written = _write_table(table, fits, out) + write_case_bundle(result, out)
        bundle = _reload_json(os.path.join(out, "cases.json"))
        for mode, run in result.runs.items():
            entry = bundle["cases"][mode.value]
            if OperationReport.from_dict(entry["report"]) != run.report:
                raise DataError(f"cases.json: {mode.value} report did not round-trip")
            back = parse_schedule_csv(_read_bytes(os.path.join(out, entry["schedule_csv"])), cfg.ess.soc0)
            if not np.array_equal(back.p_grid, run.schedule.p_grid):
                raise DataError(f"{entry['schedule_csv']} did not round-trip")
    return written


def cmd_sweep(cfg: RunConfig, out: str, shares_file=None) -> list[str]:
    series, table, fits = _data_and_table(cfg, shares_file)
    sw = cfg.sweep
    with stage("sweep"):
        grid = sensitivity_sweep(series, table, sw.capacities, sw.carbon_prices, sw.mode, c_rate=sw.c_rate,
                                 ess=cfg.ess, non_dispatchable=cfg.non_dispatchable, tie_break=cfg.tie_break,
                                 workers=sw.workers)
    with stage("output"):
        written = _write_table(table, fits, out)
        path = os.path.join(out, "sweep.csv")
        with open(path, "wb") as fh:
            fh.write(grid.to_csv())
        back = SweepGrid.from_csv(_read_bytes(path), sw.mode, sw.c_rate)
        if not (np.array_equal(back.emission_reduction, grid.emission_reduction)
                and np.array_equal(back.revenue, grid.revenue)):
            raise DataError(f"{path} did not round-trip")
    return written + [path]


HANDLERS = {"synth": cmd_synth, "fit": cmd_fit, "dispatch": cmd_dispatch, "cases": cmd_cases,
            "sweep": cmd_sweep}


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mei-dispatch",
                                description="Marginal emission intensity estimation and storage dispatch.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="YAML run configuration (all keys optional)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="seed for synthetic data (overrides synth.seed)")
    p.add_argument("--shares-file", help="CSV of per-segment supply shares; skips the regression")
    p.add_argument("--input", help="grid CSV (overrides input and disables synth)")
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.input is not None:
        cfg = replace(cfg, input=args.input, synth=None)
    if cfg.input is None and cfg.synth is None:
        cfg = replace(cfg, synth=SynthParams())
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if cfg.synth is None:
            raise ConfigError("--seed only applies to synthetic data")
        cfg = replace(cfg, synth=replace(cfg.synth, seed=args.seed))
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    cfg.check_source()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with stage("config"):
            cfg = resolve_config(args)
            out = _out_dir(cfg.output_dir)
        written = HANDLERS[args.command](cfg, out, args.shares_file)
    except StageError as exc:
        print(exc, file=sys.stderr)
        return exc.cause.exit_code
    except MeiDispatchError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
