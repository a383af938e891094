"""Run configuration, loaded from a YAML file.

Every modelling constant has a default here and can be overridden from the
file. Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields, replace
from datetime import datetime

import numpy as np
import yaml

from .dispatch import DEFAULT_TIE_BREAK, CaseMode, EssParams
from .errors import ConfigError
from .ingest import DEFAULT_NON_DISPATCHABLE, FUELS
from .mei import EmissionFactors, SegmentationConfig, SupplyShareTable
from .synth import ResponseCurve, SynthParams


@dataclass(frozen=True)
class SweepConfig:
    capacities: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    carbon_prices: tuple[float, ...] = (40.0, 80.0, 160.0)
    mode: CaseMode = CaseMode.CARBON_ONLY
    c_rate: float = 1.0
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    synth: SynthParams | None = None
    non_dispatchable: frozenset = DEFAULT_NON_DISPATCHABLE
    segmentation: SegmentationConfig = SegmentationConfig()
    emission_factors: EmissionFactors = EmissionFactors()
    import_rule: str | tuple[int, ...] = "auto"
    share_method: str = "chord"
    ess: EssParams = EssParams(capacity=4.0, p_ch_max=1.0, p_dis_max=1.0)
    carbon_price: float = 80.0
    mode: CaseMode = CaseMode.COMBINED
    window: int | None = None
    step: int | None = None
    sweep: SweepConfig = field(default_factory=SweepConfig)
    epc_window: int | None = None
    tie_break: float = DEFAULT_TIE_BREAK
    output_dir: str = "out"

    def check_source(self):
        if (self.input is None) == (self.synth is None):
            raise ConfigError("configure exactly one data source: 'input' (CSV path) or 'synth' (parameters)")


def _build(cls, data, where):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    return data


def _synth(data) -> SynthParams:
    if data is True:
        return SynthParams()
    d = dict(_build(SynthParams, data, "synth"))
    for key in ("gas_curve", "hydro_curve"):
        if key in d:
            curve = d[key]
            if isinstance(curve, dict):
                d[key] = ResponseCurve(**{k: float(v) for k, v in curve.items()})
            else:
                d[key] = ResponseCurve(*map(float, curve))
    if "start" in d and not isinstance(d["start"], datetime):
        d["start"] = datetime.fromisoformat(str(d["start"]))
    if "price_coeffs" in d:
        d["price_coeffs"] = tuple(float(v) for v in d["price_coeffs"])
    return SynthParams(**d)


def config_from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - {f.name for f in fields(RunConfig)})
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    try:
        kw = {}
        if data.get("input") is not None:
            kw["input"] = str(data["input"])
        if data.get("synth") not in (None, False):
            kw["synth"] = _synth(data["synth"])
        if "non_dispatchable" in data:
            nd = frozenset(data["non_dispatchable"] or ())
            bad = sorted(nd - set(FUELS))
            if bad:
                raise ConfigError(f"non_dispatchable names unknown fuels {bad}")
            kw["non_dispatchable"] = nd
        if "segmentation" in data:
            kw["segmentation"] = SegmentationConfig(**_build(SegmentationConfig, data["segmentation"], "segmentation"))
        if "emission_factors" in data:
            kw["emission_factors"] = EmissionFactors.from_mapping(data["emission_factors"] or {})
        if "import_rule" in data:
            rule = data["import_rule"]
            kw["import_rule"] = "auto" if rule == "auto" else tuple(int(s) for s in rule)
        if "share_method" in data:
            if data["share_method"] not in ("chord", "regression"):
                raise ConfigError("share_method must be 'chord' or 'regression'")
            kw["share_method"] = data["share_method"]
        if "ess" in data:
            ess = dict(_build(EssParams, data["ess"], "ess"))
            base = RunConfig.ess
            kw["ess"] = replace(base, **ess)
        for key in ("carbon_price", "tie_break"):
            if key in data:
                kw[key] = float(data[key])
        if "mode" in data:
            kw["mode"] = CaseMode.parse(data["mode"])
        for key in ("window", "step", "epc_window"):
            if data.get(key) is not None:
                kw[key] = int(data[key])
        if "sweep" in data:
            sw = dict(_build(SweepConfig, data["sweep"], "sweep"))
            if "mode" in sw:
                sw["mode"] = CaseMode.parse(sw["mode"])
            for key in ("capacities", "carbon_prices"):
                if key in sw:
                    sw[key] = tuple(float(v) for v in sw[key])
            kw["sweep"] = SweepConfig(**sw)
        if data.get("output_dir") is not None:
            kw["output_dir"] = str(data["output_dir"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from None
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping at top level")
    return config_from_dict(data)


SHARES_COLUMNS = ("segment", "gas", "hydro", "import")


def parse_shares_csv(data: bytes, config: SegmentationConfig = SegmentationConfig()) -> SupplyShareTable:
    """Read ``segment,gas,hydro,import[,mean_net_imports]`` rows, one per segment."""
    rows = list(csv.reader(io.StringIO(data.decode("utf-8-sig"))))
    if not rows:
        raise ConfigError("shares file is empty")
    header = [h.strip() for h in rows[0]]
    for col in SHARES_COLUMNS:
        if col not in header:
            raise ConfigError(f"shares file lacks column {col!r}")
    idx = {h: i for i, h in enumerate(header)}
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    try:
        body.sort(key=lambda r: int(r[idx["segment"]]))
        segs = [int(r[idx["segment"]]) for r in body]
        if segs != list(range(1, config.count + 1)):
            raise ConfigError(f"shares file must list segments 1..{config.count}, got {segs}")
        col = {c: np.array([float(r[idx[c]]) for r in body]) for c in SHARES_COLUMNS[1:]}
        imports = None
        if "mean_net_imports" in idx:
            imports = np.array([float(r[idx["mean_net_imports"]]) if r[idx["mean_net_imports"]].strip()
                                else np.nan for r in body])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed shares file: {exc}") from None
    return SupplyShareTable.from_shares(col["gas"], col["hydro"], col["import"], config, imports)
