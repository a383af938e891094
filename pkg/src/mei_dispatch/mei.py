"""Marginal emission intensity from marginal-resource response curves.

Gas, hydro and net imports are each regressed on residual demand with a
cubic. Residual demand is cut into fixed-width segments (unbounded at both
ends); within each segment the curves are replaced by their chord slopes,
the supply shares. The MEI of a segment is the emission-factor-weighted sum
of its shares, and an hour's MEI is the value of the segment its residual
demand falls in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigError, DegenerateDesign, EmptySegmentDomain, ResourceMismatch
from .ingest import DEFAULT_NON_DISPATCHABLE, GridSeries

RESOURCES = ("gas", "hydro", "import")


# -- cubic regression -----------------------------------------------------

@dataclass(frozen=True)
class CubicFit:
    coefficients: tuple[float, float, float, float]
    r_squared: float
    fit_domain: tuple[float, float]
    sample_count: int
    # the fit is solved on u = (x - center) / scale; kept for stable evaluation
    center: float = 0.0
    scale: float = 1.0
    scaled_coefficients: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    degenerate_variance: bool = False

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.scale
        a0, a1, a2, a3 = self.scaled_coefficients
        return a0 + u * (a1 + u * (a2 + u * a3))

    def polynomial(self) -> Polynomial:
        return Polynomial(self.coefficients)

    def as_dict(self) -> dict:
        return {
            "coefficients": list(self.coefficients),
            "r_squared": _json_float(self.r_squared),
            "fit_domain": list(self.fit_domain),
            "sample_count": self.sample_count,
            "degenerate_variance": self.degenerate_variance,
        }


def fit_cubic(xs: Sequence[float], ys: Sequence[float]) -> CubicFit:
    """Ordinary least-squares cubic of ``ys`` on ``xs``.

    x is mapped affinely onto [-1, 1] before solving; the returned
    ``coefficients`` are expressed in the original x units.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DegenerateDesign(f"xs and ys must be 1-D of equal length, got {x.shape} and {y.shape}")
    if x.size < 4:
        raise DegenerateDesign(f"need at least 4 points for a cubic, got {x.size}")
    if np.unique(x).size < 4:
        raise DegenerateDesign("need at least 4 distinct x values for a cubic")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateDesign("non-finite sample")

    lo, hi = float(x.min()), float(x.max())
    center = 0.5 * (lo + hi)
    scale = 0.5 * (hi - lo)
    u = (x - center) / scale
    design = np.vander(u, 4, increasing=True)
    a, *_ = np.linalg.lstsq(design, y, rcond=None)

    # compose a(u) with u(x) to get coefficients in x
    in_x = Polynomial(a)(Polynomial([-center / scale, 1.0 / scale]))
    coef = np.zeros(4)
    coef[: in_x.coef.size] = in_x.coef

    resid = y - design @ a
    ss_res = float(resid @ resid)
    dev = y - y.mean()
    ss_tot = float(dev @ dev)
    degenerate = False
    if ss_tot == 0.0:
        # constant target: perfect fit by definition, otherwise flagged
        tol = (1e-12 * max(1.0, abs(float(y.mean())))) ** 2 * y.size
        if ss_res <= tol:
            r2 = 1.0
        else:
            r2 = -math.inf
            degenerate = True
    else:
        r2 = 1.0 - ss_res / ss_tot

    return CubicFit(
        coefficients=tuple(float(c) for c in coef),
        r_squared=r2,
        fit_domain=(lo, hi),
        sample_count=int(x.size),
        center=center,
        scale=scale,
        scaled_coefficients=tuple(float(c) for c in a),
        degenerate_variance=degenerate,
    )


# -- segmentation ---------------------------------------------------------

@dataclass(frozen=True)
class SegmentationConfig:
    first_upper_bound: float = -1000.0
    width: float = 1000.0
    count: int = 15

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"segment width must be > 0, got {self.width}")
        if int(self.count) != self.count or self.count < 2:
            raise ConfigError(f"segment count must be an integer >= 2, got {self.count}")

    @property
    def last_lower_bound(self) -> float:
        return self.first_upper_bound + (self.count - 2) * self.width

    def bounds(self, s: int) -> tuple[float, float]:
        """Nominal [lower, upper) of segment ``s`` (1-based); the end segments are unbounded."""
        if not 1 <= s <= self.count:
            raise IndexError(f"segment {s} outside 1..{self.count}")
        lo = -math.inf if s == 1 else self.first_upper_bound + (s - 2) * self.width
        hi = math.inf if s == self.count else self.first_upper_bound + (s - 1) * self.width
        return lo, hi

    def as_dict(self) -> dict:
        return {"first_upper_bound": self.first_upper_bound, "width": self.width, "count": self.count}


def segment_index(rd: float, config: SegmentationConfig = SegmentationConfig()) -> int:
    """Segment (1-based) holding residual demand ``rd``; boundaries go to the upper segment."""
    return int(segment_indices(np.array([rd], dtype=float), config)[0])


def segment_indices(rd, config: SegmentationConfig = SegmentationConfig()) -> np.ndarray:
    rd = np.asarray(rd, dtype=float)
    s = 2 + np.floor((rd - config.first_upper_bound) / config.width)
    s = np.clip(s, 2, config.count)
    # the division can round across a boundary; settle against the exact bounds
    lower = config.first_upper_bound + (s - 2) * config.width
    s = np.where((rd < lower) & (s > 2), s - 1, s)
    upper = config.first_upper_bound + (s - 1) * config.width
    s = np.where((rd >= upper) & (s < config.count), s + 1, s)
    s = np.where(rd < config.first_upper_bound, 1, s)
    return s.astype(int)


# -- supply shares --------------------------------------------------------

def resource_output(series: GridSeries, resource: str) -> np.ndarray:
    if resource == "gas":
        return series.gen["gas"]
    if resource == "hydro":
        return series.gen["hydro"]
    if resource == "import":
        return series.net_imports
    raise ResourceMismatch(f"unknown marginal resource {resource!r}")


def fit_resources(series: GridSeries, non_dispatchable=DEFAULT_NON_DISPATCHABLE,
                  resources: Iterable[str] = RESOURCES) -> dict[str, CubicFit]:
    x = series.residual_demand(non_dispatchable)
    return {r: fit_cubic(x, resource_output(series, r)) for r in resources}


@dataclass(frozen=True)
class SupplyShareTable:
    config: SegmentationConfig
    shares: Mapping[str, np.ndarray]
    mean_net_imports: np.ndarray
    sample_counts: np.ndarray
    windows: tuple[tuple[float, float], ...] = ()
    total: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.config.count
        shares = {}
        for r, v in self.shares.items():
            arr = np.array(v, dtype=float)
            if arr.shape != (n,):
                raise ResourceMismatch(f"shares for {r!r} have shape {arr.shape}, expected ({n},)")
            shares[r] = arr
        object.__setattr__(self, "shares", shares)
        object.__setattr__(self, "mean_net_imports", np.array(self.mean_net_imports, dtype=float).reshape(n))
        object.__setattr__(self, "sample_counts", np.array(self.sample_counts, dtype=int).reshape(n))
        total = np.zeros(n)
        for r in RESOURCES:
            if r in shares:
                total = total + shares[r]
        object.__setattr__(self, "total", total)

    @classmethod
    def from_shares(cls, gas, hydro, imports, config: SegmentationConfig = SegmentationConfig(),
                    mean_net_imports=None, sample_counts=None) -> SupplyShareTable:
        n = config.count
        return cls(
            config,
            {"gas": gas, "hydro": hydro, "import": imports},
            np.full(n, np.nan) if mean_net_imports is None else mean_net_imports,
            np.zeros(n, dtype=int) if sample_counts is None else sample_counts,
        )


def chord_windows(config: SegmentationConfig, domain: tuple[float, float]) -> list[tuple[float, float]]:
    """Per-segment x intervals the chord slope is taken over.

    Interior segments use their nominal bounds. The unbounded end segments
    are capped at one width and clipped to the fit domain.
    """
    xmin, xmax = domain
    out = []
    for s in range(1, config.count + 1):
        lo, hi = config.bounds(s)
        if s == 1:
            lo = max(xmin, config.first_upper_bound - config.width)
        if s == config.count:
            hi = min(xmax, config.last_lower_bound + config.width)
        if not (hi > lo and hi > xmin and lo < xmax):
            raise EmptySegmentDomain(s, lo, hi)
        out.append((lo, hi))
    return out


def supply_shares(fits: Mapping[str, CubicFit], config: SegmentationConfig, series: GridSeries,
                  non_dispatchable=DEFAULT_NON_DISPATCHABLE, method: str = "chord") -> SupplyShareTable:
    """Per-segment marginal supply share of each resource.

    ``method="chord"`` takes chord slopes of the fitted cubics across each
    segment window. ``method="regression"`` instead fits a straight line to
    the raw observations inside each window, ignoring ``fits`` except for
    their domains.
    """
    if not fits:
        raise ResourceMismatch("no fitted resources supplied")
    domain = (min(f.fit_domain[0] for f in fits.values()), max(f.fit_domain[1] for f in fits.values()))
    windows = chord_windows(config, domain)

    x = series.residual_demand(non_dispatchable)
    seg = segment_indices(x, config)
    counts = np.bincount(seg, minlength=config.count + 1)[1:]
    mean_imports = np.full(config.count, np.nan)
    for s in range(1, config.count + 1):
        mask = seg == s
        if mask.any():
            mean_imports[s - 1] = series.net_imports[mask].mean()

    shares = {}
    if method == "chord":
        for r, fit in fits.items():
            lam = np.empty(config.count)
            for k, (lo, hi) in enumerate(windows):
                lam[k] = (fit(hi) - fit(lo)) / (hi - lo)
            shares[r] = lam
    elif method == "regression":
        for r in fits:
            y = resource_output(series, r)
            lam = np.empty(config.count)
            for k, (lo, hi) in enumerate(windows):
                last = k == config.count - 1
                mask = (x >= lo) & ((x <= hi) if last else (x < hi))
                if np.unique(x[mask]).size < 2:
                    raise EmptySegmentDomain(k + 1, lo, hi)
                lam[k] = np.polyfit(x[mask], y[mask], 1)[0]
            shares[r] = lam
    else:
        raise ConfigError(f"unknown share method {method!r}; expected 'chord' or 'regression'")

    return SupplyShareTable(config, shares, mean_imports, counts, tuple(windows))


# -- MEI table ------------------------------------------------------------

@dataclass(frozen=True)
class EmissionFactors:
    """tCO2e/MWh per marginal resource."""

    gas: float = 0.37
    hydro: float = 0.0
    imports: float = 0.44

    def __post_init__(self):
        for name in ("gas", "hydro", "imports"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"emission factor {name} must be finite")

    @classmethod
    def from_mapping(cls, m: Mapping[str, float]) -> EmissionFactors:
        unknown = set(m) - set(RESOURCES) - {"imports"}
        if unknown:
            raise ResourceMismatch(f"unknown resources in emission factors: {sorted(unknown)}")
        kw = dict(m)
        if "import" in kw:
            kw["imports"] = kw.pop("import")
        return cls(**{k: float(v) for k, v in kw.items()})

    def as_dict(self) -> dict[str, float]:
        return {"gas": self.gas, "hydro": self.hydro, "import": self.imports}


@dataclass(frozen=True)
class MeiTable:
    config: SegmentationConfig
    mei: np.ndarray
    import_counted: np.ndarray
    shares: SupplyShareTable | None = None
    factors: EmissionFactors | None = None

    def __post_init__(self):
        mei = np.array(self.mei, dtype=float)
        if mei.shape != (self.config.count,) or not np.all(np.isfinite(mei)):
            raise ResourceMismatch("MEI must be finite with one value per segment")
        object.__setattr__(self, "mei", mei)
        object.__setattr__(self, "import_counted", np.array(self.import_counted, dtype=bool))

    def lookup(self, rd):
        return self.mei[segment_indices(rd, self.config) - 1]

    def to_dict(self) -> dict:
        segs = []
        for k in range(self.config.count):
            lo, hi = self.config.bounds(k + 1)
            row = {"segment": k + 1, "lower": _json_float(lo), "upper": _json_float(hi)}
            if self.shares is not None:
                for r in RESOURCES:
                    if r in self.shares.shares:
                        row[r] = float(self.shares.shares[r][k])
                row["total"] = float(self.shares.total[k])
                row["mean_net_imports"] = _json_float(self.shares.mean_net_imports[k])
                row["samples"] = int(self.shares.sample_counts[k])
            row["import_counted"] = bool(self.import_counted[k])
            row["mei"] = float(self.mei[k])
            segs.append(row)
        return {
            "segmentation": self.config.as_dict(),
            "emission_factors": None if self.factors is None else self.factors.as_dict(),
            "segments": segs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: Mapping) -> MeiTable:
        try:
            config = SegmentationConfig(**d["segmentation"])
            segs = sorted(d["segments"], key=lambda r: r["segment"])
            if [r["segment"] for r in segs] != list(range(1, config.count + 1)):
                raise ResourceMismatch("segments must be numbered 1..count")
            shares = None
            if segs and all(r in segs[0] for r in RESOURCES):
                shares = SupplyShareTable(
                    config,
                    {r: [row[r] for row in segs] for r in RESOURCES},
                    [_from_json_float(row.get("mean_net_imports")) for row in segs],
                    [row.get("samples", 0) for row in segs],
                )
            factors = d.get("emission_factors")
            return cls(
                config,
                [row["mei"] for row in segs],
                [row["import_counted"] for row in segs],
                shares,
                None if factors is None else EmissionFactors.from_mapping(factors),
            )
        except (KeyError, TypeError) as exc:
            raise ResourceMismatch(f"malformed MEI table: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> MeiTable:
        return cls.from_dict(json.loads(text))


def mei_table(shares: SupplyShareTable, factors: EmissionFactors = EmissionFactors(),
              import_rule="auto") -> MeiTable:
    """Per-segment MEI: sum of shares times emission factors.

    Imports only count in segments selected by ``import_rule``: ``"auto"``
    picks segments whose mean observed net imports are positive, otherwise
    pass an explicit collection of 1-based segment ids.
    """
    e = factors.as_dict()
    if set(shares.shares) != set(e):
        raise ResourceMismatch(f"shares cover {sorted(shares.shares)}, factors cover {sorted(e)}")
    n = shares.config.count
    if isinstance(import_rule, str):
        if import_rule != "auto":
            raise ConfigError(f"import_rule must be 'auto' or a list of segments, got {import_rule!r}")
        if np.all(np.isnan(shares.mean_net_imports)):
            raise ConfigError("import_rule 'auto' needs observed net imports; give explicit segments instead")
        counted = np.nan_to_num(shares.mean_net_imports, nan=0.0) > 0
    else:
        chosen = {int(s) for s in import_rule}
        bad = sorted(s for s in chosen if not 1 <= s <= n)
        if bad:
            raise ConfigError(f"import segments {bad} outside 1..{n}")
        counted = np.array([s in chosen for s in range(1, n + 1)])

    m = (shares.shares["gas"] * e["gas"] + shares.shares["hydro"] * e["hydro"]
         + np.where(counted, shares.shares["import"] * e["import"], 0.0))
    return MeiTable(shares.config, m, counted, shares, factors)


def mei_series(series: GridSeries, table: MeiTable, non_dispatchable=DEFAULT_NON_DISPATCHABLE) -> np.ndarray:
    """Hourly MEI: the segment MEI of each hour's residual demand."""
    return table.lookup(series.residual_demand(non_dispatchable))


def estimate_mei(series: GridSeries, config: SegmentationConfig = SegmentationConfig(),
                 factors: EmissionFactors = EmissionFactors(), import_rule="auto",
                 non_dispatchable=DEFAULT_NON_DISPATCHABLE, method: str = "chord"):
    """Fit, segment and weight in one go; returns ``(table, fits)``."""
    fits = fit_resources(series, non_dispatchable)
    shares = supply_shares(fits, config, series, non_dispatchable, method)
    return mei_table(shares, factors, import_rule), fits


# Ontario marginal supply shares (gas, hydro, import), Oct 2024 - Apr 2025,
# on the default segmentation.
ONTARIO_SHARES = np.array([
    [-0.144, 0.500, 0.677],
    [0.054, 0.437, 0.531],
    [0.236, 0.377, 0.400],
    [0.407, 0.318, 0.280],
    [0.540, 0.267, 0.190],
    [0.637, 0.224, 0.131],
    [0.698, 0.189, 0.101],
    [0.726, 0.163, 0.098],
    [0.718, 0.144, 0.125],
    [0.677, 0.133, 0.179],
    [0.599, 0.129, 0.265],
    [0.485, 0.134, 0.379],
    [0.344, 0.146, 0.515],
    [0.178, 0.164, 0.671],
    [-0.049, 0.194, 0.880],
])
ONTARIO_IMPORT_SEGMENTS = (14, 15)


def ontario_shares() -> SupplyShareTable:
    return SupplyShareTable.from_shares(*ONTARIO_SHARES.T)


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _from_json_float(x):
    return math.nan if x is None else float(x)
