"""Synthetic grid series with known marginal-resource response curves.

Gas and hydro output are exact cubic functions of residual demand plus
Gaussian noise; net imports close the energy balance, so the three
responses always sum to the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InvalidParams
from .ingest import FUELS, GridSeries

RESOURCES = ("gas", "hydro", "import")


@dataclass(frozen=True)
class ResponseCurve:
    """S-shaped cubic: ``level + trend*(x-center) + amplitude*(1.5v - 0.5v**3)``
    with ``v = (x-center)/half_width``.

    Over ``|v| <= 1`` the cubic term climbs monotonically from ``-amplitude``
    to ``+amplitude`` with zero slope at both knees. A negative amplitude
    combined with a positive trend gives a curve that flattens mid-range.
    """

    level: float
    trend: float
    amplitude: float
    center: float
    half_width: float

    def polynomial(self) -> Polynomial:
        v = Polynomial([-self.center / self.half_width, 1.0 / self.half_width])
        d = Polynomial([-self.center, 1.0])
        return self.level + self.trend * d + self.amplitude * (1.5 * v - 0.5 * v ** 3)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = (x - self.center) / self.half_width
        return self.level + self.trend * (x - self.center) + self.amplitude * (1.5 * v - 0.5 * v ** 3)

    def slope(self, x):
        v = (np.asarray(x, dtype=float) - self.center) / self.half_width
        return self.trend + 1.5 * self.amplitude / self.half_width * (1.0 - v ** 2)


@dataclass(frozen=True)
class GroundTruth:
    gas: ResponseCurve
    hydro: ResponseCurve

    def polynomial(self, resource: str) -> Polynomial:
        if resource == "gas":
            return self.gas.polynomial()
        if resource == "hydro":
            return self.hydro.polynomial()
        if resource == "import":
            return Polynomial([0.0, 1.0]) - self.gas.polynomial() - self.hydro.polynomial()
        raise KeyError(resource)

    def evaluate(self, resource: str, x):
        x = np.asarray(x, dtype=float)
        if resource == "gas":
            return self.gas(x)
        if resource == "hydro":
            return self.hydro(x)
        if resource == "import":
            return x - self.gas(x) - self.hydro(x)
        raise KeyError(resource)

    def chord(self, resource: str, lo: float, hi: float) -> float:
        f = self.polynomial(resource)
        return float((f(hi) - f(lo)) / (hi - lo))


@dataclass(frozen=True)
class SynthParams:
    horizon_hours: int = 4380
    start: datetime = datetime.fromisoformat("2024-10-01T00:00:00-04:00")
    # demand (MW)
    demand_base: float = 15700.0
    demand_daily_amp: float = 3100.0
    demand_weekly_amp: float = 900.0
    demand_seasonal_amp: float = 2500.0
    demand_noise: float = 400.0
    # non-dispatchable fleet (MW)
    nuclear_base: float = 9200.0
    nuclear_noise: float = 150.0
    wind_mean: float = 1900.0
    wind_std: float = 1500.0
    wind_capacity: float = 5000.0
    wind_persistence: float = 0.95
    solar_peak: float = 600.0
    biofuel_base: float = 150.0
    # marginal fleet, as functions of residual demand
    gas_curve: ResponseCurve = ResponseCurve(4600.0, 0.0, 3936.0, 7500.0, 8200.0)
    hydro_curve: ResponseCurve = ResponseCurve(3800.0, 0.3777, -1486.0, 9500.0, 9000.0)
    noise_scale: float = 250.0
    # price = c0 + c1*x + c2*x**2 + N(0, price_noise), x = residual demand
    price_coeffs: tuple[float, float, float] = (8.0, 3.0e-3, 2.0e-7)
    price_noise: float = 10.0
    seed: int = 42

    def __post_init__(self):
        if int(self.horizon_hours) != self.horizon_hours or self.horizon_hours <= 0:
            raise InvalidParams(f"horizon_hours must be a positive integer, got {self.horizon_hours}")
        if self.horizon_hours < 24:
            raise InvalidParams(f"horizon_hours must be >= 24, got {self.horizon_hours}")
        if self.start.utcoffset() is None:
            raise InvalidParams("start must carry a UTC offset")
        for name in ("noise_scale", "demand_noise", "nuclear_noise", "wind_std", "price_noise"):
            if getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be >= 0")
        if not 0 <= self.wind_persistence < 1:
            raise InvalidParams("wind_persistence must lie in [0, 1)")


def synth_generate(params: SynthParams = SynthParams()) -> tuple[GridSeries, GroundTruth]:
    """Draw a deterministic synthetic series for ``params.seed``."""
    rng = np.random.default_rng(params.seed)
    n = int(params.horizon_hours)
    t = np.arange(n, dtype=float)
    hour = (t + params.start.hour) % 24
    day = np.floor((t + params.start.hour) / 24)
    weekday = (params.start.weekday() + day) % 7

    daily = -np.cos(2 * np.pi * (hour - 4) / 24) + 0.35 * np.exp(-0.5 * ((hour - 18.5) / 1.5) ** 2)
    weekend = (weekday >= 5).astype(float)
    # winter peak roughly 100 days after an October start
    seasonal = np.cos(2 * np.pi * (t - 2400) / 8760)
    demand = (params.demand_base + params.demand_daily_amp * daily
              - params.demand_weekly_amp * weekend + params.demand_seasonal_amp * seasonal
              + params.demand_noise * rng.standard_normal(n))

    nuclear = np.clip(params.nuclear_base + params.nuclear_noise * rng.standard_normal(n), 0, None)

    phi = params.wind_persistence
    shocks = rng.standard_normal(n) * np.sqrt(1 - phi ** 2)
    latent = np.empty(n)
    latent[0] = rng.standard_normal()
    for i in range(1, n):
        latent[i] = phi * latent[i - 1] + shocks[i]
    wind = np.clip(params.wind_mean + params.wind_std * latent, 0, params.wind_capacity)

    cloud = rng.uniform(0.3, 1.0, size=int(day[-1]) + 1)[day.astype(int)]
    solar = params.solar_peak * cloud * np.clip(np.sin(np.pi * (hour - 7) / 11), 0, None)
    biofuel = np.full(n, params.biofuel_base)

    demand = np.clip(demand, 0, None)
    truth = GroundTruth(params.gas_curve, params.hydro_curve)

    # residual with hydro kept in, mirroring the default ingest convention
    residual = demand - (((0.0 + nuclear) + wind) + solar + biofuel)
    gas = truth.evaluate("gas", residual)
    hydro = truth.evaluate("hydro", residual)
    if params.noise_scale > 0:
        gas = np.clip(gas + params.noise_scale * rng.standard_normal(n), 0, None)
        hydro = np.clip(hydro + params.noise_scale * rng.standard_normal(n), 0, None)
    net_imports = residual - gas - hydro

    c0, c1, c2 = params.price_coeffs
    price = c0 + c1 * residual + c2 * residual ** 2 + params.price_noise * rng.standard_normal(n)

    timestamps = [params.start + timedelta(hours=i) for i in range(n)]
    gen = {"nuclear": nuclear, "hydro": hydro, "wind": wind, "solar": solar, "biofuel": biofuel, "gas": gas}
    assert set(gen) == set(FUELS)
    return GridSeries(timestamps, demand, gen, net_imports, price), truth
