"""Physical asset models: diurnal weather, PV conversion, battery storage,
campus load and the capacity-limited external supply.

All functions are pure. Randomness enters only through an explicit
``numpy.random.Generator`` argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

T_STC_C = 25.0
ENERGY_TOL_KWH = 1e-6


class SimultaneousChargeDischarge(ValueError):
    pass


class InfeasibleAction(ValueError):
    pass


def _check(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ValueError(f"{name}: {msg}")


# --------------------------------------------------------------------------
# Weather
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeatherParams:
    sunrise_tick: int = 6
    sunset_tick: int = 18
    peak_tick: int = 12
    g_peak: float = 1000.0
    temp_mean_day: float = 25.0
    temp_mean_night: float = 12.0
    sigma_g: float = 120.0
    sigma_t: float = 1.0

    def __post_init__(self):
        _check(
            0 <= self.sunrise_tick < self.peak_tick < self.sunset_tick <= 24,
            "sunriseTick",
            "need sunriseTick < peakTick < sunsetTick within one day",
        )
        _check(self.g_peak > 0, "gPeak", "must be positive")
        _check(self.sigma_g >= 0, "sigmaG", "must be non-negative")
        _check(self.sigma_t >= 0, "sigmaT", "must be non-negative")


@dataclass(frozen=True)
class WeatherSample:
    tick: int
    ghi: float
    ambient_temp_c: float


def hour_of_day(tick: int) -> int:
    return tick % 24


def clear_sky_ghi(params: WeatherParams, tick: int) -> float:
    """Noise-free irradiance for ``tick``; exactly 0 outside daylight."""
    h = hour_of_day(tick)
    if h < params.sunrise_tick or h > params.sunset_tick:
        return 0.0
    span = params.sunset_tick - params.sunrise_tick
    return max(0.0, params.g_peak * math.sin(math.pi * (h - params.sunrise_tick) / span))


def mean_temperature(params: WeatherParams, tick: int) -> float:
    """Noise-free ambient temperature, warmest at ``peak_tick``."""
    mid = 0.5 * (params.temp_mean_day + params.temp_mean_night)
    half = 0.5 * (params.temp_mean_day - params.temp_mean_night)
    return mid + half * math.cos(2.0 * math.pi * (hour_of_day(tick) - params.peak_tick) / 24.0)


def sample_weather(params: WeatherParams, tick: int, rng: np.random.Generator) -> WeatherSample:
    # Both draws are taken every tick so the stream layout never depends on daylight.
    g_noise, t_noise = rng.standard_normal(2)
    base = clear_sky_ghi(params, tick)
    h = hour_of_day(tick)
    if params.sunrise_tick <= h <= params.sunset_tick:
        ghi = max(0.0, base + params.sigma_g * g_noise)
    else:
        ghi = 0.0
    temp = mean_temperature(params, tick) + params.sigma_t * t_noise
    return WeatherSample(tick, float(ghi), float(temp))


def expected_weather(params: WeatherParams, tick: int) -> WeatherSample:
    return WeatherSample(tick, clear_sky_ghi(params, tick), mean_temperature(params, tick))


# --------------------------------------------------------------------------
# Photovoltaics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PvParams:
    panel_count: int = 200
    panel_area_m2: float = 2.0
    eta_stc: float = 0.2
    gamma: float = -0.004
    t_noct_c: float = 45.0
    t_amb_noct_c: float = 20.0
    g_noct_wm2: float = 800.0

    def __post_init__(self):
        _check(self.panel_count > 0, "panelCount", "must be positive")
        _check(self.panel_area_m2 > 0, "panelAreaM2", "must be positive")
        _check(0 < self.eta_stc < 1, "etaStc", "must lie in (0, 1)")
        _check(self.gamma < 0, "gamma", "temperature coefficient must be negative")
        _check(self.g_noct_wm2 > 0, "gNoctWm2", "must be positive")

    @property
    def area_m2(self) -> float:
        return self.panel_count * self.panel_area_m2


def cell_temperature(ambient_temp_c: float, ghi: float, pv: PvParams) -> float:
    """NOCT cell temperature in degC."""
    return ambient_temp_c + (ghi / pv.g_noct_wm2) * (pv.t_noct_c - pv.t_amb_noct_c)


def operating_efficiency(cell_temp_c: float, pv: PvParams) -> float:
    return pv.eta_stc * (1.0 + pv.gamma * (cell_temp_c - T_STC_C))


def plane_of_array(ghi: float) -> float:
    # Flat-mounted array: POA irradiance equals GHI.
    return ghi


def pv_power(sample: WeatherSample, pv: PvParams) -> float:
    """Array DC output in kW."""
    g = plane_of_array(sample.ghi)
    if g <= 0.0:
        return 0.0
    eta = operating_efficiency(cell_temperature(sample.ambient_temp_c, g, pv), pv)
    return max(0.0, eta) * g * pv.area_m2 / 1000.0


# --------------------------------------------------------------------------
# Battery
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BatteryParams:
    capacity_kwh: float = 100.0
    eta_charge: float = 0.95
    eta_discharge: float = 0.95
    c_rate: float = 1.0
    self_discharge_per_tick: float = 1e-3
    soc_min_percent: float = 0.0
    soc_max_percent: float = 100.0
    initial_soc_percent: float = 50.0

    def __post_init__(self):
        _check(self.capacity_kwh > 0, "capacityKwh", "must be positive")
        _check(0 < self.eta_charge <= 1, "etaCharge", "must lie in (0, 1]")
        _check(0 < self.eta_discharge <= 1, "etaDischarge", "must lie in (0, 1]")
        _check(self.c_rate > 0, "cRate", "must be positive")
        _check(self.self_discharge_per_tick >= 0, "selfDischargePerTick", "must be non-negative")
        _check(
            0 <= self.soc_min_percent < self.soc_max_percent <= 100,
            "socMinPercent",
            "need 0 <= socMinPercent < socMaxPercent <= 100",
        )
        _check(
            self.soc_min_percent <= self.initial_soc_percent <= self.soc_max_percent,
            "initialSocPercent",
            "must lie inside the SoC band",
        )

    @property
    def max_power_kw(self) -> float:
        return self.c_rate * self.capacity_kwh

    @property
    def e_min(self) -> float:
        return self.soc_min_percent / 100.0 * self.capacity_kwh

    @property
    def e_max(self) -> float:
        return self.soc_max_percent / 100.0 * self.capacity_kwh

    def initial_state(self) -> BatteryState:
        return BatteryState.from_energy(self.initial_soc_percent / 100.0 * self.capacity_kwh, self)


@dataclass(frozen=True)
class BatteryState:
    stored_kwh: float
    soc_percent: float
    clamp_kwh: float = field(default=0.0, compare=False)

    @classmethod
    def from_energy(cls, stored_kwh: float, params: BatteryParams, clamp_kwh: float = 0.0) -> BatteryState:
        return cls(stored_kwh, 100.0 * stored_kwh / params.capacity_kwh, clamp_kwh)


def retained_energy(stored_kwh: float, dt_hours: float, params: BatteryParams) -> float:
    """Stored energy after one interval of self-discharge with no action."""
    return stored_kwh - params.self_discharge_per_tick * stored_kwh * dt_hours


def max_charge_kw(state: BatteryState, dt_hours: float, params: BatteryParams) -> float:
    room = params.e_max - retained_energy(state.stored_kwh, dt_hours, params)
    return min(params.max_power_kw, max(0.0, room / (params.eta_charge * dt_hours)))


def max_discharge_kw(state: BatteryState, dt_hours: float, params: BatteryParams) -> float:
    """Largest power deliverable to the bus this interval (cell draw is P / eta_d)."""
    avail = retained_energy(state.stored_kwh, dt_hours, params) - params.e_min
    return min(params.max_power_kw, max(0.0, avail * params.eta_discharge / dt_hours))


def feasible_battery_action(
    state: BatteryState, charge_kw: float, discharge_kw: float, dt_hours: float, params: BatteryParams
) -> tuple[float, float]:
    """Clamp a requested (charge, discharge) pair to what the battery can do."""
    if charge_kw > 0 and discharge_kw > 0:
        raise SimultaneousChargeDischarge(f"charge={charge_kw} discharge={discharge_kw}")
    ch = min(max(charge_kw, 0.0), max_charge_kw(state, dt_hours, params))
    dis = min(max(discharge_kw, 0.0), max_discharge_kw(state, dt_hours, params))
    return ch, dis


def step_battery(
    state: BatteryState, charge_kw: float, discharge_kw: float, dt_hours: float, params: BatteryParams
) -> BatteryState:
    """Advance stored energy by one interval.

    ``discharge_kw`` is the power delivered to the bus; the cells give up
    ``discharge_kw / eta_d``. Self-discharge removes a fixed fraction of the
    energy held at the start of the interval.
    """
    if charge_kw > 0 and discharge_kw > 0:
        raise SimultaneousChargeDischarge(f"charge={charge_kw} discharge={discharge_kw}")
    if charge_kw < 0 or discharge_kw < 0:
        raise ValueError("powers must be non-negative")
    limit = params.max_power_kw * (1 + 1e-12)
    if charge_kw > limit or discharge_kw > limit:
        raise InfeasibleAction(f"power exceeds C-rate limit {params.max_power_kw} kW")

    e = state.stored_kwh
    new = (
        e
        + params.eta_charge * charge_kw * dt_hours
        - discharge_kw * dt_hours / params.eta_discharge
        - params.self_discharge_per_tick * e * dt_hours
    )
    clamp = 0.0
    if new > params.e_max:
        clamp = new - params.e_max
        new = params.e_max
    elif new < params.e_min:
        clamp = params.e_min - new
        # Self-discharge alone may drift below the floor; only actions are policed.
        if discharge_kw == 0.0 and e >= params.e_min - ENERGY_TOL_KWH:
            return BatteryState.from_energy(max(new, 0.0), params)
        new = params.e_min
    if clamp > ENERGY_TOL_KWH:
        raise InfeasibleAction(f"result violates SoC band by {clamp:.3g} kWh")
    return BatteryState.from_energy(new, params, clamp)


# --------------------------------------------------------------------------
# Load
# --------------------------------------------------------------------------


def campus_schedule() -> tuple[float, ...]:
    sched = []
    for h in range(24):
        if 8 <= h < 18:
            sched.append(0.80)
        elif 6 <= h < 8 or 18 <= h < 20:
            sched.append(0.50)
        else:
            sched.append(0.10)
    return tuple(sched)


@dataclass(frozen=True)
class LoadProfile:
    nominal_kw: float = 50.0
    schedule: tuple[float, ...] = field(default_factory=campus_schedule)
    noise_sigma_fraction: float = 0.05

    def __post_init__(self):
        _check(self.nominal_kw >= 0, "nominalKw", "must be non-negative")
        _check(len(self.schedule) == 24, "schedule", "needs 24 hourly fractions")
        _check(all(0 <= f <= 1 for f in self.schedule), "schedule", "fractions must lie in [0, 1]")
        _check(self.noise_sigma_fraction >= 0, "noiseSigmaFraction", "must be non-negative")


def baseline_load(profile: LoadProfile, tick: int) -> float:
    return profile.schedule[hour_of_day(tick)] * profile.nominal_kw


def sample_load(profile: LoadProfile, tick: int, rng: np.random.Generator) -> float:
    eps = rng.standard_normal()
    return max(0.0, baseline_load(profile, tick) * (1.0 + profile.noise_sigma_fraction * eps))


# --------------------------------------------------------------------------
# External supply
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExternalSupplyParams:
    capacity_kw: float = 100.0
    unit_cost: float = 0.20

    def __post_init__(self):
        _check(self.capacity_kw > 0, "capacityKw", "must be positive")
        _check(self.unit_cost > 0, "unitCost", "must be positive")


def external_draw(request_kw: float, params: ExternalSupplyParams, dt_hours: float = 1.0) -> tuple[float, float]:
    """Return ``(delivered_kw, cost)``; any shortfall is left to the caller."""
    if request_kw < 0:
        raise ValueError("request must be non-negative")
    delivered = min(request_kw, params.capacity_kw)
    return delivered, delivered * dt_hours * params.unit_cost


def with_soc(params: BatteryParams, soc_percent: float) -> BatteryState:
    return BatteryState.from_energy(soc_percent / 100.0 * params.capacity_kwh, params)


__all__ = [
    "BatteryParams",
    "BatteryState",
    "ExternalSupplyParams",
    "InfeasibleAction",
    "LoadProfile",
    "PvParams",
    "SimultaneousChargeDischarge",
    "WeatherParams",
    "WeatherSample",
    "baseline_load",
    "campus_schedule",
    "cell_temperature",
    "clear_sky_ghi",
    "expected_weather",
    "external_draw",
    "feasible_battery_action",
    "hour_of_day",
    "max_charge_kw",
    "max_discharge_kw",
    "mean_temperature",
    "operating_efficiency",
    "pv_power",
    "retained_energy",
    "sample_load",
    "sample_weather",
    "step_battery",
    "with_soc",
]
