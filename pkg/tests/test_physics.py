import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microgrid_sim.physics import (
    BatteryParams,
    BatteryState,
    ExternalSupplyParams,
    InfeasibleAction,
    LoadProfile,
    PvParams,
    SimultaneousChargeDischarge,
    WeatherParams,
    WeatherSample,
    cell_temperature,
    clear_sky_ghi,
    external_draw,
    max_charge_kw,
    max_discharge_kw,
    operating_efficiency,
    pv_power,
    sample_load,
    sample_weather,
    step_battery,
    with_soc,
)

PV = PvParams()
BAT = BatteryParams()
QUIET = WeatherParams(sigma_g=0.0, sigma_t=0.0)


def rng(seed=0):
    return np.random.default_rng(seed)


# -- weather ----------------------------------------------------------------


def test_ghi_zero_at_sunrise_without_noise():
    assert sample_weather(QUIET, 6, rng()).ghi == 0.0


def test_ghi_peak_at_noon_without_noise():
    assert sample_weather(QUIET, 12, rng()).ghi == pytest.approx(1000.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_night_ghi_is_zero_regardless_of_noise(seed):
    noisy = WeatherParams(sigma_g=500.0)
    assert sample_weather(noisy, 2, rng(seed)).ghi == 0.0
    assert sample_weather(noisy, 24 * 3 + 22, rng(seed)).ghi == 0.0


@given(st.integers(0, 24 * 30), st.integers(0, 2**32 - 1))
def test_ghi_nonnegative_and_zero_outside_daylight(tick, seed):
    w = sample_weather(WeatherParams(sigma_g=400.0), tick, rng(seed))
    assert w.ghi >= 0.0
    h = tick % 24
    if h < 6 or h > 18:
        assert w.ghi == 0.0


def test_weather_params_reject_sunrise_after_sunset():
    with pytest.raises(ValueError, match="sunriseTick"):
        WeatherParams(sunrise_tick=19, sunset_tick=18)


def test_clear_sky_is_periodic():
    assert clear_sky_ghi(QUIET, 10) == clear_sky_ghi(QUIET, 10 + 24 * 5)


# -- PV ---------------------------------------------------------------------


def test_cell_temperature_equals_noct_at_noct_conditions():
    assert cell_temperature(20.0, 800.0, PV) == pytest.approx(45.0, abs=1e-12)


def test_cell_temperature_without_irradiance_is_ambient():
    assert cell_temperature(10.0, 0.0, PV) == 10.0


def test_cell_temperature_hand_value():
    assert cell_temperature(30.0, 1000.0, PV) == pytest.approx(61.25, abs=1e-12)


def test_efficiency_at_45c():
    assert operating_efficiency(45.0, PV) == pytest.approx(0.184, abs=1e-12)


def test_array_power_at_1000_wm2_and_0184_efficiency():
    # Ambient chosen so the cell sits at 45 degC under 1000 W/m2.
    ambient = 45.0 - 1000.0 / 800.0 * 25.0
    assert pv_power(WeatherSample(12, 1000.0, ambient), PV) == pytest.approx(73.6, abs=1e-9)


def test_zero_irradiance_gives_zero_power():
    assert pv_power(WeatherSample(0, 0.0, 25.0), PV) == 0.0


@given(st.floats(0, 1400), st.floats(0, 1400), st.floats(-10, 45))
def test_pv_nondecreasing_in_irradiance(g1, g2, temp):
    lo, hi = sorted((g1, g2))
    assert pv_power(WeatherSample(0, lo, temp), PV) <= pv_power(WeatherSample(0, hi, temp), PV) + 1e-12


@given(st.floats(1, 1400), st.floats(-10, 45), st.floats(-10, 45))
def test_pv_nonincreasing_in_temperature(g, t1, t2):
    lo, hi = sorted((t1, t2))
    assert pv_power(WeatherSample(0, g, hi), PV) <= pv_power(WeatherSample(0, g, lo), PV) + 1e-12


def test_extreme_heat_clamps_efficiency_at_zero():
    assert pv_power(WeatherSample(0, 1000.0, 400.0), PV) == 0.0


# -- battery ----------------------------------------------------------------


def test_charge_10kw_from_50kwh():
    s = step_battery(BatteryState.from_energy(50.0, BAT), 10.0, 0.0, 1.0, BAT)
    assert s.stored_kwh == pytest.approx(59.45, abs=1e-12)
    assert s.soc_percent == pytest.approx(59.45, abs=1e-12)


def test_idle_without_self_discharge_is_identity():
    p = BatteryParams(self_discharge_per_tick=0.0)
    assert step_battery(BatteryState.from_energy(50.0, p), 0.0, 0.0, 1.0, p).stored_kwh == 50.0


def test_discharge_delivering_9_5_kwh_draws_10():
    s = step_battery(BatteryState.from_energy(50.0, BAT), 0.0, 9.5, 1.0, BAT)
    assert s.stored_kwh == pytest.approx(50.0 - 10.0 - 0.05, abs=1e-12)


def test_simultaneous_charge_and_discharge_rejected():
    with pytest.raises(SimultaneousChargeDischarge):
        step_battery(BAT.initial_state(), 1.0, 1.0, 1.0, BAT)


def test_power_above_c_rate_rejected():
    with pytest.raises(InfeasibleAction):
        step_battery(BAT.initial_state(), 101.0, 0.0, 1.0, BAT)


def test_overcharge_beyond_band_rejected():
    with pytest.raises(InfeasibleAction):
        step_battery(with_soc(BAT, 95.0), 50.0, 0.0, 1.0, BAT)


def test_headroom_limits_match_stepping_to_the_band():
    s = with_soc(BAT, 90.0)
    full = step_battery(s, max_charge_kw(s, 1.0, BAT), 0.0, 1.0, BAT)
    assert full.soc_percent == pytest.approx(100.0, abs=1e-9)
    empty = step_battery(s, 0.0, max_discharge_kw(s, 1.0, BAT), 1.0, BAT)
    assert empty.soc_percent == pytest.approx(0.0, abs=1e-9)


def test_max_power_is_c_rate_times_capacity():
    assert BatteryParams(capacity_kwh=200.0, c_rate=0.5).max_power_kw == 100.0


actions = st.lists(st.tuples(st.booleans(), st.floats(0, 1)), min_size=1, max_size=40)


@settings(max_examples=1000)
@given(st.floats(0, 100), actions, st.floats(0, 0.01))
def test_energy_conservation_and_band(e0, seq, rate):
    p = BatteryParams(self_discharge_per_tick=rate)
    s = BatteryState.from_energy(e0, p)
    expected = e0
    for is_charge, frac in seq:
        if is_charge:
            ch, dis = frac * max_charge_kw(s, 1.0, p), 0.0
        else:
            ch, dis = 0.0, frac * max_discharge_kw(s, 1.0, p)
        expected = expected + p.eta_charge * ch - dis / p.eta_discharge - rate * expected
        s = step_battery(s, ch, dis, 1.0, p)
        assert p.soc_min_percent - 1e-9 <= s.soc_percent <= p.soc_max_percent + 1e-9
        assert s.stored_kwh == pytest.approx(s.soc_percent / 100 * p.capacity_kwh, rel=1e-12)
    assert s.stored_kwh == pytest.approx(expected, rel=1e-9, abs=1e-9)


@settings(max_examples=1000)
@given(st.floats(0.5, 100), st.one_of(st.just(0.0), st.floats(1e-6, 0.01)), st.integers(1, 5))
def test_round_trip_loses_at_least_efficiency_product(x_in, rate, steps):
    """Charge X kWh into an empty battery, then discharge until empty."""
    p = BatteryParams(self_discharge_per_tick=rate, initial_soc_percent=0.0)
    s = p.initial_state()
    charged = 0.0
    for _ in range(steps):
        kw = min((x_in - charged), max_charge_kw(s, 1.0, p))
        s = step_battery(s, kw, 0.0, 1.0, p)
        charged += kw
    delivered = 0.0
    for _ in range(10_000):
        kw = max_discharge_kw(s, 1.0, p)
        if kw <= 1e-12:
            break
        s = step_battery(s, 0.0, kw, 1.0, p)
        delivered += kw
    bound = p.eta_charge * p.eta_discharge * charged
    assert delivered <= bound + 1e-9
    if rate > 0 and charged > 0:
        assert delivered < bound


# -- load and external supply ------------------------------------------------


@pytest.mark.parametrize("tick,expected", [(12, 40.0), (3, 5.0), (7, 25.0), (24 + 12, 40.0)])
def test_noise_free_load(tick, expected):
    profile = LoadProfile(noise_sigma_fraction=0.0)
    assert sample_load(profile, tick, rng()) == pytest.approx(expected, abs=1e-12)


@given(st.integers(0, 1000), st.integers(0, 2**32 - 1))
def test_load_nonnegative_under_heavy_noise(tick, seed):
    assert sample_load(LoadProfile(noise_sigma_fraction=3.0), tick, rng(seed)) >= 0.0


def test_schedule_fraction_out_of_range_rejected():
    with pytest.raises(ValueError):
        LoadProfile(schedule=(1.5,) * 24)


@pytest.mark.parametrize("request_kw,delivered", [(30.0, 30.0), (150.0, 100.0), (0.0, 0.0)])
def test_external_draw(request_kw, delivered):
    got, cost = external_draw(request_kw, ExternalSupplyParams())
    assert got == delivered
    assert cost == pytest.approx(0.20 * delivered)


def test_battery_band_must_be_ordered():
    with pytest.raises(ValueError, match="socMinPercent"):
        BatteryParams(soc_min_percent=60.0, soc_max_percent=40.0)


def test_state_soc_consistent_with_energy():
    s = with_soc(BAT, 37.5)
    assert math.isclose(s.stored_kwh, 37.5)
