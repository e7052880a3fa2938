"""The agent world and its tick loop.

Each tick runs in fixed phases: weather, generation and demand, control
(baseline rule or rolling planner, carried out through Contract-Net rounds),
battery actuation, state publication, and settlement into the run log.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .config import Mode, ScenarioConfig, apply_disturbance
from .forecasting import ForecastBundle, Forecaster, History
from .kernel import (
    AgentStateRegistry,
    Envelope,
    MessageBus,
    Performative,
    RunLog,
    StateUpdate,
    agent_rng,
)
from .metrics import TickRecord
from .negotiation import ContractNet, Direction, MIN_OFFER_KW, respond_battery, respond_external
from .physics import (
    BatteryState,
    WeatherSample,
    external_draw,
    pv_power,
    sample_load,
    sample_weather,
    step_battery,
)
from .planning import RollingPlanner, StepAction, baseline_step, execution_caps

log = logging.getLogger(__name__)

WEATHER = "WeatherAgent"
PV = "PVMain"
LOAD = "CampusBuilding"
BATTERY = "MainBattery"
EXTERNAL = "ExternalSupply"
AGGREGATOR = "Aggregator"
FORECASTER = "ForecastAgent"
KERNEL = "Kernel"

AGENTS = (WEATHER, PV, LOAD, BATTERY, EXTERNAL, AGGREGATOR, FORECASTER)
BATTERIES = (BATTERY,)


def quantize(x: float) -> float:
    """Round to the precision written to the run log."""
    return float(f"{x:.6f}")


def record_from_snapshot(snapshot, dt_hours: float = 1.0, batteries=BATTERIES) -> TickRecord:
    """Metric inputs for one tick, read only from logged state updates."""
    by_agent = {u.agent: u for u in snapshot}
    pv = by_agent[PV].generation_kw
    bats = [by_agent[b] for b in batteries]
    discharge = sum(u.generation_kw for u in bats)
    if len(bats) == 1:
        soc = bats[0].soc_percent
    else:
        caps = [u.stored_kwh * 100.0 / u.soc_percent for u in bats if u.soc_percent > 0]
        soc = 100.0 * sum(u.stored_kwh for u in bats) / sum(caps) if caps else 0.0
    return TickRecord(
        tick=snapshot[0].tick,
        produced_kwh=(pv + discharge) * dt_hours,
        consumed_kwh=by_agent[LOAD].consumption_kw * dt_hours,
        imported_kwh=by_agent[EXTERNAL].generation_kw * dt_hours,
        soc_percent=soc,
        pv_kw=pv,
    )


@dataclass(frozen=True)
class TickReport:
    tick: int
    weather: WeatherSample
    load_kw: float
    pv_kw: float
    action: StepAction
    planned: bool  # True when the rolling planner supplied the targets
    record: TickRecord
    snapshot: tuple[StateUpdate, ...]


@dataclass
class SimulationWorld:
    config: ScenarioConfig
    bus: MessageBus = field(default_factory=MessageBus)
    history: History = field(default_factory=History)
    reports: list[TickReport] = field(default_factory=list)
    forecasts: list[ForecastBundle] = field(default_factory=list)
    fallback_ticks: list[int] = field(default_factory=list)

    def __post_init__(self):
        cfg = self.config
        self.registry = AgentStateRegistry(AGENTS)
        self.bus.register_topic("tick", AGENTS)
        self.bus.register_topic("weather", (PV, FORECASTER, AGGREGATOR))
        self.batteries: list[BatteryState] = [cfg.battery.initial_state()]
        self.battery_params = [cfg.battery]
        self.forecaster = Forecaster(cfg.weather, cfg.forecaster, window=168, warmup_tick=cfg.planner.activation_tick)
        self.planner = RollingPlanner(cfg.planner, self.battery_params, cfg.external, self._request_forecast)
        self.cnp = ContractNet(AGGREGATOR, self.bus)
        self.run_log = RunLog()

    @property
    def tick(self) -> int:
        return self.registry.current_tick

    @property
    def done(self) -> bool:
        return self.tick >= self.config.ticks

    @property
    def records(self) -> list[TickRecord]:
        return [r.record for r in self.reports]

    # -- forecasting through the bus ---------------------------------------

    def _request_forecast(self, t: int, horizon: int) -> ForecastBundle:
        conv = f"t{t}-FORECAST"
        self.bus.send(Envelope(AGGREGATOR, FORECASTER, Performative.FORECAST_REQUEST, conv, horizon))
        self.bus.deliver()
        seed = int(agent_rng(self.config.seed, FORECASTER, t).integers(2**31 - 1))
        bundle = self.forecaster.forecast(self.history, t, horizon, seed)
        self.bus.send(Envelope(FORECASTER, AGGREGATOR, Performative.FORECAST_REPLY, conv, bundle))
        self.bus.deliver()
        self.forecasts.append(bundle)
        return bundle

    # -- control -----------------------------------------------------------

    def _targets(self, t: int, load: float, pv: float):
        """Charge / discharge caps for this tick, or ``None`` for the baseline rule."""
        cfg = self.config
        if cfg.mode is not Mode.PREDICTIVE or t < cfg.planner.activation_tick:
            return None
        step = self.planner.rolling_step(t, self.batteries)
        if step is None:
            self.fallback_ticks.append(t)
            return None
        plan = self.planner.plan
        k = t - plan.start_tick
        return execution_caps(step, plan.load_kw[k], plan.pv_kw[k], load, pv)

    def _negotiate(self, t: int, load: float, pv: float, caps) -> StepAction:
        cfg = self.config
        dt = cfg.planner.dt_hours
        unit_cost = cfg.planner.degradation_cost_per_kwh
        surplus = max(0.0, pv - load)
        deficit = max(0.0, load - pv)
        ids = list(BATTERIES)

        def bidder(i):
            return lambda cfp: respond_battery(self.batteries[i], self.battery_params[i], cfp, ids[i], unit_cost, dt)

        charge = [0.0] * len(ids)
        discharge = [0.0] * len(ids)
        charge_caps = discharge_caps = None
        if caps is not None:
            charge_caps = dict(zip(ids, caps[0]))
            discharge_caps = dict(zip(ids, caps[1]))

        absorb = surplus if caps is None else sum(caps[0])
        if absorb > MIN_OFFER_KW:
            responders = {b: bidder(i) for i, b in enumerate(ids)}
            responders[EXTERNAL] = lambda cfp: respond_external(cfg.external, cfp, EXTERNAL)
            award = self.cnp.run_round(Direction.ABSORB_SURPLUS, absorb, t, responders, charge_caps)
            charge = [award.awarded(b) for b in ids]

        charged = sum(charge)
        need = deficit + max(0.0, charged - surplus)
        imp = unmet = 0.0
        if need > MIN_OFFER_KW:
            responders = {b: bidder(i) for i, b in enumerate(ids) if charge[i] == 0.0}
            responders[EXTERNAL] = lambda cfp: respond_external(cfg.external, cfp, EXTERNAL)
            award = self.cnp.run_round(Direction.SUPPLY_DEFICIT, need, t, responders, discharge_caps)
            discharge = [award.awarded(b) for b in ids]
            imp = award.awarded(EXTERNAL)
            unmet = award.uncovered_kw
        elif need > 0:
            unmet = need
        curtailed = max(0.0, surplus - charged)
        return StepAction(tuple(charge), tuple(discharge), imp, curtailed, unmet)

    # -- tick --------------------------------------------------------------

    def advance_tick(self) -> TickReport:
        cfg = self.config
        t = self.tick
        if self.done:
            raise RuntimeError(f"run already finished at tick {cfg.ticks}")
        dt = cfg.planner.dt_hours
        self.bus.broadcast_topic("tick", Envelope(KERNEL, "", Performative.TICK, f"t{t}", t))

        # weather
        weather = sample_weather(cfg.weather, t, agent_rng(cfg.seed, WEATHER, t))
        self.bus.broadcast_topic("weather", Envelope(WEATHER, "", Performative.INFORM, f"t{t}-WEATHER", weather))

        # generation and demand
        pv = pv_power(weather, cfg.pv)
        load = sample_load(cfg.load, t, agent_rng(cfg.seed, LOAD, t))
        pv, load = apply_disturbance(cfg.disturbance, t, pv, load)
        self.history.append(load, pv, weather)

        # control
        caps = self._targets(t, load, pv)
        action = self._negotiate(t, load, pv, caps)
        resid = action.balance_residual(load, pv)
        if abs(resid) > 1e-6:
            raise AssertionError(f"tick {t}: power balance residual {resid}")

        # actuation
        self.batteries = [
            step_battery(s, c, d, dt, p)
            for s, c, d, p in zip(self.batteries, action.charge_kw, action.discharge_kw, self.battery_params)
        ]
        imported, _ = external_draw(action.import_kw, cfg.external, dt)

        # state publication
        bat = self.batteries[0]
        q = quantize
        updates = [
            StateUpdate(WEATHER, t),
            StateUpdate(PV, t, generation_kw=q(pv)),
            StateUpdate(LOAD, t, consumption_kw=q(load - action.unmet_kw)),
            StateUpdate(BATTERY, t, q(action.discharge_kw[0]), q(action.charge_kw[0]),
                        q(bat.stored_kwh), q(bat.soc_percent)),
            StateUpdate(EXTERNAL, t, generation_kw=q(imported)),
            StateUpdate(AGGREGATOR, t),
            StateUpdate(FORECASTER, t),
        ]
        for u in updates:
            self.registry.publish(u)
            self.bus.send(Envelope(u.agent, AGGREGATOR, Performative.STATE_UPDATE, f"t{t}-STATE", u))
        self.bus.deliver()

        snapshot = self.registry.settle()
        self.run_log.append(snapshot)
        self.bus.reset_tick()
        report = TickReport(t, weather, load, pv, action, caps is not None,
                            record_from_snapshot(snapshot, dt), snapshot)
        self.reports.append(report)
        return report

    def run(self) -> list[TickReport]:
        while not self.done:
            self.advance_tick()
        return self.reports
