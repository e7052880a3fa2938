"""Scenario tree, median-scenario LP dispatch, rolling-horizon execution and
the myopic rule-based baseline."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .forecasting import ForecastBundle
from .physics import (
    BatteryParams,
    BatteryState,
    ExternalSupplyParams,
    max_charge_kw,
    max_discharge_kw,
)

log = logging.getLogger(__name__)

BALANCE_TOL_KW = 1e-6


class InfeasibleLP(RuntimeError):
    pass


class UnboundedLP(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Scenario tree
# --------------------------------------------------------------------------


class Branch(enum.Enum):
    PESSIMISTIC = "PESSIMISTIC"
    MEDIAN = "MEDIAN"
    OPTIMISTIC = "OPTIMISTIC"


@dataclass(frozen=True)
class Scenario:
    label: Branch
    probability: float
    load_kw: tuple[float, ...]
    pv_kw: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioTree:
    branches: tuple[Scenario, Scenario, Scenario]

    def __getitem__(self, label: Branch) -> Scenario:
        for b in self.branches:
            if b.label is label:
                return b
        raise KeyError(label)

    @property
    def median(self) -> Scenario:
        return self[Branch.MEDIAN]


BRANCH_PROBABILITIES = {Branch.PESSIMISTIC: 0.25, Branch.MEDIAN: 0.50, Branch.OPTIMISTIC: 0.25}


def build_scenario_tree(bundle: ForecastBundle) -> ScenarioTree:
    p = BRANCH_PROBABILITIES
    return ScenarioTree((
        Scenario(Branch.PESSIMISTIC, p[Branch.PESSIMISTIC], bundle.load_q95, bundle.pv_q05),
        Scenario(Branch.MEDIAN, p[Branch.MEDIAN], bundle.load_q50, bundle.pv_q50),
        Scenario(Branch.OPTIMISTIC, p[Branch.OPTIMISTIC], bundle.load_q05, bundle.pv_q95),
    ))


# --------------------------------------------------------------------------
# Actions and plans
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StepAction:
    charge_kw: tuple[float, ...]
    discharge_kw: tuple[float, ...]
    import_kw: float = 0.0
    export_kw: float = 0.0
    unmet_kw: float = 0.0

    @classmethod
    def idle(cls, n_batteries: int = 1) -> StepAction:
        return cls((0.0,) * n_batteries, (0.0,) * n_batteries)

    def balance_residual(self, load_kw: float, pv_kw: float) -> float:
        supply = pv_kw + sum(self.discharge_kw) + self.import_kw + self.unmet_kw
        return supply - (load_kw + sum(self.charge_kw) + self.export_kw)


@dataclass(frozen=True)
class DispatchPlan:
    start_tick: int
    steps: tuple[StepAction, ...]
    objective_value: float
    soc_trajectory_percent: tuple[tuple[float, ...], ...]  # [step][battery]
    load_kw: tuple[float, ...] = ()
    pv_kw: tuple[float, ...] = ()

    @property
    def horizon(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class PlannerConfig:
    horizon_ticks: int = 4
    replan_every_ticks: int = 2
    activation_tick: int = 168
    import_cost_per_kwh: float = 0.20
    degradation_cost_per_kwh: float = 0.002
    export_value_per_kwh: float = 0.0
    # None: value stored energy at the import it displaces, import cost * eta_d
    terminal_value_per_kwh: float | None = None
    dt_hours: float = 1.0

    def __post_init__(self):
        if not self.horizon_ticks >= self.replan_every_ticks >= 1:
            raise ValueError("horizonTicks: need horizonTicks >= replanEveryTicks >= 1")
        if not 0 < self.degradation_cost_per_kwh < self.import_cost_per_kwh:
            raise ValueError("degradationCostPerKwh: need 0 < degradation cost < import cost")
        if not 0 <= self.export_value_per_kwh < self.import_cost_per_kwh:
            raise ValueError("exportValuePerKwh: need 0 <= export value < import cost")
        if self.terminal_value_per_kwh is not None and self.terminal_value_per_kwh < 0:
            raise ValueError("terminalValuePerKwh: must be non-negative")
        if self.activation_tick < 0:
            raise ValueError("activationTick: must be non-negative")


def terminal_value(config: PlannerConfig, params: BatteryParams) -> float:
    if config.terminal_value_per_kwh is not None:
        return config.terminal_value_per_kwh
    return config.import_cost_per_kwh * params.eta_discharge


def plan_cost(steps, final_energy_kwh, config: PlannerConfig, params) -> float:
    """Objective of a candidate plan; shared by the LP and brute-force checks."""
    dt = config.dt_hours
    total = 0.0
    for a in steps:
        total += config.import_cost_per_kwh * a.import_kw * dt
        total += config.degradation_cost_per_kwh * (sum(a.charge_kw) + sum(a.discharge_kw)) * dt
        total -= config.export_value_per_kwh * a.export_kw * dt
    return total - sum(terminal_value(config, p) * e for p, e in zip(params, final_energy_kwh))


def solve_median_lp(
    scenario: Scenario,
    initial: list[BatteryState],
    params: list[BatteryParams],
    external: ExternalSupplyParams,
    config: PlannerConfig,
    start_tick: int = 0,
) -> DispatchPlan:
    """Minimum-cost dispatch over the scenario horizon.

    Cost is import plus a cycling proxy, less export revenue and less the
    value of energy still stored at the end of the horizon. Per step the columns are ``ch[b], dis[b], imp, exp, E[b]`` with ``E`` the
    stored energy at the end of the step. The recursion is exact for the
    battery model: ``E' = (1 - r dt) E + eta_c ch dt - dis dt / eta_d``.
    """
    load = np.asarray(scenario.load_kw, float)
    pv = np.asarray(scenario.pv_kw, float)
    horizon = len(load)
    nb = len(params)
    if horizon < 1:
        raise ValueError("horizon must be at least one step")
    if len(initial) != nb:
        raise ValueError("one initial state per battery")
    dt = config.dt_hours
    width = 3 * nb + 2

    def ch(k, b):
        return k * width + b

    def dis(k, b):
        return k * width + nb + b

    def imp(k):
        return k * width + 2 * nb

    def exp_(k):
        return k * width + 2 * nb + 1

    def energy(k, b):
        return k * width + 2 * nb + 2 + b

    n = horizon * width
    c = np.zeros(n)
    bounds: list[tuple[float, float | None]] = [(0.0, None)] * n
    a_eq = np.zeros((horizon * (1 + nb), n))
    b_eq = np.zeros(horizon * (1 + nb))
    row = 0
    for k in range(horizon):
        c[imp(k)] = config.import_cost_per_kwh * dt
        c[exp_(k)] = -config.export_value_per_kwh * dt
        bounds[imp(k)] = (0.0, external.capacity_kw)
        bounds[exp_(k)] = (0.0, None)
        # power balance: pv + sum dis + imp = load + sum ch + exp
        for b in range(nb):
            a_eq[row, dis(k, b)] = 1.0
            a_eq[row, ch(k, b)] = -1.0
        a_eq[row, imp(k)] = 1.0
        a_eq[row, exp_(k)] = -1.0
        b_eq[row] = load[k] - pv[k]
        row += 1
        for b, (p, s) in enumerate(zip(params, initial)):
            keep = 1.0 - p.self_discharge_per_tick * dt
            c[ch(k, b)] = config.degradation_cost_per_kwh * dt
            c[dis(k, b)] = config.degradation_cost_per_kwh * dt
            bounds[ch(k, b)] = (0.0, p.max_power_kw)
            bounds[dis(k, b)] = (0.0, p.max_power_kw)
            # a battery starting below its floor (self-discharge drift) may only drift further
            lo = min(p.e_min, s.stored_kwh * keep ** (k + 1))
            bounds[energy(k, b)] = (lo, p.e_max)
            a_eq[row, energy(k, b)] = 1.0
            a_eq[row, ch(k, b)] = -p.eta_charge * dt
            a_eq[row, dis(k, b)] = dt / p.eta_discharge
            if k == 0:
                b_eq[row] = keep * s.stored_kwh
            else:
                a_eq[row, energy(k - 1, b)] = -keep
            row += 1
    for b in range(nb):
        c[energy(horizon - 1, b)] -= terminal_value(config, params[b])

    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleLP(res.message)
    if res.status == 3:
        raise UnboundedLP(res.message)
    if res.status != 0:
        raise InfeasibleLP(f"solver failed: {res.message}")

    x = np.where(np.abs(res.x) < 1e-9, 0.0, res.x)
    steps = []
    socs = []
    for k in range(horizon):
        a = StepAction(
            tuple(float(x[ch(k, b)]) for b in range(nb)),
            tuple(float(x[dis(k, b)]) for b in range(nb)),
            float(x[imp(k)]),
            float(x[exp_(k)]),
        )
        for b in range(nb):
            if a.charge_kw[b] > 1e-7 and a.discharge_kw[b] > 1e-7:
                raise AssertionError(f"simultaneous charge/discharge in plan step {k}")
        if a.import_kw > 1e-7 and a.export_kw > 1e-7:
            raise AssertionError(f"simultaneous import/export in plan step {k}")
        resid = a.balance_residual(load[k], pv[k])
        if abs(resid) > BALANCE_TOL_KW:
            raise AssertionError(f"power balance residual {resid} at step {k}")
        steps.append(a)
        socs.append(tuple(100.0 * float(x[energy(k, b)]) / params[b].capacity_kwh for b in range(nb)))
    return DispatchPlan(
        start_tick, tuple(steps), float(res.fun), tuple(socs),
        tuple(float(v) for v in load), tuple(float(v) for v in pv),
    )


# --------------------------------------------------------------------------
# Myopic baseline
# --------------------------------------------------------------------------


def baseline_step(
    load_kw: float,
    pv_kw: float,
    batteries: list[BatteryState],
    params: list[BatteryParams],
    external: ExternalSupplyParams,
    dt_hours: float = 1.0,
) -> StepAction:
    """Priority-list dispatch on realized net load.

    Surplus charges batteries (in list order) before any export; a deficit is
    covered by battery discharge before import. Residual shortfall is
    reported as ``unmet_kw``.
    """
    net = load_kw - pv_kw
    nb = len(params)
    charge = [0.0] * nb
    discharge = [0.0] * nb
    imp = exp = unmet = 0.0
    if net < 0:
        surplus = -net
        for i, (s, p) in enumerate(zip(batteries, params)):
            charge[i] = min(surplus, max_charge_kw(s, dt_hours, p))
            surplus -= charge[i]
        exp = surplus
    elif net > 0:
        deficit = net
        for i, (s, p) in enumerate(zip(batteries, params)):
            discharge[i] = min(deficit, max_discharge_kw(s, dt_hours, p))
            deficit -= discharge[i]
        imp = min(deficit, external.capacity_kw)
        unmet = deficit - imp
    return StepAction(tuple(charge), tuple(discharge), imp, exp, unmet)


# --------------------------------------------------------------------------
# Rolling horizon
# --------------------------------------------------------------------------


@dataclass
class RollingPlanner:
    """Re-plans every ``replan_every_ticks`` and serves cached steps between.

    ``forecast_fn(t, horizon) -> ForecastBundle`` may raise
    ``InsufficientHistory``; ``rolling_step`` then returns ``None`` and the
    caller dispatches with the baseline rule.
    """

    config: PlannerConfig
    params: list[BatteryParams]
    external: ExternalSupplyParams
    forecast_fn: object
    plan: DispatchPlan | None = None
    tree: ScenarioTree | None = None
    bundle: ForecastBundle | None = None
    plans: list[DispatchPlan] = field(default_factory=list)
    solves: int = 0

    def needs_replan(self, t: int) -> bool:
        return (t - self.config.activation_tick) % self.config.replan_every_ticks == 0 or self.plan is None

    def rolling_step(self, t: int, states: list[BatteryState]) -> StepAction | None:
        from .forecasting import InsufficientHistory

        if t < self.config.activation_tick:
            raise ValueError(f"planner not active before tick {self.config.activation_tick}")
        if self.needs_replan(t):
            try:
                bundle = self.forecast_fn(t, self.config.horizon_ticks)
            except InsufficientHistory as exc:
                log.info("tick %d: falling back to baseline (%s)", t, exc)
                self.plan = None
                return None
            self.bundle = bundle
            self.tree = build_scenario_tree(bundle)
            self.plan = solve_median_lp(self.tree.median, states, self.params, self.external, self.config, t)
            self.plans.append(self.plan)
            self.solves += 1
        offset = t - self.plan.start_tick
        if not 0 <= offset < self.plan.horizon:
            raise AssertionError(f"tick {t} outside cached plan starting {self.plan.start_tick}")
        return self.plan.steps[offset]


def execution_caps(
    step: StepAction,
    forecast_load_kw: float,
    forecast_pv_kw: float,
    load_kw: float,
    pv_kw: float,
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Per-battery charge and discharge limits for executing a planned step
    against realized conditions.

    Discharge never exceeds the realized deficit. Charging is limited to the
    realized surplus plus whatever the plan intended to draw from the grid.
    """
    surplus = max(0.0, pv_kw - load_kw)
    deficit = max(0.0, load_kw - pv_kw)
    grid_charge = max(0.0, sum(step.charge_kw) - max(0.0, forecast_pv_kw - forecast_load_kw))
    budget = surplus + grid_charge
    charge = []
    for kw in step.charge_kw:
        charge.append(min(kw, budget))
        budget -= charge[-1]
    discharge = []
    for kw in step.discharge_kw:
        discharge.append(min(kw, deficit))
        deficit -= discharge[-1]
    return tuple(charge), tuple(discharge)
