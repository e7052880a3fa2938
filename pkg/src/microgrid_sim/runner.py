"""Experiment execution: run a configured scenario, write its logs, and
recompute the summary metrics from those logs."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass

from .config import Mode, ScenarioConfig, config_from_dict, dump_config, with_scenario
from .kernel import read_run_log
from .metrics import MetricsReport, TABLE_ROWS, compute_report, forecast_mae, write_summary
from .negotiation import NEGOTIATION_LOG_HEADER, negotiation_rows
from .simulation import AGENTS, SimulationWorld, record_from_snapshot

import yaml

log = logging.getLogger(__name__)

PLAN_LOG_HEADER = ("plan_start", "step", "tick", "charge_kw", "discharge_kw", "import_kw", "export_kw",
                   "soc_percent", "forecast_load_kw", "forecast_pv_kw", "objective")
FORECAST_LOG_HEADER = ("plan_start", "step", "tick",
                       "load_q05", "load_q50", "load_q95", "pv_q05", "pv_q50", "pv_q95",
                       "load_realized", "pv_realized", "load_persistence", "pv_persistence")
EXOGENOUS_LOG_HEADER = ("tick", "ghi_wm2", "ambient_temp_c", "pv_kw", "load_kw",
                        "import_kw", "curtailed_kw", "unmet_kw", "planned")


def _f(x: float) -> str:
    return f"{x:.6f}"


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def plan_rows(world: SimulationWorld) -> list[list[str]]:
    rows = []
    for plan in world.planner.plans:
        for k, a in enumerate(plan.steps):
            rows.append([str(plan.start_tick), str(k), str(plan.start_tick + k),
                         _f(sum(a.charge_kw)), _f(sum(a.discharge_kw)), _f(a.import_kw), _f(a.export_kw),
                         _f(plan.soc_trajectory_percent[k][0]), _f(plan.load_kw[k]), _f(plan.pv_kw[k]),
                         _f(plan.objective_value)])
    return rows


def forecast_rows(world: SimulationWorld) -> list[list[str]]:
    """Forecast quantiles per planning instant with realized values and the
    24-tick persistence forecast; cells past the run end are left blank."""
    load, pv = world.history.load_kw, world.history.pv_kw
    rows = []
    for b in world.forecasts:
        for k in range(b.horizon):
            tick = b.start_tick + k
            seen = tick < len(load)
            rows.append([
                str(b.start_tick), str(k), str(tick),
                _f(b.load_q05[k]), _f(b.load_q50[k]), _f(b.load_q95[k]),
                _f(b.pv_q05[k]), _f(b.pv_q50[k]), _f(b.pv_q95[k]),
                _f(load[tick]) if seen else "", _f(pv[tick]) if seen else "",
                _f(load[tick - 24]) if seen else "", _f(pv[tick - 24]) if seen else "",
            ])
    return rows


def exogenous_rows(world: SimulationWorld) -> list[list[str]]:
    return [
        [str(r.tick), _f(r.weather.ghi), _f(r.weather.ambient_temp_c), _f(r.pv_kw), _f(r.load_kw),
         _f(r.action.import_kw), _f(r.action.export_kw), _f(r.action.unmet_kw), str(int(r.planned))]
        for r in world.reports
    ]


def mae_from_forecast_log(rows) -> dict[str, float]:
    """Step-0 MAE of the median forecast and of persistence, per series."""
    pairs = {"load": [], "pv": [], "load_persistence": [], "pv_persistence": []}
    for r in rows:
        if r["step"] != "0" or r["load_realized"] == "":
            continue
        for s in ("load", "pv"):
            real = float(r[f"{s}_realized"])
            pairs[s].append((float(r[f"{s}_q50"]), real))
            pairs[f"{s}_persistence"].append((float(r[f"{s}_persistence"]), real))
    return {k: forecast_mae(v) if v else math.nan for k, v in pairs.items()}


def _rows_as_dicts(header, rows) -> list[dict[str, str]]:
    return [dict(zip(header, r)) for r in rows]


@dataclass
class ExperimentResult:
    config: ScenarioConfig
    world: SimulationWorld
    metrics: MetricsReport
    persistence_mae: dict[str, float]
    out_dir: str | None = None


def summarize(records, activation_tick: int, forecast_log_rows) -> tuple[MetricsReport, dict[str, float]]:
    mae = mae_from_forecast_log(forecast_log_rows)
    report = compute_report(records, activation_tick)
    report = MetricsReport(**{**report.as_dict(), "load_mae_kw": mae["load"], "pv_mae_kw": mae["pv"]})
    return report, {"load": mae["load_persistence"], "pv": mae["pv_persistence"]}


def run_experiment(cfg: ScenarioConfig, out_dir: str | None = None) -> ExperimentResult:
    """Run ``cfg`` to completion; with ``out_dir`` also write every log."""
    world = SimulationWorld(cfg)
    world.run()
    f_rows = forecast_rows(world)
    report, persistence = summarize(world.records, cfg.planner.activation_tick,
                                    _rows_as_dicts(FORECAST_LOG_HEADER, f_rows))
    if world.fallback_ticks:
        log.warning("baseline fallback at ticks %s", world.fallback_ticks)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "run.csv"), "w", newline="") as fh:
            fh.write(world.run_log.getvalue())
        _write_csv(os.path.join(out_dir, "plan.csv"), PLAN_LOG_HEADER, plan_rows(world))
        _write_csv(os.path.join(out_dir, "negotiation.csv"), NEGOTIATION_LOG_HEADER, negotiation_rows(world.cnp.records))
        _write_csv(os.path.join(out_dir, "forecast.csv"), FORECAST_LOG_HEADER, f_rows)
        _write_csv(os.path.join(out_dir, "exogenous.csv"), EXOGENOUS_LOG_HEADER, exogenous_rows(world))
        with open(os.path.join(out_dir, "config.yaml"), "w") as fh:
            fh.write(dump_config(cfg))
        write_summary(report, out_dir, {
            "mode": cfg.mode.value, "seed": cfg.seed, "ticks": cfg.ticks,
            "load_persistence_mae_kw": persistence["load"], "pv_persistence_mae_kw": persistence["pv"],
        })
    return ExperimentResult(cfg, world, report, persistence, out_dir)


def metrics_from_logs(out_dir: str) -> MetricsReport:
    """Recompute the summary from ``run.csv`` and ``forecast.csv`` alone
    (plus ``config.yaml`` for the activation tick and interval length)."""
    cfg_path = os.path.join(out_dir, "config.yaml")
    cfg = ScenarioConfig()
    if os.path.exists(cfg_path):
        with open(cfg_path) as fh:
            cfg = config_from_dict(yaml.safe_load(fh))
    by_agent = read_run_log(os.path.join(out_dir, "run.csv"))
    missing = set(AGENTS) - set(by_agent)
    if missing:
        raise ValueError(f"run log lacks agents {sorted(missing)}")
    ticks = sorted(by_agent[AGENTS[0]])
    records = [record_from_snapshot(tuple(by_agent[a][t] for a in sorted(AGENTS)), cfg.planner.dt_hours)
               for t in ticks]
    f_path = os.path.join(out_dir, "forecast.csv")
    f_rows = []
    if os.path.exists(f_path):
        with open(f_path, newline="") as fh:
            f_rows = list(csv.DictReader(fh))
    return summarize(records, cfg.planner.activation_tick, f_rows)[0]


def compare(cfg: ScenarioConfig, scenario: str | None = None, out_dir: str | None = None) -> dict[str, MetricsReport]:
    """Baseline and predictive runs with identical seed and exogenous inputs."""
    if scenario is not None:
        cfg = with_scenario(cfg, scenario)
    out = {}
    for mode in (Mode.BASELINE, Mode.PREDICTIVE):
        sub = None if out_dir is None else os.path.join(out_dir, mode.value.lower())
        out[mode.value] = run_experiment(cfg.replace(mode=mode), sub).metrics
    return out


def format_table(reports: dict[str, MetricsReport]) -> str:
    names = list(reports)
    width = max(len(label) for _, label in TABLE_ROWS)
    buf = io.StringIO()
    buf.write(f"{'Metric':<{width}}  " + "  ".join(f"{n:>12}" for n in names) + "\n")
    for key, label in TABLE_ROWS:
        vals = [getattr(reports[n], key) for n in names]
        buf.write(f"{label:<{width}}  " + "  ".join(f"{v:>12.3f}" for v in vals) + "\n")
    return buf.getvalue()
