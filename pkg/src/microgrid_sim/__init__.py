"""Agent-based campus microgrid simulator with forecast-driven battery dispatch."""

from .config import Disturbance, DisturbanceKind, Mode, ScenarioConfig, load_config
from .metrics import MetricsReport
from .runner import compare, metrics_from_logs, run_experiment
from .simulation import SimulationWorld

__all__ = [
    "Disturbance",
    "DisturbanceKind",
    "MetricsReport",
    "Mode",
    "ScenarioConfig",
    "SimulationWorld",
    "compare",
    "load_config",
    "metrics_from_logs",
    "run_experiment",
]
