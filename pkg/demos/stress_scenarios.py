"""Predictive control under a PV outage and under a doubled load.

Both disturbances start at tick 200, after the planner has taken over. The
second half of the script varies the planner's value on stored energy left
at the end of its horizon. That one number decides whether the planner keeps
a reserve or spends the battery the way the rule-based controller does.

    python demos/stress_scenarios.py [seed]
"""

import dataclasses
import sys

from microgrid_sim import Mode, load_config, run_experiment
from microgrid_sim.config import nominal_config_path, with_scenario

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
base = load_config(nominal_config_path()).replace(seed=seed, mode=Mode.PREDICTIVE)


def line(label, m):
    print(f"{label:<28} SoC {m.avg_soc_post_activation_percent:5.1f} %  BRI50 {m.bri_at_least_50_percent:5.1f} %  "
          f"scarcity {m.scarcity_proxy_percent:5.1f} %  CEBR {m.final_cebr_percent:6.1f} %  EFC {m.equivalent_full_cycles:5.2f}")


print("predictive controller, default settings")
for scenario in ("nominal", "pv-outage", "load-spike"):
    line(scenario, run_experiment(with_scenario(base, scenario)).metrics)

baseline = run_experiment(base.replace(mode=Mode.BASELINE)).metrics
line("baseline (nominal)", baseline)

# Discharging saves import_cost per kWh but spends stored energy worth
# terminal_value / eta_d plus the cycling cost. Below roughly 0.188 $/kWh the
# planner discharges into every deficit; above it, it holds its charge.
print("\nend-of-horizon value on stored energy ($/kWh)")
for value in (0.0, 0.17, 0.19):
    cfg = base.replace(planner=dataclasses.replace(base.planner, terminal_value_per_kwh=value))
    line(f"{value:.2f} nominal", run_experiment(cfg).metrics)
    line(f"{value:.2f} load-spike", run_experiment(with_scenario(cfg, "load-spike")).metrics)
