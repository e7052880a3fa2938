"""A look at the quantile forests the planner relies on.

Runs the predictive controller for two days past activation, then prints a
few planning instants with their forecast bands next to what happened, and
compares one-step median errors against a same-hour-yesterday guess.

    python demos/forecast_inspection.py [seed]
"""

import sys

from microgrid_sim import Mode, ScenarioConfig, run_experiment

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
result = run_experiment(ScenarioConfig(seed=seed, ticks=216, mode=Mode.PREDICTIVE))
world = result.world

print("plan  step  tick   load q05/q50/q95 -> actual        pv q05/q50/q95 -> actual")
for bundle in world.forecasts[::6]:
    for k in range(bundle.horizon):
        t = bundle.start_tick + k
        if t >= len(world.history.load_kw):
            break
        print(f"{bundle.start_tick:>4}  {k:>4}  {t:>4}   "
              f"{bundle.load_q05[k]:5.1f}/{bundle.load_q50[k]:5.1f}/{bundle.load_q95[k]:5.1f} -> {world.history.load_kw[t]:5.1f}    "
              f"{bundle.pv_q05[k]:5.1f}/{bundle.pv_q50[k]:5.1f}/{bundle.pv_q95[k]:5.1f} -> {world.history.pv_kw[t]:5.1f}")

m = result.metrics
print(f"\none-step MAE, median forecast: load {m.load_mae_kw:.2f} kW, PV {m.pv_mae_kw:.2f} kW")
print(f"one-step MAE, 24 h persistence: load {result.persistence_mae['load']:.2f} kW, "
      f"PV {result.persistence_mae['pv']:.2f} kW")
