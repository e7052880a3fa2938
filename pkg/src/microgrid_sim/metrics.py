"""Energy-balance, reserve, cycling and forecast-error indicators computed
from per-tick run records."""

from __future__ import annotations

import csv
import os
from dataclasses import asdict, dataclass

import numpy as np

PV_ZERO_KW = 1e-6
BRI_THRESHOLD = 50.0
SCARCITY_THRESHOLD = 5.0


class ZeroConsumption(ValueError):
    pass


class EmptySeries(ValueError):
    pass


@dataclass(frozen=True)
class TickRecord:
    tick: int
    produced_kwh: float  # PV generated plus battery discharge delivered
    consumed_kwh: float  # load served
    imported_kwh: float = 0.0
    soc_percent: float = 0.0
    pv_kw: float = 0.0


def cebr(records, t: int | None = None) -> float:
    """Cumulative produced / consumed energy in percent up to tick ``t``."""
    sel = [r for r in records if t is None or r.tick <= t]
    cons = sum(r.consumed_kwh for r in sel)
    if cons <= 0:
        raise ZeroConsumption(f"no consumption up to tick {t}")
    return 100.0 * sum(r.produced_kwh for r in sel) / cons


def cebr_series(records) -> list[tuple[int, float]]:
    out = []
    prod = cons = 0.0
    for r in records:
        prod += r.produced_kwh
        cons += r.consumed_kwh
        if cons > 0:
            out.append((r.tick, 100.0 * prod / cons))
    return out


def iebr(records, activation_tick: int | None = None) -> tuple[list[tuple[int, float]], float]:
    """Per-tick produced / consumed ratio, skipping ticks with no consumption.

    With ``activation_tick`` set, only ticks after it are included.
    """
    series = [
        (r.tick, 100.0 * r.produced_kwh / r.consumed_kwh)
        for r in records
        if r.consumed_kwh > 0 and (activation_tick is None or r.tick > activation_tick)
    ]
    if not series:
        raise EmptySeries("no tick with positive consumption")
    return series, float(np.mean([v for _, v in series]))


def reserve_indicators(records, activation_tick: int) -> tuple[float, float, float]:
    """``(mean SoC, % ticks with SoC >= 50, % ticks with zero PV and SoC < 5)``
    over ticks strictly after ``activation_tick``."""
    post = [r for r in records if r.tick > activation_tick]
    if not post:
        raise EmptySeries(f"no ticks after {activation_tick}")
    soc = np.array([r.soc_percent for r in post])
    pv = np.array([r.pv_kw for r in post])
    bri = 100.0 * np.mean(soc >= BRI_THRESHOLD)
    scarcity = 100.0 * np.mean((pv < PV_ZERO_KW) & (soc < SCARCITY_THRESHOLD))
    return float(soc.mean()), float(bri), float(scarcity)


def equivalent_full_cycles(soc_series) -> float:
    soc = np.asarray(soc_series, dtype=float)
    if soc.size < 2:
        raise EmptySeries("need at least two SoC samples")
    return float(np.abs(np.diff(soc)).sum() / 200.0)


def forecast_mae(pairs) -> float:
    pairs = list(pairs)
    if not pairs:
        raise EmptySeries("no forecast/realization pairs")
    return float(np.mean([abs(p - r) for p, r in pairs]))


@dataclass(frozen=True)
class MetricsReport:
    final_cebr_percent: float
    mean_iebr_post_activation_percent: float
    avg_soc_post_activation_percent: float
    bri_at_least_50_percent: float
    scarcity_proxy_percent: float
    equivalent_full_cycles: float
    load_mae_kw: float = float("nan")
    pv_mae_kw: float = float("nan")

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


TABLE_ROWS = (
    ("final_cebr_percent", "Final CEBR [%]"),
    ("mean_iebr_post_activation_percent", "Mean IEBR post-activation [%]"),
    ("avg_soc_post_activation_percent", "Avg SoC post-activation [%]"),
    ("bri_at_least_50_percent", "BRI >= 50% post-activation [% of ticks]"),
    ("scarcity_proxy_percent", "ScarcityProxy post-activation [% of ticks]"),
    ("equivalent_full_cycles", "Equivalent full cycles [-]"),
    ("load_mae_kw", "Load forecast MAE [kW]"),
    ("pv_mae_kw", "PV forecast MAE [kW]"),
)


def compute_report(records, activation_tick: int, load_pairs=(), pv_pairs=()) -> MetricsReport:
    records = sorted(records, key=lambda r: r.tick)
    avg_soc, bri, scarcity = reserve_indicators(records, activation_tick)
    load_pairs, pv_pairs = list(load_pairs), list(pv_pairs)
    return MetricsReport(
        final_cebr_percent=cebr(records),
        mean_iebr_post_activation_percent=iebr(records, activation_tick)[1],
        avg_soc_post_activation_percent=avg_soc,
        bri_at_least_50_percent=bri,
        scarcity_proxy_percent=scarcity,
        equivalent_full_cycles=equivalent_full_cycles([r.soc_percent for r in records]),
        load_mae_kw=forecast_mae(load_pairs) if load_pairs else float("nan"),
        pv_mae_kw=forecast_mae(pv_pairs) if pv_pairs else float("nan"),
    )


# --------------------------------------------------------------------------
# Log round-trip
# --------------------------------------------------------------------------


def write_summary(report: MetricsReport, out_dir: str, extra: dict | None = None) -> None:
    values = report.as_dict()
    with open(os.path.join(out_dir, "metrics.txt"), "w") as fh:
        for k, v in {**(extra or {}), **values}.items():
            fh.write(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n")
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("metric", "value"))
        for key, label in TABLE_ROWS:
            w.writerow((label, repr(values[key])))


def read_summary(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            if " = " in line:
                k, v = line.rstrip("\n").split(" = ", 1)
                out[k] = v
    return out


def plot_data(records, activation_tick: int) -> dict[str, list[tuple[int, float]]]:
    """(tick, value) series for the CEBR, IEBR and SoC figures."""
    return {
        "cebr": cebr_series(records),
        "iebr": iebr(records, activation_tick)[0],
        "soc": [(r.tick, r.soc_percent) for r in records],
    }
