import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from microgrid_sim.metrics import (
    EmptySeries,
    MetricsReport,
    TickRecord,
    ZeroConsumption,
    cebr,
    cebr_series,
    compute_report,
    equivalent_full_cycles,
    forecast_mae,
    iebr,
    read_summary,
    reserve_indicators,
    write_summary,
)


def rec(tick, prod, cons, soc=50.0, pv=1.0):
    return TickRecord(tick, prod, cons, soc_percent=soc, pv_kw=pv)


def test_cebr_identity():
    assert cebr([rec(t, 3.0, 3.0) for t in range(5)]) == 100.0


def test_cebr_double_production():
    assert cebr([rec(t, 2.0 * (t + 1), t + 1.0) for t in range(5)]) == pytest.approx(200.0)


def test_cebr_up_to_tick():
    records = [rec(0, 10.0, 5.0), rec(1, 0.0, 5.0)]
    assert cebr(records, 0) == 200.0
    assert cebr(records, 1) == 100.0


def test_cebr_without_consumption():
    with pytest.raises(ZeroConsumption):
        cebr([rec(0, 1.0, 0.0)])


def test_cebr_series_matches_pointwise():
    records = [rec(t, 1.0 + t, 2.0) for t in range(6)]
    for t, v in cebr_series(records):
        assert v == pytest.approx(cebr(records, t))


def test_iebr_identity():
    assert iebr([rec(t, 4.0, 4.0) for t in range(4)])[1] == 100.0


def test_iebr_skips_ticks_without_consumption():
    series, _ = iebr([rec(0, 1.0, 1.0), rec(1, 1.0, 0.0), rec(2, 1.0, 1.0)])
    assert [t for t, _ in series] == [0, 2]


def test_iebr_two_tick_example():
    series, mean = iebr([rec(0, 10.0, 5.0), rec(1, 0.0, 5.0)])
    assert [v for _, v in series] == [200.0, 0.0]
    assert mean == 100.0


def test_iebr_post_activation_filter():
    series, _ = iebr([rec(t, 1.0, 1.0) for t in range(10)], activation_tick=6)
    assert [t for t, _ in series] == [7, 8, 9]


def test_reserve_constant_soc():
    records = [rec(t, 1, 1, soc=60.0, pv=5.0) for t in range(100)]
    assert reserve_indicators(records, 10) == (60.0, 100.0, 0.0)


def test_scarcity_counting_example():
    # Post-activation ticks: half with zero PV, half of those at SoC 4 %.
    records = [rec(0, 1, 1)]
    for t in range(1, 9):
        zero_pv = t % 2 == 0
        soc = 4.0 if zero_pv and t % 4 == 0 else 40.0
        records.append(rec(t, 1, 1, soc=soc, pv=0.0 if zero_pv else 3.0))
    _, bri, scarcity = reserve_indicators(records, 0)
    assert scarcity == 25.0
    assert bri == 0.0


def test_reserve_needs_post_activation_ticks():
    with pytest.raises(EmptySeries):
        reserve_indicators([rec(0, 1, 1)], 5)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=50))
def test_bri_complement(socs):
    records = [rec(t + 1, 1, 1, soc=s) for t, s in enumerate(socs)]
    _, bri, _ = reserve_indicators(records, 0)
    below = 100.0 * sum(s < 50 for s in socs) / len(socs)
    assert bri + below == pytest.approx(100.0)


def test_efc_full_cycle():
    assert equivalent_full_cycles([0, 100, 0]) == 1.0


def test_efc_constant():
    assert equivalent_full_cycles([42.0] * 10) == 0.0


def test_efc_hand_sum():
    assert equivalent_full_cycles([50, 60, 40, 40]) == 0.15


def test_mae_perfect():
    assert forecast_mae([(3.0, 3.0), (1.5, 1.5)]) == 0.0


def test_mae_example():
    assert forecast_mae([(1.0, 0.0), (0.0, 3.0)]) == 2.0


def test_mae_empty():
    with pytest.raises(EmptySeries):
        forecast_mae([])


def test_report_and_summary_round_trip(tmp_path):
    records = [rec(t, 2.0, 1.0 + (t % 3), soc=float(t % 100), pv=float(t % 2)) for t in range(20)]
    report = compute_report(records, 5, load_pairs=[(1, 2)], pv_pairs=[(0, 0)])
    assert isinstance(report, MetricsReport)
    assert report.load_mae_kw == 1.0 and report.pv_mae_kw == 0.0
    write_summary(report, str(tmp_path), {"mode": "BASELINE"})
    back = read_summary(str(tmp_path / "metrics.txt"))
    assert back["mode"] == "BASELINE"
    assert float(back["final_cebr_percent"]) == report.final_cebr_percent
    assert (tmp_path / "metrics.csv").read_text().startswith("metric,value\n")


def test_report_without_forecasts_has_nan_mae():
    report = compute_report([rec(t, 1, 1) for t in range(5)], 1)
    assert math.isnan(report.load_mae_kw)
