import pytest
from hypothesis import given, strategies as st

from lcdcsim import power
from lcdcsim.power import (
    CLASSES, CURVES, ComponentInventory, OptimizationScenario, PowerModelError, ServerPowerCurve, Wattages,
    breakdown, calibrate_ladder, overall_savings, parse_power_scenario, savings_table, shipped_inventories,
    switch_transceiver_fraction,
)


@pytest.fixture(scope="module")
def inventories():
    return shipped_inventories()


def test_curve_presets():
    assert CURVES["2013"](0.3) == pytest.approx(0.70)
    assert CURVES["sr665"](0.3) == pytest.approx(0.58)
    assert CURVES["energy-proportional"](0.3) == pytest.approx(0.40)
    assert CURVES["peak"](0.1) == 1.0
    for curve in CURVES.values():
        assert curve(1.0) == 1.0
        values = [curve(u / 100) for u in range(101)]
        assert values == sorted(values)


def test_bad_curve_rejected():
    with pytest.raises(PowerModelError):
        ServerPowerCurve("x", ((0.0, 0.5), (0.5, 0.4), (1.0, 1.0)))
    with pytest.raises(PowerModelError):
        ServerPowerCurve("x", ((0.0, 0.5), (1.0, 0.9)))


def test_factor_and_wattage_validation():
    with pytest.raises(PowerModelError):
        OptimizationScenario(server_compute=0.0)
    with pytest.raises(PowerModelError):
        OptimizationScenario(electronics=1.5)
    with pytest.raises(PowerModelError):
        Wattages(phy_w=0)


def test_optics_fraction_of_a_64_port_switch():
    # 64 W of optics on a 140 W switch: 64 / 204
    assert switch_transceiver_fraction() == pytest.approx(64 / 204)


def test_all_peak_clos_server_share(inventories):
    clos = inventories[0]
    share = breakdown(clos, "peak", 1.0)["servers"]
    assert 0.91 <= share <= 0.96


def test_zero_servers_is_all_network():
    inv = ComponentInventory("net-only", 0, 4, 128, 128, 0, 0)
    shares = breakdown(inv, "peak", 0.5)
    assert shares["servers"] == 0.0
    assert sum(shares[k] for k in CLASSES if k != "servers") == pytest.approx(1.0)


def test_overall_savings_examples():
    assert overall_savings(0.20, 0.60) == pytest.approx(0.12)
    assert overall_savings(0.20, 0.60, True, 0.26) == pytest.approx(0.276)
    assert overall_savings(0.3, 0.0, True, 0.2) == 0.0
    with pytest.raises(PowerModelError):
        overall_savings(1.2, 0.5)


factors = st.floats(0.01, 1.0)


@given(factors, factors, factors, factors, st.floats(0, 1), st.sampled_from(sorted(CURVES)))
def test_shares_sum_to_one(c, m, s, e, u, curve):
    sc = OptimizationScenario("x", c, m, s, e)
    for inv in shipped_inventories():
        assert sum(breakdown(inv, curve, u, sc).values()) == pytest.approx(1.0, abs=1e-9)


@given(factors, factors, st.floats(0, 1))
def test_cutting_server_power_raises_network_share(hi, lo_frac, u):
    lo = hi * lo_frac
    inv = shipped_inventories()[0]
    a = breakdown(inv, "energy-proportional", u, OptimizationScenario("a", server_compute=hi))
    b = breakdown(inv, "energy-proportional", u, OptimizationScenario("b", server_compute=lo))
    assert 1 - b["servers"] >= 1 - a["servers"] - 1e-12


def test_frozen_calibration_is_reproducible(inventories):
    c, e, f5, f7 = calibrate_ladder(inventories)
    assert c == pytest.approx(power.CMOS_COMPUTE, abs=5e-4)
    assert e == pytest.approx(power.CMOS_ELECTRONICS, abs=5e-4)
    assert (f5, f7) == pytest.approx(power.EP_MID, abs=5e-4)


def test_savings_table_zero_savings(inventories):
    rows = savings_table(0.0, inventories=inventories)
    assert all(r.savings_transceivers == r.savings_with_phy_nic == 0 for r in rows)


def test_ladder_bars_progress(inventories):
    for inv in inventories:
        bars = power.ladder_table(inv, 0.3)
        servers = [shares["servers"] for _, shares in bars]
        assert servers == sorted(servers, reverse=True)


def test_power_scenario_parsing():
    sc = parse_power_scenario("[power]\nnetwork_savings = 0.5\nutilizations = 0.3, 0.7\n"
                              "[wattage]\nserver_peak_w = 400\n")
    assert sc.network_savings == 0.5 and sc.utilizations == (0.3, 0.7)
    assert sc.watts.server_peak_w == 400
    with pytest.raises(PowerModelError):
        parse_power_scenario("[power]\nbogus = 1\n")
    with pytest.raises(PowerModelError):
        parse_power_scenario("[power]\nnetwork_savings = 2\n")
    with pytest.raises(PowerModelError):
        parse_power_scenario("[power]\ndesigns = torus\n")
