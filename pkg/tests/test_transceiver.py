import pytest
from hypothesis import given, strategies as st

from lcdcsim.transceiver import Mode, Transceiver, TransceiverError, TransceiverParams
from lcdcsim.units import S, US

P1 = TransceiverParams()  # 1 us on, 10 us off, 1 W


def test_turn_on_from_off():
    x = Transceiver(P1)
    assert x.request_on(0) == 1 * US
    assert x.advance(1 * US) == Mode.ON


def test_turn_on_is_idempotent():
    x = Transceiver(P1, Mode.ON)
    assert x.request_on(5 * US) == 5 * US
    y = Transceiver(P1)
    y.request_on(0)
    assert y.request_on(US // 2) == 1 * US


def test_turn_off_takes_ten_microseconds():
    x = Transceiver(P1, Mode.ON)
    assert x.request_off(0) == 10 * US
    assert x.advance(10 * US - 1) == Mode.TURNING_OFF
    assert x.advance(10 * US) == Mode.OFF


def test_turning_off_is_billed_as_active():
    x = Transceiver(P1, Mode.ON)
    x.request_off(0)
    assert x.energy_in(0, 10 * US) == pytest.approx(10e-6)


def test_request_off_while_off_is_an_error():
    with pytest.raises(TransceiverError):
        Transceiver(P1).request_off(0)


def test_energy_windows():
    on = Transceiver(P1, Mode.ON)
    assert on.energy_in(0, 20 * US) == pytest.approx(20e-6)
    assert Transceiver(P1).energy_in(0, 20 * US) == 0.0
    x = Transceiver(P1)
    x.request_on(5 * US)
    # off 5 us, turning on 1 us, on 4 us
    assert x.energy_in(0, 10 * US) == pytest.approx(5e-6)


def test_turn_on_during_turn_off_restarts_full_delay():
    x = Transceiver(P1, Mode.ON)
    x.request_off(0)
    assert x.request_on(3 * US) == 4 * US
    assert x.advance(4 * US) == Mode.ON


def test_invalid_params():
    with pytest.raises(ValueError):
        TransceiverParams(turn_on_delay=0)
    with pytest.raises(ValueError):
        TransceiverParams(power_on=0.5, power_off=1.0)


ops = st.lists(st.tuples(st.integers(1, 30 * US), st.booleans()), max_size=30)


@given(ops, st.sampled_from([0.0, 0.1]))
def test_ledger_matches_off_time_accounting(script, residual):
    """Gated energy equals always-on energy minus the saving during Off spans."""
    params = TransceiverParams(power_on=2.4, power_off=residual)
    x = Transceiver(params, Mode.ON)
    t = 0
    for gap, want_on in script:
        t += gap
        mode = x.advance(t)
        if want_on:
            x.request_on(t)
        elif mode == Mode.ON:
            x.request_off(t)
    t_end = t + 50 * US
    spent = x.time_in_modes(0, t_end)
    assert sum(spent.values()) == t_end
    baseline = params.power_on * t_end / S
    expected = baseline - (params.power_on - residual) * spent[Mode.OFF] / S
    assert x.energy_in(0, t_end) == pytest.approx(expected, rel=1e-12, abs=1e-18)
    saving = 1 - x.energy_in(0, t_end) / baseline
    assert -1e-12 <= saving <= 1


@given(ops)
def test_history_covers_window_without_gaps(script):
    x = Transceiver(P1)
    t = 0
    for gap, want_on in script:
        t += gap
        if want_on:
            x.request_on(t)
        elif x.advance(t) == Mode.ON:
            x.request_off(t)
    hist = x.history(t + 1)
    assert hist[0][0] == 0 and hist[-1][1] == t + 1
    assert all(a[1] == b[0] for a, b in zip(hist, hist[1:]))
