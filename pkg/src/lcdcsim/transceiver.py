"""Laser/transceiver power state machine with an energy ledger.

Modes advance ``Off -> TurningOn -> On -> TurningOff -> Off``. A turn-on
request during ``TurningOff`` aborts the turn-off and restarts the full
turn-on delay. Transitional modes are billed at full power.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from enum import IntEnum

from .units import S, US


class Mode(IntEnum):
    OFF = 0
    TURNING_ON = 1
    ON = 2
    TURNING_OFF = 3


class TransceiverError(RuntimeError):
    """Illegal power request, e.g. switching off a laser that is not on."""


@dataclass(frozen=True)
class TransceiverParams:
    turn_on_delay: int = 1 * US
    turn_off_delay: int = 10 * US
    power_on: float = 1.0
    power_off: float = 0.0

    def __post_init__(self) -> None:
        if self.turn_on_delay <= 0 or self.turn_off_delay <= 0:
            raise ValueError("transceiver delays must be positive")
        if not self.power_on > self.power_off >= 0:
            raise ValueError("need power_on > power_off >= 0")

    def power(self, mode: Mode) -> float:
        return self.power_off if mode == Mode.OFF else self.power_on


SFP_PLUS_10G = TransceiverParams(power_on=1.0)
QSFP_40G = TransceiverParams(power_on=2.4)


def params_for_bandwidth(bandwidth: float, base: TransceiverParams | None = None,
                         power_10g: float = 1.0, power_40g: float = 2.4) -> TransceiverParams:
    base = base or SFP_PLUS_10G
    power = power_40g if bandwidth > 10e9 else power_10g
    return TransceiverParams(base.turn_on_delay, base.turn_off_delay, power, base.power_off)


class Transceiver:
    def __init__(self, params: TransceiverParams, mode: Mode = Mode.OFF, t0: int = 0, name: str = "") -> None:
        if mode not in (Mode.OFF, Mode.ON):
            raise TransceiverError("a transceiver starts either Off or On")
        self.params = params
        self.name = name
        self.mode = mode
        self.pending_at = 0  # ready_at while TurningOn, done_at while TurningOff
        self.last_transition = t0
        self._times: list[int] = [t0]
        self._modes: list[Mode] = [mode]

    def _enter(self, mode: Mode, t: int) -> None:
        self.mode = mode
        self.last_transition = t
        if self._times[-1] == t:
            self._modes[-1] = mode
        else:
            self._times.append(t)
            self._modes.append(mode)

    def advance(self, t: int) -> Mode:
        """Resolve any transition that completed at or before ``t``."""
        if self.mode == Mode.TURNING_ON and t >= self.pending_at:
            self._enter(Mode.ON, self.pending_at)
        elif self.mode == Mode.TURNING_OFF and t >= self.pending_at:
            self._enter(Mode.OFF, self.pending_at)
        return self.mode

    def is_on(self, t: int) -> bool:
        return self.advance(t) == Mode.ON

    def request_on(self, t: int) -> int:
        mode = self.advance(t)
        if mode == Mode.ON:
            return t
        if mode == Mode.TURNING_ON:
            return self.pending_at
        self.pending_at = t + self.params.turn_on_delay
        self._enter(Mode.TURNING_ON, t)
        return self.pending_at

    def request_off(self, t: int) -> int:
        mode = self.advance(t)
        if mode != Mode.ON:
            raise TransceiverError(f"request_off on {self.name or 'transceiver'} while {mode.name}")
        self.pending_at = t + self.params.turn_off_delay
        self._enter(Mode.TURNING_OFF, t)
        return self.pending_at

    def history(self, t_end: int) -> list[tuple[int, int, Mode]]:
        """``(start, end, mode)`` intervals covering ``[first, t_end]``."""
        self.advance(t_end)
        out = []
        for i, (start, mode) in enumerate(zip(self._times, self._modes)):
            if start >= t_end:
                break
            end = self._times[i + 1] if i + 1 < len(self._times) else t_end
            out.append((start, min(end, t_end), mode))
        return out

    def time_in_modes(self, t0: int, t1: int) -> dict[Mode, int]:
        if t1 < t0:
            raise ValueError("window end before start")
        self.advance(t1)
        spent = {m: 0 for m in Mode}
        times, modes = self._times, self._modes
        i = max(0, bisect_right(times, t0) - 1)
        while i < len(times):
            start = max(times[i], t0)
            end = times[i + 1] if i + 1 < len(times) else t1
            end = min(end, t1)
            if start >= t1:
                break
            if end > start:
                spent[modes[i]] += end - start
            i += 1
        return spent

    def energy_in(self, t0: int, t1: int) -> float:
        """Joules consumed over ``[t0, t1]``."""
        spent = self.time_in_modes(t0, t1)
        return sum(self.params.power(m) * ticks for m, ticks in spent.items()) / S

    def ledger(self, t0: int, t1: int) -> dict[str, float]:
        spent = self.time_in_modes(t0, t1)
        return {m.name: self.params.power(m) * ticks / S for m, ticks in spent.items()}
