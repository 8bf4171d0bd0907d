"""Integer picosecond time base and unit helpers.

All simulated time is an ``int`` count of picoseconds. Helpers here convert
between human units and ticks; they round to the nearest picosecond.
"""

PS = 1
NS = 1_000
US = 1_000_000
MS = 1_000_000_000
S = 1_000_000_000_000

#: Fiber propagation delay (light travels ~2e8 m/s in glass).
FIBER_PS_PER_M = 5 * NS

#: Switch core clock of the FPGA prototype.
SWITCH_CLOCK_HZ = 169.32e6
SWITCH_PIPELINE_CYCLES = 7


def ns(value: float) -> int:
    return round(value * NS)


def us(value: float) -> int:
    return round(value * US)


def ms(value: float) -> int:
    return round(value * MS)


def seconds(value: float) -> int:
    return round(value * S)


def to_seconds(ticks: int) -> float:
    return ticks / S


def to_us(ticks: int) -> float:
    return ticks / US


def cycles(n: int, clock_hz: float = SWITCH_CLOCK_HZ) -> int:
    """Duration of ``n`` clock cycles, rounded once (not per cycle)."""
    return round(n * S / clock_hz)


def serialization(size_bytes: int, bandwidth_bps: float) -> int:
    """Time to clock ``size_bytes`` onto a link of ``bandwidth_bps``."""
    return round(size_bytes * 8 * S / bandwidth_bps)


def parse_duration(text: str) -> int:
    """Parse ``"10ms"``, ``"3.2us"``, ``"500ns"``, ``"1s"`` or bare picoseconds."""
    text = text.strip().lower()
    for suffix, scale in (("ps", PS), ("ns", NS), ("us", US), ("ms", MS), ("s", S)):
        if text.endswith(suffix):
            number = text[: -len(suffix)].strip()
            try:
                return round(float(number) * scale)
            except ValueError:
                break
    else:
        try:
            return int(text)
        except ValueError:
            pass
    raise ValueError(f"cannot parse duration {text!r}")


def format_duration(ticks: int) -> str:
    """Inverse of :func:`parse_duration` that never loses precision."""
    for suffix, scale in (("s", S), ("ms", MS), ("us", US), ("ns", NS)):
        if ticks and ticks % scale == 0:
            return f"{ticks // scale}{suffix}"
    return f"{ticks}ps"
