"""Latency statistics, link activation timelines and savings reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .units import US


class LatencyStats:
    """Exact count/sum plus a log-bucket sketch with 1% relative error.

    ``keep_samples`` additionally stores every sample so percentiles can be
    computed exactly (fine at desk scale).
    """

    def __init__(self, rel_error: float = 0.01, keep_samples: bool = False) -> None:
        self.gamma = (1 + rel_error) / (1 - rel_error)
        self._log_gamma = math.log(self.gamma)
        self.count = 0
        self.total = 0
        self.minimum: int | None = None
        self.maximum: int | None = None
        self.buckets: dict[int, int] = {}
        self.zeros = 0
        self.samples: list[int] | None = [] if keep_samples else None

    def record(self, latency: int) -> None:
        if latency < 0:
            raise ValueError(f"negative latency {latency}")
        self.count += 1
        self.total += latency
        if self.minimum is None or latency < self.minimum:
            self.minimum = latency
        if self.maximum is None or latency > self.maximum:
            self.maximum = latency
        if latency == 0:
            self.zeros += 1
        else:
            key = math.ceil(math.log(latency) / self._log_gamma)
            self.buckets[key] = self.buckets.get(key, 0) + 1
        if self.samples is not None:
            self.samples.append(latency)

    def record_delivery(self, injected_at: int, delivered_at: int) -> None:
        self.record(delivered_at - injected_at)

    @property
    def mean(self) -> float | None:
        return self.total / self.count if self.count else None

    def percentile(self, q: float) -> float | None:
        """``q`` in [0, 100]. Nearest-rank on exact samples when kept."""
        if not self.count:
            return None
        if not 0 <= q <= 100:
            raise ValueError("percentile must be in [0, 100]")
        rank = max(1, math.ceil(q / 100 * self.count))
        if self.samples is not None:
            return float(sorted(self.samples)[rank - 1])
        if rank <= self.zeros:
            return 0.0
        seen = self.zeros
        for key in sorted(self.buckets):
            seen += self.buckets[key]
            if seen >= rank:
                # midpoint of (gamma^(k-1), gamma^k] in relative terms
                value = 2 * self.gamma ** key / (self.gamma + 1)
                return float(min(max(value, self.minimum), self.maximum))
        return float(self.maximum)

    def summary(self) -> dict:
        to_us = lambda v: None if v is None else v / US  # noqa: E731
        return {
            "count": self.count,
            "mean_us": to_us(self.mean),
            "p50_us": to_us(self.percentile(50)),
            "p95_us": to_us(self.percentile(95)),
            "p99_us": to_us(self.percentile(99)),
            "max_us": to_us(self.maximum),
        }


@dataclass
class LinkTimeline:
    link_id: int
    name: str
    intervals: list[tuple[int, int, bool]]  # (start, end, on)

    def on_time(self) -> int:
        return sum(e - s for s, e, on in self.intervals if on)

    def off_fraction(self, t_end: int) -> float:
        return 1 - self.on_time() / t_end if t_end else 0.0


def merge_on_intervals(spans: Iterable[tuple[int, int]], t_end: int) -> list[tuple[int, int, bool]]:
    """Turn a set of possibly-overlapping On spans into an exact On/Off cover of [0, t_end]."""
    merged: list[list[int]] = []
    for s, e in sorted(spans):
        s, e = max(0, s), min(t_end, e)
        if e <= s:
            continue
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    out = []
    t = 0
    for s, e in merged:
        if s > t:
            out.append((t, s, False))
        out.append((s, e, True))
        t = e
    if t < t_end:
        out.append((t, t_end, False))
    return out


def activation_histogram(timelines: Sequence[LinkTimeline], t_end: int, buckets: int = 8) -> list[float]:
    """Fraction of time the network spends with each share of its links on.

    Bucket ``i`` holds time with on-fraction in ``(i/b, (i+1)/b]``; bucket 0
    also takes the all-off instants.
    """
    hist = [0.0] * buckets
    if not timelines or t_end <= 0:
        return hist
    deltas: dict[int, int] = {}
    for tl in timelines:
        for s, e, on in tl.intervals:
            if on:
                deltas[s] = deltas.get(s, 0) + 1
                deltas[e] = deltas.get(e, 0) - 1
    n = len(timelines)
    level = 0
    t_prev = 0
    for t in sorted(deltas) + [t_end]:
        if t > t_prev:
            frac = level / n
            idx = 0 if frac == 0 else min(buckets - 1, math.ceil(frac * buckets) - 1)
            hist[idx] += (min(t, t_end) - t_prev) / t_end
            t_prev = min(t, t_end)
        level += deltas.get(t, 0)
    return hist


def link_off_fraction(timelines: Sequence[LinkTimeline], t_end: int, threshold: float = 0.5) -> float:
    """Share of links that are off for at least ``threshold`` of the run."""
    if not timelines:
        return 0.0
    return sum(1 for tl in timelines if tl.off_fraction(t_end) >= threshold) / len(timelines)


class ReportMismatch(ValueError):
    pass


@dataclass
class SavingsReport:
    energy_gated: float
    energy_baseline: float
    savings: float
    latency_gated_us: float | None
    latency_baseline_us: float | None
    latency_overhead: float | None
    activation_histogram: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "energy_gated_j": self.energy_gated,
            "energy_baseline_j": self.energy_baseline,
            "transceiver_savings": self.savings,
            "latency_gated_us": self.latency_gated_us,
            "latency_baseline_us": self.latency_baseline_us,
            "latency_overhead": self.latency_overhead,
            "activation_histogram": self.activation_histogram,
        }


def savings(energy_gated: float, energy_baseline: float) -> float:
    if energy_baseline <= 0:
        raise ValueError("baseline energy must be positive")
    return 1 - energy_gated / energy_baseline


def savings_report(gated, baseline) -> SavingsReport:
    """Compare two :class:`~lcdcsim.network.RunResult` objects of one workload."""
    if gated.workload_key != baseline.workload_key:
        raise ReportMismatch("gated and baseline runs used different workloads, seeds or durations")
    mg = gated.latency.mean
    mb = baseline.latency.mean
    overhead = (mg / mb - 1) if (mg is not None and mb) else None
    return SavingsReport(
        energy_gated=gated.energy_managed,
        energy_baseline=baseline.energy_managed,
        savings=savings(gated.energy_managed, baseline.energy_managed),
        latency_gated_us=None if mg is None else mg / US,
        latency_baseline_us=None if mb is None else mb / US,
        latency_overhead=overhead,
        activation_histogram=gated.activation_histogram,
    )
