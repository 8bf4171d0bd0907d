import pytest
from hypothesis import given, strategies as st

from lcdcsim.metrics import (
    LatencyStats, LinkTimeline, activation_histogram, link_off_fraction, merge_on_intervals, savings,
)
from lcdcsim.units import US


def test_mean_and_empty():
    stats = LatencyStats()
    assert stats.mean is None and stats.percentile(50) is None
    stats.record(1 * US)
    stats.record(3 * US)
    assert stats.mean == 2 * US


def test_exact_median():
    stats = LatencyStats(keep_samples=True)
    for v in (1, 2, 3, 4, 5):
        stats.record(v * US)
    assert stats.percentile(50) == 3 * US


@given(st.lists(st.integers(1, 10**9), min_size=1, max_size=300), st.floats(0, 100))
def test_sketch_within_one_percent(values, q):
    sketch, exact = LatencyStats(), LatencyStats(keep_samples=True)
    for v in values:
        sketch.record(v)
        exact.record(v)
    assert sketch.percentile(q) == pytest.approx(exact.percentile(q), rel=0.0101)


def test_negative_latency_rejected():
    with pytest.raises(ValueError):
        LatencyStats().record(-1)


def test_savings_values():
    assert savings(5.0, 5.0) == 0.0
    assert savings(0.0, 5.0) == 1.0
    with pytest.raises(ValueError):
        savings(1.0, 0.0)


spans = st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 1000)), max_size=20)


@given(spans)
def test_merged_cover_is_exact(raw):
    iv = merge_on_intervals([(min(a, b), max(a, b)) for a, b in raw], 1000)
    assert iv[0][0] == 0 and iv[-1][1] == 1000
    assert all(a[1] == b[0] and a[2] != b[2] for a, b in zip(iv, iv[1:]))


@given(st.lists(spans, min_size=1, max_size=6))
def test_histogram_sums_to_one(all_spans):
    tls = [LinkTimeline(i, f"l{i}", merge_on_intervals([(min(a, b), max(a, b)) for a, b in s], 1000))
           for i, s in enumerate(all_spans)]
    hist = activation_histogram(tls, 1000)
    assert sum(hist) == pytest.approx(1.0)


def test_histogram_buckets():
    on = LinkTimeline(0, "a", [(0, 100, True)])
    off = LinkTimeline(1, "b", [(0, 100, False)])
    hist = activation_histogram([on, off], 100, buckets=2)
    assert hist == [1.0, 0.0]
    assert link_off_fraction([on, off], 100) == 0.5
