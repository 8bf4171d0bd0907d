"""Flow synthesis from empirical CDFs, trace loading and CDF fidelity checks.

Shipped CDFs live in ``data/cdfs/<profile>.size`` (bytes) and
``<profile>.interval`` (seconds). They are digitized approximations of
published measurement plots; drop in better point lists with the same
format to replace them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .server import FlowSpec
from .topology import Topology
from .units import S, seconds


class CdfError(ValueError):
    pass


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalCdf:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.probs) or len(self.values) < 1:
            raise CdfError("a CDF needs matching, non-empty value and probability lists")
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise CdfError("CDF values must be non-decreasing")
        if any(b < a for a, b in zip(self.probs, self.probs[1:])):
            raise CdfError("CDF probabilities must be non-decreasing")
        if self.probs[0] < 0 or abs(self.probs[-1] - 1.0) > 1e-12:
            raise CdfError("CDF probabilities must lie in [0, 1] and end at 1")

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]]) -> "EmpiricalCdf":
        return cls(tuple(float(v) for v, _ in points), tuple(float(p) for _, p in points))

    @property
    def lo(self) -> float:
        return self.values[0]

    @property
    def hi(self) -> float:
        return self.values[-1]

    def evaluate(self, x) -> np.ndarray:
        """Cumulative probability at ``x`` (piecewise linear between points)."""
        return np.interp(x, self.values, self.probs, left=0.0, right=1.0)

    def mean(self) -> float:
        """Mean of the piecewise-linear quantile function (exact)."""
        v = np.asarray(self.values)
        p = np.asarray(self.probs)
        # probability mass below the first point sits at the minimum
        total = p[0] * v[0]
        total += float(np.sum(np.diff(p) * (v[:-1] + v[1:]) / 2))
        return total


def parse_cdf(text: str, name: str = "<cdf>") -> EmpiricalCdf:
    points = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise CdfError(f"{name}:{lineno}: expected 'value probability', got {raw!r}")
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise CdfError(f"{name}:{lineno}: not a number in {raw!r}") from None
    return EmpiricalCdf.from_points(points)


def load_cdf(path) -> EmpiricalCdf:
    path = Path(path)
    return parse_cdf(path.read_text(), str(path))


def shipped_cdf(profile: str, quantity: str) -> EmpiricalCdf:
    ref = resources.files("lcdcsim") / "data" / "cdfs" / f"{profile}.{quantity}"
    return parse_cdf(ref.read_text(), f"{profile}.{quantity}")


def sample_cdf(cdf: EmpiricalCdf, u):
    """Inverse-transform sample(s): linear interpolation between CDF points."""
    probs = np.asarray(cdf.probs)
    values = np.asarray(cdf.values)
    # collapse flat steps so np.interp sees strictly increasing abscissae
    keep = np.concatenate(([True], np.diff(probs) > 0))
    out = np.interp(u, probs[keep], values[keep])
    return out


def empirical_cdf(samples, grid) -> np.ndarray:
    s = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(s, grid, side="right") / len(s)


def pearson_r(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("pearson_r needs two equal-length vectors")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(np.dot(da, da))
    nb = np.sqrt(np.dot(db, db))
    if na == 0 or nb == 0:
        raise ValueError("pearson_r undefined for a zero-variance vector")
    return float(np.dot(da, db) / (na * nb))


def fidelity(cdf: EmpiricalCdf, samples, points: int = 400) -> float:
    """Pearson r between the sample ECDF and ``cdf`` on a log-spaced grid."""
    lo, hi = cdf.lo, cdf.hi
    if lo > 0:
        grid = np.geomspace(lo, hi, points)
    else:
        grid = np.linspace(lo, hi, points)
    return pearson_r(empirical_cdf(samples, grid), cdf.evaluate(grid))


LOCALITY = {
    "fb-web": (0.1, 0.5, 0.4),
    "fb-cache": (0.05, 0.7, 0.25),
    "fb-hadoop": (0.6, 0.3, 0.1),
    "ms-dc": (0.5, 0.4, 0.1),
}
PROFILES = tuple(LOCALITY)


@dataclass
class WorkloadProfile:
    name: str
    flow_size_cdf: EmpiricalCdf
    flow_interval_cdf: EmpiricalCdf
    locality: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self) -> None:
        if len(self.locality) != 3 or any(p < 0 for p in self.locality):
            raise ValueError("locality is three non-negative probabilities")
        if abs(sum(self.locality) - 1.0) > 1e-9:
            raise ValueError(f"locality probabilities must sum to 1, got {sum(self.locality)}")


def profile(name: str, locality: tuple[float, float, float] | None = None) -> WorkloadProfile:
    if name not in LOCALITY:
        raise ValueError(f"unknown workload profile {name!r}; choose from {', '.join(PROFILES)}")
    return WorkloadProfile(
        name, shipped_cdf(name, "size"), shipped_cdf(name, "interval"),
        tuple(locality) if locality is not None else LOCALITY[name],
    )


def interval_scale(prof: WorkloadProfile, load: float, server_bw: float) -> float:
    """Factor applied to sampled intervals so each server offers ``load`` of its link."""
    if not 0 < load:
        raise ValueError("offered load must be positive")
    return prof.flow_size_cdf.mean() * 8 / (load * server_bw * prof.flow_interval_cdf.mean())


class DestinationPicker:
    """Draws a destination for ``src`` by locality scope, uniformly inside the scope.

    A scope with no candidates (a one-server rack, a one-rack cluster, a
    one-cluster site) falls back to the next wider scope that has any.
    """

    def __init__(self, topo: Topology) -> None:
        cfg = topo.config
        self.n = len(topo.servers)
        self.spr = cfg.servers_per_rack
        self.rpc = cfg.rsw_per_cluster
        self.per_cluster = self.spr * self.rpc

    def pick(self, src: int, scope: int, u: float) -> int:
        spr, pc, n = self.spr, self.per_cluster, self.n
        rack0 = src - src % spr
        clus0 = src - src % pc
        sizes = (spr - 1, pc - spr, n - pc)
        while scope < 3 and sizes[scope] == 0:
            scope += 1
        if scope == 3:
            scope = next(i for i in range(3) if sizes[i] > 0)
        k = min(int(u * sizes[scope]), sizes[scope] - 1)
        if scope == 0:
            dst = rack0 + k
            return dst + 1 if dst >= src else dst
        if scope == 1:
            dst = clus0 + k
            return dst + spr if dst >= rack0 else dst
        dst = k
        return dst + pc if dst >= clus0 else dst


def generate(prof: WorkloadProfile, topo: Topology, duration: int, rng: np.random.Generator,
             load: float = 0.3, server_bw: float | None = None) -> list[FlowSpec]:
    """Flows from every server over ``[0, duration)``, sorted by (arrival, src).

    Each server runs an independent renewal process whose first arrival is a
    uniformly random phase within one interval draw.
    """
    if duration <= 0 or len(topo.servers) < 2:
        return []
    bw = server_bw if server_bw is not None else topo.config.server_bw
    scale = interval_scale(prof, load, bw)
    picker = DestinationPicker(topo)
    cum = np.cumsum(prof.locality)
    horizon = duration / S
    flows: list[FlowSpec] = []
    for src in range(len(topo.servers)):
        t = float(rng.uniform()) * float(sample_cdf(prof.flow_interval_cdf, rng.uniform())) * scale
        batch = 64
        while t < horizon:
            gaps = sample_cdf(prof.flow_interval_cdf, rng.uniform(size=batch)) * scale
            sizes = sample_cdf(prof.flow_size_cdf, rng.uniform(size=batch))
            scopes = np.searchsorted(cum, rng.uniform(size=batch), side="right")
            picks = rng.uniform(size=batch)
            for i in range(batch):
                if t >= horizon:
                    break
                size = max(1, int(round(sizes[i])))
                dst = picker.pick(src, int(min(scopes[i], 2)), float(picks[i]))
                flows.append(FlowSpec(topo.servers[src], topo.servers[dst], size, seconds(t)))
                t += float(gaps[i])
            batch = min(batch * 2, 4096)
    flows.sort(key=lambda f: (f.arrival, f.src))
    return flows


def iter_flows(flows: Sequence[FlowSpec]) -> Iterator[FlowSpec]:
    yield from flows


def _host_id(token: str, n: int) -> int:
    digest = hashlib.blake2b(token.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") % n


@dataclass
class TraceReport:
    flows: list[FlowSpec] = field(default_factory=list)
    malformed: list[tuple[int, str]] = field(default_factory=list)
    skipped_self: int = 0


def parse_trace(lines, topo: Topology, max_bad_fraction: float = 0.01) -> TraceReport:
    """Parse ``arrival_seconds src dst size`` records onto the simulated servers.

    Endpoints are hashed into the server id space; a record whose endpoints
    collide on one server is shifted to the next server.
    """
    n = len(topo.servers)
    report = TraceReport()
    total = 0
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        total += 1
        parts = line.split()
        try:
            if len(parts) != 4:
                raise ValueError("expected 4 fields")
            arrival = float(parts[0])
            size = int(parts[3])
            if arrival < 0 or size < 1:
                raise ValueError("negative time or empty flow")
        except ValueError as exc:
            report.malformed.append((lineno, f"{exc}: {raw.strip()!r}"))
            continue
        src = _host_id(parts[1], n)
        dst = _host_id(parts[2], n)
        if src == dst:
            if parts[1] == parts[2]:
                report.skipped_self += 1
                continue
            dst = (dst + 1) % n
        report.flows.append(FlowSpec(topo.servers[src], topo.servers[dst], size, seconds(arrival)))
    if total and len(report.malformed) > max_bad_fraction * total:
        shown = "; ".join(f"line {ln}: {msg}" for ln, msg in report.malformed[:5])
        raise TraceError(f"{len(report.malformed)} of {total} records malformed ({shown})")
    report.flows.sort(key=lambda f: (f.arrival, f.src))
    return report


def load_trace(path, topo: Topology) -> list[FlowSpec]:
    with open(path) as fh:
        return parse_trace(fh, topo).flows


def shipped_trace_path() -> Path:
    return Path(str(resources.files("lcdcsim") / "data" / "traces" / "univ-sample.trace"))
