"""Computing-, network-, and application-level metrics over trace data.

Undefined quotients (0/0, empty spans) are reported as ``None`` rather
than NaN; report serialization turns them into an explicit marker.
Percentiles use the nearest-rank method, with no interpolation, so
results reproduce exactly across implementations.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .telemetry import NetSample, NodeSample, RequestRecord


@dataclass(frozen=True)
class UtilizationSummary:
    resource: str
    per_node: dict[str, float | None]
    fleet: float | None


@dataclass(frozen=True)
class NodeEnergy:
    total_j: float
    mean_power_w: float | None


@dataclass(frozen=True)
class EnergySummary:
    per_node: dict[str, NodeEnergy]
    fleet_total_j: float
    fleet_mean_power_w: float | None


@dataclass(frozen=True)
class LinkKpis:
    src: str
    dst: str
    sample_count: int
    mean_latency_ms: float
    p95_latency_ms: float
    throughput_bps: float | None
    bandwidth_util: float | None
    net_util: float | None
    pdr: float | None
    plr: float | None
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ResponseStats:
    count: int
    mean_response_s: float
    p50_response_s: float
    p95_response_s: float
    p99_response_s: float
    mean_service_s: float
    error_rate: float
    accuracy: float | None
    total_cost: float


def percentile_nearest_rank(values: Sequence[float], pct: float) -> float:
    """p-th percentile by nearest rank: the ceil(p/100 * n)-th smallest."""
    if not values:
        raise ValueError("percentile of empty sequence")
    if not 0 < pct <= 100:
        raise ValueError(f"percentile must be in (0, 100], got {pct}")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def time_weighted_mean(times: Sequence[float], values: Sequence[float]) -> float:
    """Trapezoidal time average of a sampled signal.

    A single sample (or zero span) degrades to the plain mean.
    """
    if len(times) != len(values):
        raise ValueError("times and values must have equal length")
    if not times:
        raise ValueError("empty series")
    span = times[-1] - times[0]
    if len(times) == 1 or span == 0:
        return math.fsum(values) / len(values)
    area = math.fsum(
        0.5 * (values[i] + values[i + 1]) * (times[i + 1] - times[i])
        for i in range(len(times) - 1)
    )
    return area / span


def speedup(t_baseline: float, t_parallel: float) -> float:
    """How much faster the parallel run is: t_baseline / t_parallel."""
    if t_baseline <= 0 or t_parallel <= 0:
        raise ValueError("durations must be positive")
    return t_baseline / t_parallel


def scaling_efficiency(speedups: Mapping[int, float]) -> dict[int, float]:
    """Per node count, the achieved fraction of linear scaling: S(n)/n."""
    out = {}
    for n, s in speedups.items():
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ValueError(f"node count must be an integer >= 1, got {n!r}")
        if s <= 0:
            raise ValueError(f"speedup must be positive, got {s!r}")
        out[n] = s / n
    return out


def utilization(samples: Sequence[NodeSample], resource: str) -> UtilizationSummary:
    """Per-node mean utilization of cpu, mem, or busy time, plus fleet mean.

    cpu/mem use the trapezoidal time-weighted mean of the sampled
    fraction; busy divides total busy seconds by the observed span
    (None when the span is degenerate). The fleet value is the
    unweighted mean over nodes with a defined value.
    """
    if resource not in ("cpu", "mem", "busy"):
        raise ValueError(f"resource must be cpu, mem, or busy, got {resource!r}")
    by_node: dict[str, list[NodeSample]] = defaultdict(list)
    for s in samples:
        by_node[s.node_id].append(s)
    per_node: dict[str, float | None] = {}
    for nid in sorted(by_node):
        series = sorted(by_node[nid], key=lambda s: s.timestamp)
        times = [s.timestamp for s in series]
        if resource == "busy":
            span = times[-1] - times[0]
            total = math.fsum(s.busy_s for s in series)
            per_node[nid] = total / span if span > 0 else None
        else:
            attr = "cpu_util" if resource == "cpu" else "mem_util"
            per_node[nid] = time_weighted_mean(times, [getattr(s, attr) for s in series])
    defined = [v for v in per_node.values() if v is not None]
    fleet = math.fsum(defined) / len(defined) if defined else None
    return UtilizationSummary(resource=resource, per_node=per_node, fleet=fleet)


def elasticity(provisioned: Sequence[tuple[float, float]],
               demanded: Sequence[tuple[float, float]]) -> float:
    """How closely provisioning tracked demand, in [0, 1].

    1 - sum |p - d| / sum max(p, d) over aligned points; symmetric in
    its arguments, 1 for perfect tracking, 0 for total mismatch.
    """
    if len(provisioned) != len(demanded):
        raise ValueError("series must have equal length")
    if not provisioned:
        raise ValueError("empty series")
    mismatch = 0.0
    scale = 0.0
    for (tp, p), (td, d) in zip(provisioned, demanded):
        if tp != td:
            raise ValueError(f"timestamps misaligned: {tp} vs {td}")
        if p < 0 or d < 0:
            raise ValueError("values must be non-negative")
        mismatch += abs(p - d)
        scale += max(p, d)
    if scale == 0:
        raise ValueError("series are all-zero at every point")
    return 1.0 - mismatch / scale


def availability(up_intervals: Iterable[tuple[float, float]],
                 span: tuple[float, float]) -> float:
    """Fraction of the span covered by the (normalized) up intervals."""
    t0, t1 = span
    if not t1 > t0:
        raise ValueError("span must have positive length")
    clipped = []
    for a, b in up_intervals:
        a, b = max(a, t0), min(b, t1)
        if b > a:
            clipped.append((a, b))
    clipped.sort()
    total = 0.0
    cur_a = cur_b = None
    for a, b in clipped:
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    if cur_b is not None:
        total += cur_b - cur_a
    return total / (t1 - t0)


def energy_summary(samples: Sequence[NodeSample]) -> EnergySummary:
    """Total joules and mean watts per node and fleet-wide.

    Mean power over a zero-length span is undefined (None) unless the
    total is also zero.
    """
    by_node: dict[str, list[NodeSample]] = defaultdict(list)
    for s in samples:
        by_node[s.node_id].append(s)
    per_node: dict[str, NodeEnergy] = {}
    for nid in sorted(by_node):
        series = by_node[nid]
        total = math.fsum(s.energy_j for s in series)
        span = max(s.timestamp for s in series) - min(s.timestamp for s in series)
        if span > 0:
            power = total / span
        else:
            power = 0.0 if total == 0 else None
        per_node[nid] = NodeEnergy(total_j=total, mean_power_w=power)
    fleet_total = math.fsum(e.total_j for e in per_node.values())
    if samples:
        stamps = [s.timestamp for s in samples]
        fleet_span = max(stamps) - min(stamps)
    else:
        fleet_span = 0.0
    if fleet_span > 0:
        fleet_power = fleet_total / fleet_span
    else:
        fleet_power = 0.0 if fleet_total == 0 else None
    return EnergySummary(per_node=per_node, fleet_total_j=fleet_total,
                         fleet_mean_power_w=fleet_power)


def max_concurrency(requests: Sequence[RequestRecord]) -> int:
    """Peak number of simultaneously in-service requests.

    Sweep-line over the half-open [start_ts, finish_ts) intervals;
    a finish and a start at the same instant do not overlap.
    """
    events = []
    for r in requests:
        events.append((r.start_ts, 1))
        events.append((r.finish_ts, -1))
    events.sort()  # -1 sorts before +1 at equal times: half-open intervals
    best = cur = 0
    for _, delta in events:
        cur += delta
        if cur > best:
            best = cur
    return best


def network_kpis(samples: Sequence[NetSample]) -> dict[tuple[str, str], LinkKpis]:
    """Per-link latency, throughput, utilization, and delivery rates.

    throughput_bps spreads all delivered bytes over the link's observed
    span; net_util weights per-interval rates by capacity over time.
    Both utilizations clamp at 1 with a warning, since measured
    throughput can exceed nominal capacity due to sampling.
    """
    by_link: dict[tuple[str, str], list[NetSample]] = defaultdict(list)
    for s in samples:
        by_link[(s.src, s.dst)].append(s)
    out: dict[tuple[str, str], LinkKpis] = {}
    for link in sorted(by_link):
        series = sorted(by_link[link], key=lambda s: s.timestamp)
        warnings: list[str] = []
        latencies = [s.latency_ms for s in series]
        span = series[-1].timestamp - series[0].timestamp
        total_bytes = sum(s.bytes_delivered for s in series)
        if span > 0:
            throughput = 8.0 * total_bytes / span
            mean_capacity = math.fsum(s.capacity_bps for s in series) / len(series)
            bw_util = throughput / mean_capacity
            if bw_util > 1.0:
                warnings.append(f"throughput exceeds capacity on {link[0]}->{link[1]}")
                bw_util = 1.0
        else:
            throughput = None
            bw_util = None
            warnings.append(f"zero observation span on {link[0]}->{link[1]}")
        # capacity-time weighted utilization over intervals with a predecessor
        cap_time = math.fsum(
            series[i].capacity_bps * (series[i].timestamp - series[i - 1].timestamp)
            for i in range(1, len(series))
        )
        if cap_time > 0:
            interval_bytes = sum(s.bytes_delivered for s in series[1:])
            net_util = min(8.0 * interval_bytes / cap_time, 1.0)
        else:
            net_util = None
        sent = sum(s.packets_sent for s in series)
        delivered = sum(s.packets_delivered for s in series)
        if sent > 0:
            pdr = delivered / sent
            plr = 1.0 - pdr
        else:
            pdr = plr = None
        out[link] = LinkKpis(
            src=link[0],
            dst=link[1],
            sample_count=len(series),
            mean_latency_ms=math.fsum(latencies) / len(latencies),
            p95_latency_ms=percentile_nearest_rank(latencies, 95),
            throughput_bps=throughput,
            bandwidth_util=bw_util,
            net_util=net_util,
            pdr=pdr,
            plr=plr,
            warnings=tuple(warnings),
        )
    return out


def response_stats(requests: Sequence[RequestRecord]) -> ResponseStats:
    """Response/service time summary plus error rate, accuracy, and cost.

    Response time runs from arrival to finish (queuing included),
    service time from start to finish. Accuracy is the correct fraction
    of ok requests that carry a correct flag, None when no request
    does.
    """
    if not requests:
        raise ValueError("response_stats requires at least one request")
    responses = [r.finish_ts - r.arrival_ts for r in requests]
    services = [r.finish_ts - r.start_ts for r in requests]
    failed = sum(1 for r in requests if not r.ok)
    graded = [r for r in requests if r.ok and r.correct is not None]
    if any(r.correct is not None for r in requests) and graded:
        accuracy = sum(1 for r in graded if r.correct) / len(graded)
    else:
        accuracy = None
    return ResponseStats(
        count=len(requests),
        mean_response_s=math.fsum(responses) / len(responses),
        p50_response_s=percentile_nearest_rank(responses, 50),
        p95_response_s=percentile_nearest_rank(responses, 95),
        p99_response_s=percentile_nearest_rank(responses, 99),
        mean_service_s=math.fsum(services) / len(services),
        error_rate=failed / len(requests),
        accuracy=accuracy,
        total_cost=math.fsum(r.cost_units for r in requests),
    )
