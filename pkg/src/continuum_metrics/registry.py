"""Named scalar metrics over traces, with units and declared inputs.

Every registered metric declares its unit, a version, and the set of
trace fields it reads; the quality experiments rely on those
declarations being complete. A metric returns None when the trace
cannot support it (no records of the right kind), never NaN.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

from . import classic_metrics as classic
from . import novel_metrics as novel
from .telemetry import Trace


@dataclass(frozen=True)
class MetricSpec:
    """One registry entry: the computation plus its metadata."""

    name: str
    fn: Callable[..., float | None]
    unit: str
    input_fields: frozenset[str]
    description: str
    version: str = "1"
    # default perturbation used by sensitivity experiments
    probe_field: str | None = None
    probe_delta: float = 0.0

    def fingerprint(self) -> str:
        """Hash of the metric definition; changes when the definition does."""
        payload = "|".join([self.name, self.unit, self.version,
                            ",".join(sorted(self.input_fields))])
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class MetricRegistry:
    """Mutable name -> MetricSpec mapping with copy-on-write semantics."""

    def __init__(self, specs: Mapping[str, MetricSpec] | None = None):
        self._specs: dict[str, MetricSpec] = dict(specs or {})

    def register(self, spec: MetricSpec, overwrite: bool = False) -> None:
        if spec.name in self._specs and not overwrite:
            raise ValueError(f"metric {spec.name!r} already registered")
        self._specs[spec.name] = spec

    def get(self, name: str) -> MetricSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise ValueError(f"unknown metric {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._specs)

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def evaluate(self, name: str, trace: Trace, **params) -> float | None:
        return self.get(name).fn(trace, **params)

    def copy(self) -> "MetricRegistry":
        return MetricRegistry(self._specs)


# --------------------------------------------------------------------------
# built-in metrics


def _fleet_utilization(trace: Trace, resource: str) -> float | None:
    if not trace.node_samples:
        return None
    return classic.utilization(trace.node_samples, resource).fleet


def _energy_total(trace: Trace) -> float | None:
    if not trace.node_samples:
        return None
    return math.fsum(s.energy_j for s in trace.node_samples)


def _fleet_power(trace: Trace) -> float | None:
    if not trace.node_samples:
        return None
    return classic.energy_summary(trace.node_samples).fleet_mean_power_w


def _max_concurrency(trace: Trace) -> float | None:
    if not trace.requests:
        return None
    return float(classic.max_concurrency(trace.requests))


def _response(trace: Trace, field_name: str) -> float | None:
    if not trace.requests:
        return None
    return getattr(classic.response_stats(trace.requests), field_name)


def _latency(trace: Trace, pct: float | None) -> float | None:
    lat = [s.latency_ms for s in trace.net_samples]
    if not lat:
        return None
    if pct is None:
        return math.fsum(lat) / len(lat)
    return classic.percentile_nearest_rank(lat, pct)


def _fleet_pdr(trace: Trace) -> float | None:
    sent = sum(s.packets_sent for s in trace.net_samples)
    delivered = sum(s.packets_delivered for s in trace.net_samples)
    return delivered / sent if sent > 0 else None


def _fleet_throughput(trace: Trace) -> float | None:
    if len(trace.net_samples) < 2:
        return None
    stamps = [s.timestamp for s in trace.net_samples]
    span = max(stamps) - min(stamps)
    if span <= 0:
        return None
    return 8.0 * sum(s.bytes_delivered for s in trace.net_samples) / span


def _fairness(trace: Trace, resource: str) -> float | None:
    return novel.fairness_by_resource(trace, resource).fairness


def _carbon(trace: Trace, intensity_g_per_kwh: float = novel.DEFAULT_CARBON_INTENSITY_G_PER_KWH) -> float | None:
    if not trace.node_samples:
        return None
    total = math.fsum(s.energy_j for s in trace.node_samples)
    return novel.carbon_emissions(total, novel.CarbonConfig(intensity_g_per_kwh))


def _adaptivity(trace: Trace) -> float | None:
    if not trace.adaptations:
        return None
    return novel.adaptivity_quotient(trace.adaptations)


_NODE_CPU = frozenset({"node.node_id", "node.timestamp", "node.cpu_util"})
_NODE_MEM = frozenset({"node.node_id", "node.timestamp", "node.mem_util"})


def _builtin_specs() -> list[MetricSpec]:
    return [
        MetricSpec(
            name="fleet_mean_cpu_util",
            fn=lambda trace: _fleet_utilization(trace, "cpu"),
            unit="fraction",
            input_fields=_NODE_CPU,
            description="time-weighted mean CPU utilization averaged over nodes",
            probe_field="node.cpu_util", probe_delta=0.1,
        ),
        MetricSpec(
            name="fleet_mean_mem_util",
            fn=lambda trace: _fleet_utilization(trace, "mem"),
            unit="fraction",
            input_fields=_NODE_MEM,
            description="time-weighted mean memory utilization averaged over nodes",
            probe_field="node.mem_util", probe_delta=0.1,
        ),
        MetricSpec(
            name="fleet_busy_fraction",
            fn=lambda trace: _fleet_utilization(trace, "busy"),
            unit="fraction",
            input_fields=frozenset({"node.node_id", "node.timestamp", "node.busy_s"}),
            description="busy seconds over observed span, averaged over nodes",
            probe_field="node.busy_s", probe_delta=0.01,
        ),
        MetricSpec(
            name="energy_total_j",
            fn=_energy_total,
            unit="J",
            input_fields=frozenset({"node.energy_j"}),
            description="total energy consumed across all node samples",
            probe_field="node.energy_j", probe_delta=1.0,
        ),
        MetricSpec(
            name="fleet_mean_power_w",
            fn=_fleet_power,
            unit="W",
            input_fields=frozenset({"node.energy_j", "node.timestamp"}),
            description="total energy over the observed span",
            probe_field="node.energy_j", probe_delta=1.0,
        ),
        MetricSpec(
            name="max_concurrency",
            fn=_max_concurrency,
            unit="requests",
            input_fields=frozenset({"request.start_ts", "request.finish_ts"}),
            description="peak number of simultaneously in-service requests",
            probe_field="node.cpu_util", probe_delta=0.1,
        ),
        MetricSpec(
            name="error_rate",
            fn=lambda trace: _response(trace, "error_rate"),
            unit="fraction",
            input_fields=frozenset({"request.ok"}),
            description="fraction of requests that failed",
        ),
        MetricSpec(
            name="mean_response_s",
            fn=lambda trace: _response(trace, "mean_response_s"),
            unit="s",
            input_fields=frozenset({"request.arrival_ts", "request.finish_ts"}),
            description="mean arrival-to-finish latency",
        ),
        MetricSpec(
            name="p95_response_s",
            fn=lambda trace: _response(trace, "p95_response_s"),
            unit="s",
            input_fields=frozenset({"request.arrival_ts", "request.finish_ts"}),
            description="95th percentile response time (nearest rank)",
        ),
        MetricSpec(
            name="total_cost",
            fn=lambda trace: _response(trace, "total_cost"),
            unit="cost units",
            input_fields=frozenset({"request.cost_units"}),
            description="summed cost over all requests",
            probe_field="request.cost_units", probe_delta=1.0,
        ),
        MetricSpec(
            name="mean_latency_ms",
            fn=lambda trace: _latency(trace, None),
            unit="ms",
            input_fields=frozenset({"net.latency_ms"}),
            description="mean link latency over all network samples",
            probe_field="net.latency_ms", probe_delta=5.0,
        ),
        MetricSpec(
            name="p95_latency_ms",
            fn=lambda trace: _latency(trace, 95),
            unit="ms",
            input_fields=frozenset({"net.latency_ms"}),
            description="95th percentile link latency (nearest rank)",
            probe_field="net.latency_ms", probe_delta=5.0,
        ),
        MetricSpec(
            name="fleet_pdr",
            fn=_fleet_pdr,
            unit="fraction",
            input_fields=frozenset({"net.packets_sent", "net.packets_delivered"}),
            description="packets delivered over packets sent, all links pooled",
        ),
        MetricSpec(
            name="fleet_throughput_bps",
            fn=_fleet_throughput,
            unit="bps",
            input_fields=frozenset({"net.bytes_delivered", "net.timestamp"}),
            description="delivered bits over the observed network span",
        ),
        MetricSpec(
            name="jain_fairness_cpu",
            fn=lambda trace: _fairness(trace, "cpu"),
            unit="index",
            input_fields=_NODE_CPU,
            description="fairness of mean CPU load across nodes",
        ),
        MetricSpec(
            name="jain_fairness_energy",
            fn=lambda trace: _fairness(trace, "energy"),
            unit="index",
            input_fields=frozenset({"node.node_id", "node.energy_j"}),
            description="fairness of total energy consumption across nodes",
        ),
        MetricSpec(
            name="jain_fairness_bandwidth",
            fn=lambda trace: _fairness(trace, "bandwidth"),
            unit="index",
            input_fields=frozenset({"net.src", "net.dst", "net.bytes_delivered"}),
            description="fairness of bytes on incident links across nodes",
        ),
        MetricSpec(
            name="carbon_g",
            fn=_carbon,
            unit="g",
            input_fields=frozenset({"node.energy_j"}),
            description="grams CO2e from total energy at the configured intensity",
            probe_field="node.energy_j", probe_delta=1.0,
        ),
        MetricSpec(
            name="adaptivity_q_per_s",
            fn=_adaptivity,
            unit="1/s",
            input_fields=frozenset({
                "adaptation.p_base", "adaptation.p_post",
                "adaptation.t_adapt_s", "adaptation.polarity",
            }),
            description="mean adaptation improvement ratio per second",
        ),
    ]


def default_registry() -> MetricRegistry:
    """A fresh registry holding every built-in metric."""
    reg = MetricRegistry()
    for spec in _builtin_specs():
        reg.register(spec)
    return reg


DEFAULT_REGISTRY = default_registry()
