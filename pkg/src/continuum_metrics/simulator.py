"""Seeded synthetic trace generator with planted ground truth.

Generates cloud/edge/iot node fleets whose CPU series follow a vector
autoregression over the configured causal edges, temperatures that
relax exponentially toward ambient with a utilization heat-injection
term, link samples consistent with the load, and seeded request
streams. Every random draw comes from a generator derived from the
master seed and a stream name, so adding a stream never perturbs the
existing ones and a fixed config always yields byte-identical traces.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .novel_metrics import ThermalParams, jain_fairness
from .telemetry import AdaptationEvent, NetSample, NodeSample, RequestRecord, Trace

SIM_EPOCH = "2025-01-01T00:00:00Z"

_TIER_ORDER = ("cloud", "edge", "iot")
_ADJACENT_TIERS = (("cloud", "edge"), ("edge", "iot"))

_DEFAULT_THERMAL = {
    "cloud": ThermalParams(t0_c=60.0, te_c=22.0, k=0.05),
    "edge": ThermalParams(t0_c=50.0, te_c=25.0, k=0.08),
    "iot": ThermalParams(t0_c=40.0, te_c=27.0, k=0.10),
}

_DEFAULT_POWER = {
    "cloud": (120.0, 180.0),  # (idle watts, extra watts at full utilization)
    "edge": (15.0, 25.0),
    "iot": (1.0, 3.0),
}


@dataclass(frozen=True)
class CausalEdge:
    """Planted influence: src drives dst with the given coefficient and
    lag (in sample periods). Node indices are 1-based positions in the
    trace's node_ids order."""

    src: int
    dst: int
    coefficient: float
    lag: int


@dataclass(frozen=True)
class NetConfig:
    capacity_bps: float = 1e8
    base_latency_ms: Mapping[str, float] = field(
        default_factory=lambda: {"cloud-edge": 20.0, "edge-iot": 5.0})
    loss_rate: float = 0.01
    bytes_per_util_s: float = 1e5
    packet_bytes: int = 1200


@dataclass(frozen=True)
class RequestConfig:
    rate_per_s: float = 2.0
    queue_mean_s: float = 0.05
    service_mean_s: float = 0.2
    error_rate: float = 0.02
    incorrect_rate: float = 0.01
    cost_per_service_s: float = 1.0


@dataclass(frozen=True)
class SimConfig:
    """Everything the generator needs; a fixed config fixes the trace."""

    seed: int
    duration_s: float = 60.0
    sample_period_s: float = 1.0
    tiers: Mapping[str, int] = field(
        default_factory=lambda: {"cloud": 1, "edge": 2, "iot": 5})
    base_load: float = 0.4
    load_skew: float = 0.0
    causal_edges: tuple[CausalEdge, ...] = ()
    thermal: Mapping[str, ThermalParams] = field(
        default_factory=lambda: dict(_DEFAULT_THERMAL))
    heat_injection_c_per_s: float = 0.0
    noise_std: Mapping[str, float] = field(
        default_factory=lambda: {"cpu": 0.02, "mem": 0.02, "temperature": 0.0,
                                 "latency_ms": 1.0})
    adaptation_plan: tuple[AdaptationEvent, ...] = ()
    net: NetConfig = field(default_factory=NetConfig)
    requests: RequestConfig = field(default_factory=RequestConfig)
    power_w: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(_DEFAULT_POWER))


@dataclass(frozen=True)
class GroundTruth:
    """Machine-readable planted answers for a config."""

    node_ids: tuple[str, ...]
    planted_edges: tuple[dict, ...]
    load_skew: float
    base_load: float
    expected_cpu_fairness_band: tuple[float, float]
    thermal: dict[str, dict[str, float]]
    heat_injection_c_per_s: float

    def to_dict(self) -> dict:
        return {
            "node_ids": list(self.node_ids),
            "planted_edges": [dict(e) for e in self.planted_edges],
            "load_skew": self.load_skew,
            "base_load": self.base_load,
            "expected_cpu_fairness_band": list(self.expected_cpu_fairness_band),
            "thermal": self.thermal,
            "heat_injection_c_per_s": self.heat_injection_c_per_s,
        }


def _validate(config: SimConfig) -> None:
    total_nodes = sum(int(config.tiers.get(t, 0)) for t in _TIER_ORDER)
    if total_nodes < 1:
        raise ValueError("tier counts must total at least 1 node")
    if any(int(config.tiers.get(t, 0)) < 0 for t in _TIER_ORDER):
        raise ValueError("tier counts must be non-negative")
    if config.sample_period_s <= 0:
        raise ValueError("sample_period_s must be positive")
    if config.duration_s < 2 * config.sample_period_s:
        raise ValueError("duration_s must cover at least two sample periods")
    if not 0.0 <= config.base_load <= 1.0:
        raise ValueError("base_load must lie in [0, 1]")
    if config.load_skew < 0:
        raise ValueError("load_skew must be non-negative")
    for edge in config.causal_edges:
        if not (1 <= edge.src <= total_nodes and 1 <= edge.dst <= total_nodes):
            raise ValueError(f"edge {edge} references a node index outside 1..{total_nodes}")
        if edge.src == edge.dst:
            raise ValueError(f"edge {edge} is a self-loop")
        if edge.lag < 1:
            raise ValueError(f"edge {edge} needs lag >= 1")
    for tier in config.tiers:
        if tier not in _TIER_ORDER:
            raise ValueError(f"unknown tier {tier!r}")
        if config.tiers[tier] > 0 and tier not in config.thermal:
            raise ValueError(f"no thermal parameters for tier {tier!r}")
    for name, std in config.noise_std.items():
        if std < 0:
            raise ValueError(f"noise_std[{name!r}] must be non-negative")
    if not 0.0 <= config.net.loss_rate <= 1.0:
        raise ValueError("net.loss_rate must lie in [0, 1]")


def node_names(config: SimConfig) -> tuple[str, ...]:
    names = []
    for tier in _TIER_ORDER:
        for i in range(int(config.tiers.get(tier, 0))):
            names.append(f"{tier}-{i}")
    return tuple(names)


def _zipf_weights(n: int, skew: float) -> np.ndarray:
    # rank 1 gets weight 1; skew 0 is uniform
    return np.arange(1, n + 1, dtype=float) ** (-skew)


def _stream_rng(seed: int, name: str) -> np.random.Generator:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "big") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([seed & (2 ** 64 - 1), *words]))


def simulate(config: SimConfig) -> Trace:
    """Generate a complete, valid trace for the config (deterministic)."""
    _validate(config)
    names = node_names(config)
    n_nodes = len(names)
    tiers = [name.rsplit("-", 1)[0] for name in names]
    period = float(config.sample_period_s)
    n_steps = int(round(config.duration_s / period))
    times = [i * period for i in range(n_steps)]

    weights = _zipf_weights(n_nodes, config.load_skew)
    base = np.clip(config.base_load * weights, 0.0, 1.0)

    # CPU deviations follow the planted vector autoregression; the
    # recursion runs on unclamped deviations so clamping (rare when
    # base <= 0.5 and coefficients <= 0.9) cannot distort the coupling.
    cpu_noise = np.column_stack([
        _stream_rng(config.seed, f"cpu:{name}").normal(
            0.0, config.noise_std.get("cpu", 0.0), n_steps)
        for name in names
    ]) if n_steps else np.zeros((0, n_nodes))
    dev = np.zeros((n_steps, n_nodes))
    for t in range(n_steps):
        dev[t] = cpu_noise[t]
        for edge in config.causal_edges:
            if t - edge.lag >= 0:
                dev[t, edge.dst - 1] += edge.coefficient * dev[t - edge.lag, edge.src - 1]
    cpu = np.clip(base[None, :] + dev, 0.0, 1.0)

    mem_noise = np.column_stack([
        _stream_rng(config.seed, f"mem:{name}").normal(
            0.0, config.noise_std.get("mem", 0.0), n_steps)
        for name in names
    ]) if n_steps else np.zeros((0, n_nodes))
    mem = np.clip(0.25 + 0.5 * cpu + mem_noise, 0.0, 1.0)

    temp_noise = {
        name: _stream_rng(config.seed, f"temperature:{name}").normal(
            0.0, config.noise_std.get("temperature", 0.0), n_steps)
        for name in names
    }

    node_samples: list[NodeSample] = []
    for j, name in enumerate(names):
        tier = tiers[j]
        thermal = config.thermal[tier]
        idle_w, util_w = config.power_w.get(tier, (10.0, 20.0))
        decay = math.exp(-thermal.k * period)
        t_state = thermal.t0_c
        for t in range(n_steps):
            u = float(cpu[t, j])
            if t == 0:
                energy = 0.0
                busy = 0.0
            else:
                energy = (idle_w + util_w * u) * period
                busy = u * period
                t_state = (thermal.te_c + (t_state - thermal.te_c) * decay
                           + config.heat_injection_c_per_s * u * period)
            node_samples.append(NodeSample(
                node_id=name,
                timestamp=times[t],
                tier=tier,
                cpu_util=u,
                mem_util=float(mem[t, j]),
                energy_j=energy,
                busy_s=busy,
                temperature_c=t_state + float(temp_noise[name][t]),
            ))
    node_samples.sort(key=lambda s: s.timestamp)

    # full mesh between adjacent tiers, sampled both directions
    index = {name: i for i, name in enumerate(names)}
    links: list[tuple[str, str, float]] = []
    for upper, lower in _ADJACENT_TIERS:
        base_lat = config.net.base_latency_ms.get(f"{upper}-{lower}", 10.0)
        uppers = [n for n, t in zip(names, tiers) if t == upper]
        lowers = [n for n, t in zip(names, tiers) if t == lower]
        for a in uppers:
            for b in lowers:
                links.append((a, b, base_lat))
                links.append((b, a, base_lat))

    net_samples: list[NetSample] = []
    for src, dst, base_lat in links:
        rng = _stream_rng(config.seed, f"net:{src}->{dst}")
        lat_noise = rng.normal(0.0, config.noise_std.get("latency_ms", 0.0), n_steps)
        u_src = cpu[:, index[src]]
        for t in range(n_steps):
            if t == 0:
                n_bytes = 0
            else:
                n_bytes = int(config.net.bytes_per_util_s * float(u_src[t]) * period)
            sent = 0 if n_bytes == 0 else n_bytes // config.net.packet_bytes + 1
            delivered = int(rng.binomial(sent, 1.0 - config.net.loss_rate)) if sent else 0
            net_samples.append(NetSample(
                src=src,
                dst=dst,
                timestamp=times[t],
                latency_ms=max(0.1, base_lat + float(lat_noise[t])),
                capacity_bps=config.net.capacity_bps,
                bytes_delivered=n_bytes,
                packets_sent=sent,
                packets_delivered=delivered,
            ))
    net_samples.sort(key=lambda s: s.timestamp)

    requests: list[RequestRecord] = []
    req = config.requests
    if req.rate_per_s > 0:
        rng = _stream_rng(config.seed, "requests")
        t_arrival = 0.0
        i = 0
        while True:
            t_arrival += float(rng.exponential(1.0 / req.rate_per_s))
            if t_arrival >= config.duration_s:
                break
            queue = float(rng.exponential(req.queue_mean_s))
            service = float(rng.exponential(req.service_mean_s))
            ok = bool(rng.random() >= req.error_rate)
            correct = bool(rng.random() >= req.incorrect_rate) if ok else None
            requests.append(RequestRecord(
                request_id=f"req-{i:06d}",
                arrival_ts=t_arrival,
                start_ts=t_arrival + queue,
                finish_ts=t_arrival + queue + service,
                ok=ok,
                correct=correct,
                cost_units=service * req.cost_per_service_s,
            ))
            i += 1

    return Trace(
        epoch=SIM_EPOCH,
        node_samples=tuple(node_samples),
        net_samples=tuple(net_samples),
        requests=tuple(requests),
        adaptations=tuple(config.adaptation_plan),
        node_ids=names,
    )


def describe_ground_truth(config: SimConfig) -> GroundTruth:
    """The planted answers an analysis of the trace should recover.

    Pure function of the config. The uniform-load fairness band is
    frozen at [0.99, 1.0]; skewed bands come from the planted weight
    vector (fairness is scale invariant) widened by +-0.05.
    """
    _validate(config)
    names = node_names(config)
    edges = tuple(
        {
            "src": e.src,
            "dst": e.dst,
            "src_node": names[e.src - 1],
            "dst_node": names[e.dst - 1],
            "coefficient": e.coefficient,
            "lag": e.lag,
        }
        for e in config.causal_edges
    )
    if config.load_skew == 0:
        band = (0.99, 1.0)
    else:
        f_planted = jain_fairness(_zipf_weights(len(names), config.load_skew))
        band = (max(0.0, f_planted - 0.05), min(1.0, f_planted + 0.05))
    thermal = {
        tier: {"t0_c": p.t0_c, "te_c": p.te_c, "k": p.k}
        for tier, p in config.thermal.items()
        if int(config.tiers.get(tier, 0)) > 0
    }
    return GroundTruth(
        node_ids=names,
        planted_edges=edges,
        load_skew=config.load_skew,
        base_load=config.base_load,
        expected_cpu_fairness_band=band,
        thermal=thermal,
        heat_injection_c_per_s=config.heat_injection_c_per_s,
    )


# --------------------------------------------------------------------------
# JSON config plumbing


def config_from_dict(obj: dict) -> SimConfig:
    """Build a SimConfig from parsed JSON (see README for the schema)."""
    if not isinstance(obj, dict):
        raise ValueError("simulator config must be a JSON object")
    known = {
        "seed", "duration_s", "sample_period_s", "tiers", "base_load",
        "load_skew", "causal_edges", "thermal", "heat_injection_c_per_s",
        "noise_std", "adaptation_plan", "net", "requests", "power_w",
    }
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown simulator config keys: {sorted(unknown)}")
    if "seed" not in obj:
        raise ValueError("simulator config requires a seed")
    kwargs: dict = {"seed": int(obj["seed"])}
    for key in ("duration_s", "sample_period_s", "base_load", "load_skew",
                "heat_injection_c_per_s"):
        if key in obj:
            kwargs[key] = float(obj[key])
    if "tiers" in obj:
        kwargs["tiers"] = {k: int(v) for k, v in obj["tiers"].items()}
    if "causal_edges" in obj:
        edges = []
        for entry in obj["causal_edges"]:
            if isinstance(entry, dict):
                edges.append(CausalEdge(int(entry["src"]), int(entry["dst"]),
                                        float(entry["coefficient"]), int(entry["lag"])))
            else:
                src, dst, coeff, lag = entry
                edges.append(CausalEdge(int(src), int(dst), float(coeff), int(lag)))
        kwargs["causal_edges"] = tuple(edges)
    if "thermal" in obj:
        kwargs["thermal"] = {
            tier: ThermalParams(t0_c=float(p["t0_c"]), te_c=float(p["te_c"]), k=float(p["k"]))
            for tier, p in obj["thermal"].items()
        }
    if "noise_std" in obj:
        kwargs["noise_std"] = {k: float(v) for k, v in obj["noise_std"].items()}
    if "adaptation_plan" in obj:
        kwargs["adaptation_plan"] = tuple(
            AdaptationEvent(
                event_id=str(e["event_id"]),
                p_base=float(e["p_base"]),
                p_post=float(e["p_post"]),
                t_adapt_s=float(e["t_adapt_s"]),
                polarity=str(e["polarity"]),
            )
            for e in obj["adaptation_plan"]
        )
    if "net" in obj:
        kwargs["net"] = NetConfig(**obj["net"])
    if "requests" in obj:
        kwargs["requests"] = RequestConfig(**obj["requests"])
    if "power_w" in obj:
        kwargs["power_w"] = {k: (float(v[0]), float(v[1])) for k, v in obj["power_w"].items()}
    return SimConfig(**kwargs)


def load_sim_config(source) -> SimConfig:
    if isinstance(source, dict):
        return config_from_dict(source)
    if isinstance(source, (str, Path)):
        return config_from_dict(json.loads(Path(source).read_text(encoding="utf-8")))
    data = source.read()
    return config_from_dict(json.loads(
        data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data))
