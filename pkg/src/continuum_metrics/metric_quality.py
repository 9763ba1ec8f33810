"""Executable metric-selection experiments: sensitivity, repeatability,
consistency, and independence.

Each experiment perturbs or re-runs a registry metric on a trace and
records the parameters it used, so a quality report is reproducible.
Understandability-style criteria are not computable; those live in the
registry metadata (description strings) instead of a score.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import IndependenceDeclarationError
from .registry import DEFAULT_REGISTRY, MetricRegistry, MetricSpec
from .telemetry import Trace


@dataclass(frozen=True)
class MetricHandle:
    """A registry metric plus the parameters to call it with."""

    name: str
    parameters: Mapping[str, float] = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "parameters", dict(self.parameters or {}))


@dataclass(frozen=True)
class ConsistencyResult:
    consistent: bool
    unit: str
    annotation: str | None = None


@dataclass(frozen=True)
class QualityReport:
    metric: str
    unit: str
    version: str
    sensitivity: float | None
    repeatability_cv: float
    consistency_ok: bool
    independence_delta: float
    experiment: dict


@dataclass(frozen=True)
class FieldSpec:
    """Bounds and shape of one perturbable numeric trace field."""

    kind: str
    attr: str
    lo: float | None
    hi: float | None
    integer: bool = False
    hi_attr: str | None = None   # per-record attribute giving the upper bound
    hi_gap: bool = False         # upper bound is the node's inter-sample gap


PERTURBABLE_FIELDS: dict[str, FieldSpec] = {
    "node.cpu_util": FieldSpec("node", "cpu_util", 0.0, 1.0),
    "node.mem_util": FieldSpec("node", "mem_util", 0.0, 1.0),
    "node.energy_j": FieldSpec("node", "energy_j", 0.0, None),
    "node.temperature_c": FieldSpec("node", "temperature_c", None, None),
    "node.busy_s": FieldSpec("node", "busy_s", 0.0, None, hi_gap=True),
    "net.latency_ms": FieldSpec("net", "latency_ms", 0.0, None),
    "net.capacity_bps": FieldSpec("net", "capacity_bps", 1e-9, None),
    "net.bytes_delivered": FieldSpec("net", "bytes_delivered", 0.0, None, integer=True),
    "net.packets_delivered": FieldSpec(
        "net", "packets_delivered", 0.0, None, integer=True, hi_attr="packets_sent"),
    "request.cost_units": FieldSpec("request", "cost_units", 0.0, None),
    "adaptation.p_base": FieldSpec("adaptation", "p_base", 1e-12, None),
    "adaptation.p_post": FieldSpec("adaptation", "p_post", 1e-12, None),
    "adaptation.t_adapt_s": FieldSpec("adaptation", "t_adapt_s", 1e-12, None),
}

_KIND_SEQ = {
    "node": "node_samples",
    "net": "net_samples",
    "request": "requests",
    "adaptation": "adaptations",
}


def _clamp(value: float, lo: float | None, hi: float | None) -> float:
    if lo is not None and value < lo:
        value = lo
    if hi is not None and value > hi:
        value = hi
    return value


def _rebuild(trace: Trace, field: str, transform) -> Trace:
    """Apply transform(record, per-record hi bound) to the named field."""
    spec = PERTURBABLE_FIELDS[field]
    seq_name = _KIND_SEQ[spec.kind]
    records = list(getattr(trace, seq_name))
    last_ts: dict[str, float] = {}
    new_records = []
    for record in records:
        hi = spec.hi
        if spec.hi_attr is not None:
            hi = getattr(record, spec.hi_attr)
        if spec.hi_gap:
            prev = last_ts.get(record.node_id)
            hi = (record.timestamp - prev) if prev is not None else None
            last_ts[record.node_id] = record.timestamp
        current = getattr(record, spec.attr)
        if current is None:
            new_records.append(record)
            continue
        value = _clamp(transform(current, hi), spec.lo, hi)
        if spec.integer:
            value = int(round(value))
            value = int(_clamp(value, spec.lo, hi))
        new_records.append(replace(record, **{spec.attr: value}))
    return replace(trace, **{seq_name: tuple(new_records)})


def perturb_trace(trace: Trace, field: str, delta: float) -> Trace:
    """Add delta to the field of every applicable record, re-clamped to
    the field's bounds."""
    if field not in PERTURBABLE_FIELDS:
        raise ValueError(f"unknown or non-perturbable field {field!r}")
    return _rebuild(trace, field, lambda v, hi: v + delta)


def randomize_field(trace: Trace, field: str, seed: int = 0) -> Trace:
    """Replace the field with seeded draws that respect its bounds."""
    if field not in PERTURBABLE_FIELDS:
        raise ValueError(f"unknown or non-perturbable field {field!r}")
    spec = PERTURBABLE_FIELDS[field]
    rng = np.random.default_rng(seed)

    def draw(value: float, hi: float | None) -> float:
        lo = spec.lo
        if lo is not None and hi is not None:
            return float(rng.uniform(lo, hi))
        if lo is not None:
            # unbounded above: scale and shift around the observed value
            return lo + (value - lo) * float(rng.uniform(0.5, 1.5)) + float(rng.uniform(0.0, 1.0))
        # unbounded both ways (temperatures): jitter around the observation
        return value + float(rng.uniform(-10.0, 10.0))

    return _rebuild(trace, field, draw)


def _resolve(handle, registry: MetricRegistry) -> tuple[MetricSpec, dict]:
    if isinstance(handle, str):
        handle = MetricHandle(handle)
    return registry.get(handle.name), dict(handle.parameters)


def sensitivity(handle, trace: Trace, perturbation,
                registry: MetricRegistry = DEFAULT_REGISTRY) -> float | None:
    """|m(perturbed) - m(original)| / |delta| for one field perturbation.

    Returns None (undefined) when the metric is undefined on either
    trace. ``perturbation`` is a (field, delta) pair or a mapping with
    those keys.
    """
    spec, params = _resolve(handle, registry)
    if isinstance(perturbation, Mapping):
        field, delta = perturbation["field"], perturbation["delta"]
    else:
        field, delta = perturbation
    if delta == 0:
        raise ValueError("perturbation delta must be nonzero")
    baseline = spec.fn(trace, **params)
    perturbed = spec.fn(perturb_trace(trace, field, delta), **params)
    if baseline is None or perturbed is None:
        return None
    return abs(perturbed - baseline) / abs(delta)


def repeatability(handle, trace: Trace, repeats: int = 10,
                  registry: MetricRegistry = DEFAULT_REGISTRY) -> float:
    """Coefficient of variation over repeated runs on the identical trace.

    Exactly 0 for deterministic metrics; 0/0 reports as 0.
    """
    if repeats < 2:
        raise ValueError("repeats must be >= 2")
    spec, params = _resolve(handle, registry)
    values = [spec.fn(trace, **params) for _ in range(repeats)]
    present = [v for v in values if v is not None]
    if not present:
        return 0.0
    mean = float(np.mean(present))
    std = float(np.std(present))
    if std == 0.0:
        return 0.0
    if mean == 0.0:
        return math.inf
    return std / abs(mean)


def consistency(handle, trace_a: Trace, trace_b: Trace,
                registry_a: MetricRegistry = DEFAULT_REGISTRY,
                registry_b: MetricRegistry | None = None) -> ConsistencyResult:
    """Same declared unit and definition fingerprint on both traces.

    Evaluates the metric on both traces only to annotate undefined
    results; undefined values do not break consistency.
    """
    registry_b = registry_b if registry_b is not None else registry_a
    spec_a, params = _resolve(handle, registry_a)
    spec_b, _ = _resolve(handle, registry_b)
    consistent = spec_a.unit == spec_b.unit and spec_a.fingerprint() == spec_b.fingerprint()
    notes = []
    if spec_a.fn(trace_a, **params) is None:
        notes.append("undefined on trace_a")
    if spec_b.fn(trace_b, **params) is None:
        notes.append("undefined on trace_b")
    return ConsistencyResult(
        consistent=consistent,
        unit=spec_a.unit,
        annotation="; ".join(notes) if notes else None,
    )


def independence(handle, trace: Trace, irrelevant_field: str, seed: int = 0,
                 registry: MetricRegistry = DEFAULT_REGISTRY) -> float:
    """Randomize a declared-irrelevant field and require the metric not
    to move.

    Raises when the field is in the metric's declared input set, or
    when the metric does move (the declaration is wrong either way).
    Returns the delta, which is 0 when the declaration holds.
    """
    spec, params = _resolve(handle, registry)
    if irrelevant_field not in PERTURBABLE_FIELDS:
        raise ValueError(f"unknown or non-perturbable field {irrelevant_field!r}")
    if irrelevant_field in spec.input_fields:
        raise IndependenceDeclarationError(
            f"{irrelevant_field} is a declared input of {spec.name}; "
            "cannot be tested for independence")
    baseline = spec.fn(trace, **params)
    shuffled = spec.fn(randomize_field(trace, irrelevant_field, seed), **params)
    if baseline is None and shuffled is None:
        return 0.0
    if baseline is None or shuffled is None:
        raise IndependenceDeclarationError(
            f"{spec.name} flipped between defined and undefined when "
            f"{irrelevant_field} was randomized")
    delta = abs(shuffled - baseline)
    if delta != 0.0:
        raise IndependenceDeclarationError(
            f"{spec.name} moved by {delta} when {irrelevant_field} was randomized "
            "despite declaring independence")
    return delta


def independent_fields(spec: MetricSpec) -> list[str]:
    """All perturbable numeric fields outside the metric's declared inputs."""
    return [f for f in PERTURBABLE_FIELDS if f not in spec.input_fields]


def quality_report(handle, trace: Trace,
                   registry: MetricRegistry = DEFAULT_REGISTRY,
                   repeats: int = 3, seed: int = 0) -> QualityReport:
    """Run all four experiments for one metric and record the parameters."""
    spec, _params = _resolve(handle, registry)
    if spec.probe_field is not None:
        sens = sensitivity(handle, trace, (spec.probe_field, spec.probe_delta), registry)
        probe = {"field": spec.probe_field, "delta": spec.probe_delta}
    else:
        sens = None
        probe = None
    cv = repeatability(handle, trace, repeats=repeats, registry=registry)
    cons = consistency(handle, trace, trace, registry_a=registry)
    deltas = [independence(handle, trace, f, seed=seed, registry=registry)
              for f in independent_fields(spec)]
    return QualityReport(
        metric=spec.name,
        unit=spec.unit,
        version=spec.version,
        sensitivity=sens,
        repeatability_cv=cv,
        consistency_ok=cons.consistent,
        independence_delta=max(deltas, default=0.0),
        experiment={
            "probe": probe,
            "repeats": repeats,
            "independence_seed": seed,
            "independence_fields": independent_fields(spec),
        },
    )


def make_randomized_control(seed: int = 0, low: float = 0.9, high: float = 1.1) -> MetricSpec:
    """A negative-control metric: seeded, but differently on every call.

    Repeatability over several repeats must come out nonzero; use it to
    verify the repeatability experiment can fail.
    """
    calls = itertools.count()

    def fn(trace: Trace) -> float:
        rng = np.random.default_rng((seed, next(calls)))
        return float(rng.uniform(low, high))

    return MetricSpec(
        name="randomized_control",
        fn=fn,
        unit="none",
        input_fields=frozenset(),
        description="seeded negative control; draws a fresh value per call",
    )
