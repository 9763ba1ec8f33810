"""Trace data model: JSONL parsing, validation, serialization, windowing.

A trace is a bundle of per-node samples, per-link network samples,
request records, and adaptation events over a time window. Timestamps
are trace-relative seconds; absolute time lives only in the ``epoch``
field. ``energy_j``, ``bytes_delivered`` and ``busy_s`` are deltas since
the previous sample of the same node/link, which keeps windowing
additive.

Wire format is JSON Lines with a ``"kind"`` discriminator in
``{"node", "net", "request", "adaptation"}`` plus an optional leading
``{"kind": "meta", "epoch": ...}`` record.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable

from .errors import TraceParseError, TraceValidationError

TIERS = ("cloud", "edge", "iot")
POLARITIES = ("higher_better", "lower_better")

DEFAULT_EPOCH = "1970-01-01T00:00:00Z"

# Slack allowed when comparing busy_s against the inter-sample gap.
BUSY_GAP_TOLERANCE = 1e-9


@dataclass(frozen=True, slots=True)
class NodeSample:
    """One time-stamped resource measurement of a single node."""

    node_id: str
    timestamp: float
    tier: str
    cpu_util: float
    mem_util: float
    energy_j: float
    busy_s: float
    temperature_c: float | None = None


@dataclass(frozen=True, slots=True)
class NetSample:
    """One time-stamped measurement of a directed link (src -> dst)."""

    src: str
    dst: str
    timestamp: float
    latency_ms: float
    capacity_bps: float
    bytes_delivered: int
    packets_sent: int
    packets_delivered: int


@dataclass(frozen=True, slots=True)
class RequestRecord:
    """Lifecycle of one application request."""

    request_id: str
    arrival_ts: float
    start_ts: float
    finish_ts: float
    ok: bool
    cost_units: float
    correct: bool | None = None


@dataclass(frozen=True, slots=True)
class AdaptationEvent:
    """Outcome of one adaptation: performance before/after and time taken.

    ``polarity`` states whether larger values of the underlying metric
    are better (throughput) or worse (latency).
    """

    event_id: str
    p_base: float
    p_post: float
    t_adapt_s: float
    polarity: str


@dataclass(frozen=True)
class Trace:
    """Immutable, validated telemetry bundle; safe to share read-only."""

    epoch: str = DEFAULT_EPOCH
    node_samples: tuple[NodeSample, ...] = ()
    net_samples: tuple[NetSample, ...] = ()
    requests: tuple[RequestRecord, ...] = ()
    adaptations: tuple[AdaptationEvent, ...] = ()
    node_ids: tuple[str, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True, slots=True)
class Violation:
    """One invariant violation, naming the field and the record."""

    kind: str
    identity: str
    field: str
    message: str
    line_no: int | None = None

    def describe(self) -> str:
        where = f" at line {self.line_no}" if self.line_no is not None else ""
        return f"{self.kind} {self.identity}: {self.message}{where}"


@dataclass(frozen=True)
class ValidationReport:
    """Record counts plus every invariant violation found."""

    counts: dict[str, int]
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


# --------------------------------------------------------------------------
# record schemas

# (json field, type, required); field order is the wire order.
_SCHEMAS: dict[str, tuple[tuple[str, type, bool], ...]] = {
    "node": (
        ("node_id", str, True),
        ("timestamp", float, True),
        ("tier", str, True),
        ("cpu_util", float, True),
        ("mem_util", float, True),
        ("energy_j", float, True),
        ("temperature_c", float, False),
        ("busy_s", float, True),
    ),
    "net": (
        ("src", str, True),
        ("dst", str, True),
        ("timestamp", float, True),
        ("latency_ms", float, True),
        ("capacity_bps", float, True),
        ("bytes_delivered", int, True),
        ("packets_sent", int, True),
        ("packets_delivered", int, True),
    ),
    "request": (
        ("request_id", str, True),
        ("arrival_ts", float, True),
        ("start_ts", float, True),
        ("finish_ts", float, True),
        ("ok", bool, True),
        ("correct", bool, False),
        ("cost_units", float, True),
    ),
    "adaptation": (
        ("event_id", str, True),
        ("p_base", float, True),
        ("p_post", float, True),
        ("t_adapt_s", float, True),
        ("polarity", str, True),
    ),
}

_RECORD_TYPES = {
    "node": NodeSample,
    "net": NetSample,
    "request": RequestRecord,
    "adaptation": AdaptationEvent,
}


def _coerce(value, typ, name):
    """Coerce a JSON value to the schema type or raise ValueError."""
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{name} must be a number")
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"{name} must be an integer")
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ValueError(f"{name} must be a boolean")
        return value
    if not isinstance(value, str):
        raise ValueError(f"{name} must be a string")
    return value


# --------------------------------------------------------------------------
# per-record invariants


def _node_violations(s: NodeSample, line_no=None) -> list[Violation]:
    v = []

    def bad(fld, msg):
        v.append(Violation("node", s.node_id, fld, msg, line_no))

    if s.tier not in TIERS:
        bad("tier", f"tier {s.tier!r} not one of {TIERS}")
    if s.timestamp < 0:
        bad("timestamp", "timestamp negative")
    if not 0.0 <= s.cpu_util <= 1.0:
        bad("cpu_util", "cpu_util out of [0,1]")
    if not 0.0 <= s.mem_util <= 1.0:
        bad("mem_util", "mem_util out of [0,1]")
    if s.energy_j < 0:
        bad("energy_j", "energy_j negative")
    if s.busy_s < 0:
        bad("busy_s", "busy_s negative")
    return v


def _net_violations(s: NetSample, line_no=None) -> list[Violation]:
    v = []
    ident = f"{s.src}->{s.dst}"

    def bad(fld, msg):
        v.append(Violation("net", ident, fld, msg, line_no))

    if s.src == s.dst:
        bad("dst", "src equals dst")
    if s.timestamp < 0:
        bad("timestamp", "timestamp negative")
    if s.latency_ms < 0:
        bad("latency_ms", "latency_ms negative")
    if s.capacity_bps <= 0:
        bad("capacity_bps", "capacity_bps not positive")
    if s.bytes_delivered < 0:
        bad("bytes_delivered", "bytes_delivered negative")
    if s.packets_sent < 0:
        bad("packets_sent", "packets_sent negative")
    if s.packets_delivered < 0:
        bad("packets_delivered", "packets_delivered negative")
    if s.packets_delivered > s.packets_sent:
        bad("packets_delivered", "packets_delivered exceeds packets_sent")
    return v


def _request_violations(r: RequestRecord, line_no=None) -> list[Violation]:
    v = []

    def bad(fld, msg):
        v.append(Violation("request", r.request_id, fld, msg, line_no))

    if not r.arrival_ts <= r.start_ts <= r.finish_ts:
        bad("start_ts", "arrival_ts <= start_ts <= finish_ts violated")
    if r.cost_units < 0:
        bad("cost_units", "cost_units negative")
    return v


def _adaptation_violations(e: AdaptationEvent, line_no=None) -> list[Violation]:
    v = []

    def bad(fld, msg):
        v.append(Violation("adaptation", e.event_id, fld, msg, line_no))

    if e.p_base <= 0:
        bad("p_base", "p_base not positive")
    if e.p_post <= 0:
        bad("p_post", "p_post not positive")
    if e.t_adapt_s <= 0:
        bad("t_adapt_s", "t_adapt_s not positive")
    if e.polarity not in POLARITIES:
        bad("polarity", f"polarity {e.polarity!r} not one of {POLARITIES}")
    return v


_CHECKERS = {
    "node": _node_violations,
    "net": _net_violations,
    "request": _request_violations,
    "adaptation": _adaptation_violations,
}


def _parse_epoch(value: str) -> datetime:
    # 3.10 fromisoformat does not accept a trailing Z
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


# --------------------------------------------------------------------------
# loading


def _read_lines(source) -> list[str]:
    if isinstance(source, (str, Path)):
        text = Path(source).read_bytes().decode("utf-8")
    elif isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    else:
        raise ValueError(f"unsupported trace source: {type(source).__name__}")
    return text.splitlines()


def load_trace(source, strictness: str = "strict") -> Trace:
    """Parse a JSONL trace from a path, bytes, or file-like object.

    In ``"strict"`` mode any anomaly (malformed JSON, unknown field,
    missing field, invariant violation) raises. In ``"lenient"`` mode
    malformed JSON still raises, but offending records are dropped and
    unknown fields ignored, each adding to ``Trace.warnings``.
    """
    if strictness not in ("strict", "lenient"):
        raise ValueError(f"strictness must be 'strict' or 'lenient', got {strictness!r}")
    trace, _report = _parse(_read_lines(source), mode=strictness)
    return trace


def audit_trace(source) -> tuple[Trace, ValidationReport]:
    """Parse without enforcement: keep every representable record and
    report all invariant violations found (used by ``validate`` in the CLI).
    Malformed JSON still raises ``TraceParseError``.
    """
    return _parse(_read_lines(source), mode="audit")


def _parse(lines: list[str], mode: str) -> tuple[Trace, ValidationReport]:
    strict = mode == "strict"
    lenient = mode == "lenient"
    records: dict[str, list] = {k: [] for k in _SCHEMAS}
    lineinfo: dict[int, int] = {}  # id(record) -> line_no
    violations: list[Violation] = []
    warnings: list[str] = []
    epoch = None

    def problem(viol: Violation):
        if strict:
            raise TraceValidationError(
                f"{viol.message} at line {viol.line_no}" if viol.line_no else viol.message,
                line_no=viol.line_no,
                field=viol.field,
            )
        violations.append(viol)

    for line_no, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"malformed JSON at line {line_no}: {exc.msg}", line_no) from exc
        if not isinstance(obj, dict):
            raise TraceParseError(f"record at line {line_no} is not a JSON object", line_no)

        kind = obj.get("kind")
        if kind == "meta":
            if epoch is not None or any(records.values()):
                viol = Violation("meta", "-", "epoch", "meta record must be the first line", line_no)
                if lenient:
                    warnings.append(viol.describe())
                    continue
                problem(viol)
                continue
            value = obj.get("epoch", DEFAULT_EPOCH)
            try:
                _parse_epoch(value)
            except (TypeError, ValueError):
                viol = Violation("meta", "-", "epoch", f"epoch {value!r} is not ISO-8601", line_no)
                if lenient:
                    warnings.append(viol.describe())
                    continue
                problem(viol)
                continue
            epoch = value
            continue
        if kind not in _SCHEMAS:
            viol = Violation("record", "-", "kind", f"unknown kind {kind!r}", line_no)
            if lenient:
                warnings.append(viol.describe())
                continue
            problem(viol)
            continue

        schema = _SCHEMAS[kind]
        known = {name for name, _, _ in schema}
        unknown = set(obj) - known - {"kind"}
        if unknown:
            if strict:
                raise TraceValidationError(
                    f"unknown field {sorted(unknown)[0]!r} for kind {kind!r} at line {line_no}",
                    line_no=line_no,
                )
            warnings.append(f"ignored unknown fields {sorted(unknown)} at line {line_no}")

        values = {}
        record_ok = True
        for name, typ, required in schema:
            if name not in obj or obj[name] is None:
                if required:
                    viol = Violation(kind, str(obj.get("kind")), name, f"missing field {name!r}", line_no)
                    if lenient:
                        warnings.append(viol.describe())
                    else:
                        problem(viol)
                    record_ok = False
                    break
                values[name] = None
                continue
            try:
                values[name] = _coerce(obj[name], typ, name)
            except ValueError as exc:
                viol = Violation(kind, str(obj.get("kind")), name, str(exc), line_no)
                if lenient:
                    warnings.append(viol.describe())
                else:
                    problem(viol)
                record_ok = False
                break
        if not record_ok:
            continue

        record = _RECORD_TYPES[kind](**values)
        viols = _CHECKERS[kind](record, line_no)
        if viols:
            if lenient:
                warnings.extend(v.describe() for v in viols)
                continue
            if strict:
                problem(viols[0])
            violations.extend(viols)
        records[kind].append(record)
        lineinfo[id(record)] = line_no

    # normalize order within each kind to timestamp order (stable)
    records["node"].sort(key=lambda s: s.timestamp)
    records["net"].sort(key=lambda s: s.timestamp)
    records["request"].sort(key=lambda r: r.arrival_ts)

    # cross-record invariants on the per-node sample series
    kept_nodes: list[NodeSample] = []
    last_ts: dict[str, float] = {}
    for s in records["node"]:
        line = lineinfo.get(id(s))
        prev = last_ts.get(s.node_id)
        if prev is not None:
            if s.timestamp <= prev:
                viol = Violation(
                    "node", s.node_id, "timestamp",
                    "timestamps not strictly increasing for node", line,
                )
                if lenient:
                    warnings.append(viol.describe())
                    continue
                problem(viol)
            elif s.busy_s > (s.timestamp - prev) + BUSY_GAP_TOLERANCE:
                viol = Violation(
                    "node", s.node_id, "busy_s",
                    "busy_s exceeds inter-sample gap", line,
                )
                if lenient:
                    warnings.append(viol.describe())
                    continue
                problem(viol)
        kept_nodes.append(s)
        last_ts[s.node_id] = s.timestamp
    records["node"] = kept_nodes

    node_ids: list[str] = []
    seen = set()
    for s in records["node"]:
        if s.node_id not in seen:
            seen.add(s.node_id)
            node_ids.append(s.node_id)
    for s in records["net"]:
        for nid in (s.src, s.dst):
            if nid not in seen:
                seen.add(nid)
                node_ids.append(nid)

    trace = Trace(
        epoch=epoch if epoch is not None else DEFAULT_EPOCH,
        node_samples=tuple(records["node"]),
        net_samples=tuple(records["net"]),
        requests=tuple(records["request"]),
        adaptations=tuple(records["adaptation"]),
        node_ids=tuple(node_ids),
        warnings=tuple(warnings),
    )
    counts = {
        "node_samples": len(trace.node_samples),
        "net_samples": len(trace.net_samples),
        "requests": len(trace.requests),
        "adaptations": len(trace.adaptations),
    }
    return trace, ValidationReport(counts=counts, violations=tuple(violations))


# --------------------------------------------------------------------------
# validation of in-memory traces


def validate_trace(trace: Trace) -> ValidationReport:
    """Check every invariant of an in-memory trace without mutating it.

    Violations are data, not failures: the report lists them and is
    empty exactly when the trace is valid.
    """
    violations: list[Violation] = []
    for s in trace.node_samples:
        violations.extend(_node_violations(s))
    for s in trace.net_samples:
        violations.extend(_net_violations(s))
    for r in trace.requests:
        violations.extend(_request_violations(r))
    for e in trace.adaptations:
        violations.extend(_adaptation_violations(e))

    last_ts: dict[str, float] = {}
    for s in trace.node_samples:
        prev = last_ts.get(s.node_id)
        if prev is not None:
            if s.timestamp <= prev:
                violations.append(Violation(
                    "node", s.node_id, "timestamp",
                    "timestamps not strictly increasing for node"))
            elif s.busy_s > (s.timestamp - prev) + BUSY_GAP_TOLERANCE:
                violations.append(Violation(
                    "node", s.node_id, "busy_s", "busy_s exceeds inter-sample gap"))
        last_ts[s.node_id] = s.timestamp

    known = set(trace.node_ids)
    referenced = {s.node_id for s in trace.node_samples}
    referenced.update(s.src for s in trace.net_samples)
    referenced.update(s.dst for s in trace.net_samples)
    for nid in sorted(referenced - known):
        violations.append(Violation("trace", nid, "node_ids", "referenced node_id missing from node_ids"))
    if len(set(trace.node_ids)) != len(trace.node_ids):
        violations.append(Violation("trace", "-", "node_ids", "node_ids contains duplicates"))

    for name, seq, key in (
        ("node_samples", trace.node_samples, lambda s: s.timestamp),
        ("net_samples", trace.net_samples, lambda s: s.timestamp),
        ("requests", trace.requests, lambda r: r.arrival_ts),
    ):
        stamps = [key(s) for s in seq]
        if any(a > b for a, b in zip(stamps, stamps[1:])):
            violations.append(Violation("trace", "-", name, f"{name} not sorted by timestamp"))

    counts = {
        "node_samples": len(trace.node_samples),
        "net_samples": len(trace.net_samples),
        "requests": len(trace.requests),
        "adaptations": len(trace.adaptations),
    }
    return ValidationReport(counts=counts, violations=tuple(violations))


# --------------------------------------------------------------------------
# windowing


def window(trace: Trace, t_start: float, t_end: float) -> Trace:
    """Restrict a trace to records with timestamp in ``[t_start, t_end)``.

    Requests are kept iff their arrival falls inside the window.
    Boundary deltas (energy_j, bytes_delivered, busy_s) are kept as-is,
    never prorated, so windowed results are exactly reproducible from
    the raw records. Adaptation events carry no timestamp and are kept.
    """
    if not t_start < t_end:
        raise ValueError(f"t_start must be < t_end, got [{t_start}, {t_end})")
    nodes = tuple(s for s in trace.node_samples if t_start <= s.timestamp < t_end)
    nets = tuple(s for s in trace.net_samples if t_start <= s.timestamp < t_end)
    reqs = tuple(r for r in trace.requests if t_start <= r.arrival_ts < t_end)
    referenced = {s.node_id for s in nodes}
    referenced.update(s.src for s in nets)
    referenced.update(s.dst for s in nets)
    return replace(
        trace,
        node_samples=nodes,
        net_samples=nets,
        requests=reqs,
        node_ids=tuple(nid for nid in trace.node_ids if nid in referenced),
        warnings=(),
    )


# --------------------------------------------------------------------------
# serialization


def _record_obj(kind: str, record) -> dict:
    obj = {"kind": kind}
    for name, _typ, _req in _SCHEMAS[kind]:
        value = getattr(record, name)
        if value is None:
            continue
        obj[name] = value
    return obj


def serialize_trace(trace: Trace) -> str:
    """Render a trace as JSONL text; inverse of :func:`load_trace`."""
    lines = [json.dumps({"kind": "meta", "epoch": trace.epoch}, separators=(",", ":"))]
    for kind, seq in (
        ("node", trace.node_samples),
        ("net", trace.net_samples),
        ("request", trace.requests),
        ("adaptation", trace.adaptations),
    ):
        for record in seq:
            lines.append(json.dumps(_record_obj(kind, record), separators=(",", ":")))
    return "\n".join(lines) + "\n"


def save_trace(trace: Trace, path) -> None:
    Path(path).write_text(serialize_trace(trace), encoding="utf-8")
