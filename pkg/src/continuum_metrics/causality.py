"""Pairwise causal influence between nodes and the observability score.

Influence is a bounded variance-reduction ratio from two least-squares
autoregressions (with and without the source node's history), which
yields comparable non-negative magnitudes rather than test statistics.
The observability score combines weighted local explainability with a
penalty on asymmetric inter-node influence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, InsufficientDataError
from .telemetry import Trace

DEFAULT_LAG = 2

# Minimum series length per lag order for a stable regression.
MIN_SAMPLES_PER_LAG = 10


@dataclass(frozen=True, eq=False)
class CausalMatrix:
    """n x n non-negative influence estimates; entry [i, j] is i -> j.

    Nodes whose series fail the estimator preconditions are listed in
    undefined_nodes; their rows and columns are zero and each failure
    adds a warning.
    """

    node_ids: tuple[str, ...]
    entries: np.ndarray
    warnings: tuple[str, ...] = ()
    undefined_nodes: tuple[str, ...] = ()

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        n = len(self.node_ids)
        if entries.shape != (n, n):
            raise ValueError(f"entries must be {n}x{n}, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("entries must be finite")
        if np.any(entries < 0):
            raise ValueError("entries must be non-negative")
        if np.any(np.diag(entries) != 0):
            raise ValueError("diagonal must be zero")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return len(self.node_ids)


@dataclass(frozen=True)
class ExplainabilityVector:
    """Per-node local explainability scores in [0,1] with positive weights."""

    e_local: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.e_local) != len(self.weights):
            raise ValueError("e_local and weights must have equal length")
        if len(self.e_local) == 0:
            raise ValueError("explainability vector must be non-empty")
        if any(not 0.0 <= e <= 1.0 for e in self.e_local):
            raise ValueError("local explainability scores must lie in [0, 1]")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")

    @classmethod
    def uniform(cls, n: int, e_local: float = 1.0, weight: float = 1.0) -> "ExplainabilityVector":
        return cls(e_local=(e_local,) * n, weights=(weight,) * n)


@dataclass(frozen=True)
class ObservabilityScore:
    """Literal and clamped score plus the asymmetry penalty term."""

    raw: float
    clamped: float
    asymmetry_penalty: float | None
    penalty_undefined: bool = False
    warnings: tuple[str, ...] = ()


def _lag_matrix(series: np.ndarray, lag: int) -> np.ndarray:
    n = len(series)
    return np.column_stack([series[lag - i: n - i] for i in range(1, lag + 1)])


def granger_influence(x, y, lag: int = DEFAULT_LAG) -> float:
    """Fraction of y's residual variance explained by x's history, in [0, 1).

    Fits y on its own `lag` lags (restricted) and on its own plus x's
    lags (full); returns max(0, 1 - RSS_full / RSS_restricted).
    """
    if not isinstance(lag, int) or isinstance(lag, bool) or lag < 1:
        raise ValueError(f"lag must be an integer >= 1, got {lag!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise ValueError("series must be 1-D and aligned")
    n = len(y)
    if n < MIN_SAMPLES_PER_LAG * lag:
        raise InsufficientDataError(
            f"need at least {MIN_SAMPLES_PER_LAG * lag} samples for lag {lag}, got {n}")
    if float(np.var(x)) == 0.0 or float(np.var(y)) == 0.0:
        raise DataError("series has zero variance")

    target = y[lag:]
    ones = np.ones((n - lag, 1))
    restricted = np.hstack([ones, _lag_matrix(y, lag)])
    full = np.hstack([restricted, _lag_matrix(x, lag)])

    def rss(design: np.ndarray) -> float:
        beta, *_ = np.linalg.lstsq(design, target, rcond=None)
        resid = target - design @ beta
        return float(resid @ resid)

    rss_restricted = rss(restricted)
    if rss_restricted <= 0.0:
        return 0.0  # y already perfectly predictable from itself
    influence = 1.0 - rss(full) / rss_restricted
    # exact-fit guard keeps the value strictly below 1
    return min(max(influence, 0.0), math.nextafter(1.0, 0.0))


def _node_series(trace: Trace, signal) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    if isinstance(signal, dict):
        return {
            nid: (np.asarray(t, dtype=float), np.asarray(v, dtype=float))
            for nid, (t, v) in signal.items()
        }
    if signal not in ("cpu_util", "energy_j"):
        raise ValueError(
            f"signal must be 'cpu_util', 'energy_j', or a node->series mapping, got {signal!r}")
    series: dict[str, tuple[list, list]] = {}
    for s in trace.node_samples:
        t, v = series.setdefault(s.node_id, ([], []))
        t.append(s.timestamp)
        v.append(getattr(s, signal))
    return {nid: (np.array(t), np.array(v)) for nid, (t, v) in series.items()}


def build_causal_matrix(trace: Trace, signal="cpu_util", lag: int = DEFAULT_LAG) -> CausalMatrix:
    """Estimate influence for every ordered node pair of a trace.

    Per-node series are resampled onto a common uniform grid by linear
    interpolation, with the grid step set to the median inter-sample
    gap. Deterministic for a fixed trace and parameters.
    """
    node_ids = trace.node_ids
    if len(node_ids) < 2:
        raise ValueError("causal matrix needs at least 2 nodes")
    raw = _node_series(trace, signal)
    missing = [nid for nid in node_ids if nid not in raw or len(raw[nid][0]) == 0]
    present = [nid for nid in node_ids if nid not in missing]
    if len(present) < 2:
        raise DataError("fewer than 2 nodes have samples for the requested signal")

    gaps: list[float] = []
    for nid in present:
        t = raw[nid][0]
        gaps.extend(np.diff(t).tolist())
    gaps = [g for g in gaps if g > 0]
    if not gaps:
        raise DataError("no positive inter-sample gaps; cannot build a grid")
    step = float(np.median(gaps))
    start = max(float(raw[nid][0][0]) for nid in present)
    end = min(float(raw[nid][0][-1]) for nid in present)
    if end <= start:
        raise DataError("node series have no common time window")
    m = int(math.floor((end - start) / step)) + 1
    if m < MIN_SAMPLES_PER_LAG * lag:
        raise InsufficientDataError(
            f"common grid has {m} points; need {MIN_SAMPLES_PER_LAG * lag} for lag {lag}")
    grid = start + step * np.arange(m)

    resampled: dict[str, np.ndarray] = {}
    warnings = [f"no samples for node {nid}; row and column left zero" for nid in missing]
    undefined = list(missing)
    for nid in present:
        t, v = raw[nid]
        values = np.interp(grid, t, v)
        if float(np.var(values)) == 0.0:
            warnings.append(f"zero-variance series for node {nid}; row and column left zero")
            undefined.append(nid)
        else:
            resampled[nid] = values

    n = len(node_ids)
    entries = np.zeros((n, n))
    for i, src in enumerate(node_ids):
        if src not in resampled:
            continue
        for j, dst in enumerate(node_ids):
            if i == j or dst not in resampled:
                continue
            entries[i, j] = granger_influence(resampled[src], resampled[dst], lag)
    return CausalMatrix(
        node_ids=node_ids,
        entries=entries,
        warnings=tuple(warnings),
        undefined_nodes=tuple(undefined),
    )


def observability_score(ev: ExplainabilityVector, cm: CausalMatrix) -> ObservabilityScore:
    """Average weighted explainability discounted by influence asymmetry.

    raw = (sum gamma_i * e_i / N) * (1 - sum_{i!=j} |C_ij - C_ji| / sum C_ij),
    evaluated literally; the ordered-pair sum counts each unordered pair
    twice, so raw can go negative and the clamped value floors it at 0.
    An all-zero matrix leaves the penalty undefined and reports the
    first factor alone, with a warning.
    """
    if len(ev.e_local) != cm.n:
        raise ValueError(
            f"explainability vector length {len(ev.e_local)} != node count {cm.n}")
    first = math.fsum(g * e for g, e in zip(ev.weights, ev.e_local)) / cm.n
    total = float(cm.entries.sum())
    if total == 0.0:
        return ObservabilityScore(
            raw=first,
            clamped=first,
            asymmetry_penalty=None,
            penalty_undefined=True,
            warnings=("causal matrix sums to zero; asymmetry penalty undefined, "
                      "score is the explainability factor alone",),
        )
    asymmetry = float(np.abs(cm.entries - cm.entries.T).sum())
    penalty = asymmetry / total
    raw = first * (1.0 - penalty)
    return ObservabilityScore(
        raw=raw,
        clamped=max(raw, 0.0),
        asymmetry_penalty=penalty,
    )


def load_explainability(source) -> dict[str, tuple[float, float]]:
    """Read a JSONL file of {node_id, e_local, gamma} records.

    gamma defaults to 1.0 when omitted. Returns node_id -> (e_local, gamma).
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    table: dict[str, tuple[float, float]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        try:
            node_id = obj["node_id"]
            e_local = float(obj["e_local"])
            gamma = float(obj.get("gamma", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad explainability record at line {line_no}: {exc}") from exc
        table[node_id] = (e_local, gamma)
    return table


def explainability_for_nodes(node_ids: Sequence[str],
                             table: dict[str, tuple[float, float]] | None = None,
                             default_e: float = 1.0,
                             default_gamma: float = 1.0) -> ExplainabilityVector:
    """Assemble the vector for a node ordering, defaulting absent nodes."""
    table = table or {}
    e_local = []
    weights = []
    for nid in node_ids:
        e, g = table.get(nid, (default_e, default_gamma))
        e_local.append(e)
        weights.append(g)
    return ExplainabilityVector(e_local=tuple(e_local), weights=tuple(weights))
