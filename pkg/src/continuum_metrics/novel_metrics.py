"""Sustainability- and adaptivity-oriented metrics.

Covers exponential device cooling (predict and fit), the Jain fairness
index for bottleneck detection, operational carbon from energy and grid
intensity, the adaptivity quotient over adaptation events, and the
classic fixed-fraction speedup bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classic_metrics import time_weighted_mean
from .errors import DataError, UnidentifiableModelError
from .telemetry import AdaptationEvent, Trace

# Grid intensity used when nothing is configured; reports mark it "default".
DEFAULT_CARBON_INTENSITY_G_PER_KWH = 400.0

JOULES_PER_KWH = 3.6e6


@dataclass(frozen=True)
class ThermalParams:
    """Exponential cooling law parameters.

    t0_c is the initial device temperature, te_c the ambient
    temperature, and k > 0 the cooling rate in 1/s.
    """

    t0_c: float
    te_c: float
    k: float

    def __post_init__(self):
        if not (math.isfinite(self.t0_c) and math.isfinite(self.te_c) and math.isfinite(self.k)):
            raise ValueError("thermal parameters must be finite")
        if self.k <= 0:
            raise ValueError(f"cooling rate k must be positive, got {self.k}")


@dataclass(frozen=True)
class CoolingFit:
    params: ThermalParams
    rms_residual_c: float
    te_fitted: bool


@dataclass(frozen=True)
class FairnessInput:
    """Non-negative per-node resource values x_i, not all zero."""

    values: tuple[float, ...]
    label: str = "custom"

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError("fairness input needs at least one value")
        if any(not math.isfinite(v) or v < 0 for v in self.values):
            raise ValueError("fairness values must be finite and non-negative")
        if not any(v > 0 for v in self.values):
            raise ValueError("fairness values must not all be zero")


@dataclass(frozen=True)
class CarbonConfig:
    """Grid carbon intensity in grams CO2-equivalent per kWh."""

    intensity_g_per_kwh: float = DEFAULT_CARBON_INTENSITY_G_PER_KWH

    def __post_init__(self):
        if not math.isfinite(self.intensity_g_per_kwh) or self.intensity_g_per_kwh <= 0:
            raise ValueError("carbon intensity must be positive")


@dataclass(frozen=True)
class FairnessResult:
    label: str
    per_node: dict[str, float]
    fairness: float | None


def predict_temperature(params: ThermalParams, t):
    """Device temperature after t seconds of exponential cooling.

    Accepts a scalar or an array of times; temperature relaxes from
    t0_c toward te_c at rate k.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    result = params.te_c + (params.t0_c - params.te_c) * np.exp(-params.k * t)
    return float(result) if result.ndim == 0 else result


def _golden_section_min(f, lo: float, hi: float, iterations: int = 120) -> float:
    # derivative-free, deterministic; enough iterations to reach float resolution
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _fit_known_te(times: np.ndarray, temps: np.ndarray, te: float) -> CoolingFit:
    excess = temps - te
    if np.any(excess <= 0):
        idx = int(np.argmax(excess <= 0))
        raise DataError(
            f"temperature {temps[idx]} at t={times[idx]} is not above ambient {te}; "
            "log-linear fit undefined"
        )
    logs = np.log(excess)
    slope, intercept = np.polyfit(times, logs, 1)
    k = -float(slope)
    if k <= 0:
        raise UnidentifiableModelError("data does not cool: fitted rate k is not positive")
    params = ThermalParams(t0_c=te + math.exp(float(intercept)), te_c=te, k=k)
    predicted = predict_temperature(params, times)
    rms = float(np.sqrt(np.mean((predicted - temps) ** 2)))
    return CoolingFit(params=params, rms_residual_c=rms, te_fitted=False)


def fit_cooling(series: Sequence[tuple[float, float]],
                te_known: float | None = None) -> CoolingFit:
    """Recover cooling parameters from (t, temperature) observations.

    With a known ambient temperature the fit is a least-squares line
    through log(T - te); exact on noiseless data. With te unknown, a
    golden-section search over ambient candidates below the coolest
    observation minimizes the fit residual. The residual is the RMS
    prediction error in degrees C.
    """
    pts = sorted((float(t), float(temp)) for t, temp in series)
    times = np.array([p[0] for p in pts])
    temps = np.array([p[1] for p in pts])
    needed = 2 if te_known is not None else 3
    if len(set(times.tolist())) < needed:
        raise ValueError(f"need at least {needed} points with distinct times")
    if float(temps.max()) == float(temps.min()):
        raise UnidentifiableModelError("temperature series is constant: k unidentifiable")

    if te_known is not None:
        return _fit_known_te(times, temps, float(te_known))

    t_min = float(temps.min())
    lo, hi = t_min - 50.0, t_min - 1e-9

    def residual(te: float) -> float:
        try:
            return _fit_known_te(times, temps, te).rms_residual_c
        except (DataError, UnidentifiableModelError):
            return math.inf

    te_star = _golden_section_min(residual, lo, hi)
    if not math.isfinite(residual(te_star)):
        raise UnidentifiableModelError(
            "no ambient temperature candidate admits a cooling fit")
    fit = _fit_known_te(times, temps, te_star)
    return CoolingFit(params=fit.params, rms_residual_c=fit.rms_residual_c, te_fitted=True)


def jain_fairness(values) -> float:
    """Jain's fairness index (sum x)^2 / (n * sum x^2), in [1/n, 1].

    1 means a perfectly even distribution (no bottleneck); values
    toward 1/n mean one node holds everything. Scale invariant.
    """
    if isinstance(values, FairnessInput):
        xs = values.values
    else:
        xs = tuple(float(v) for v in values)
        FairnessInput(values=xs)  # reuse the input validation
    if all(x == xs[0] for x in xs):
        return 1.0  # algebraically exact for equal allocations
    total = math.fsum(xs)
    square_sum = math.fsum(x * x for x in xs)
    return min(total * total / (len(xs) * square_sum), 1.0)


def fairness_by_resource(trace: Trace, resource: str) -> FairnessResult:
    """Build per-node x_i for one resource and apply the fairness index.

    cpu uses each node's time-weighted mean utilization, energy the
    per-node total joules, bandwidth the bytes delivered on links
    incident to the node. Returns fairness None when the trace has no
    usable data for the resource.
    """
    if resource not in ("cpu", "energy", "bandwidth"):
        raise ValueError(f"resource must be cpu, energy, or bandwidth, got {resource!r}")
    per_node: dict[str, float] = {}
    if resource in ("cpu", "energy"):
        series: dict[str, list] = {}
        for s in trace.node_samples:
            series.setdefault(s.node_id, []).append(s)
        for nid in trace.node_ids:
            if nid not in series:
                continue
            samples = series[nid]
            if resource == "cpu":
                per_node[nid] = time_weighted_mean(
                    [s.timestamp for s in samples], [s.cpu_util for s in samples])
            else:
                per_node[nid] = math.fsum(s.energy_j for s in samples)
    else:
        totals: dict[str, float] = {}
        for s in trace.net_samples:
            totals[s.src] = totals.get(s.src, 0.0) + s.bytes_delivered
            totals[s.dst] = totals.get(s.dst, 0.0) + s.bytes_delivered
        for nid in trace.node_ids:
            if nid in totals:
                per_node[nid] = totals[nid]
    if not per_node or not any(v > 0 for v in per_node.values()):
        return FairnessResult(label=resource, per_node=per_node, fairness=None)
    return FairnessResult(
        label=resource,
        per_node=per_node,
        fairness=jain_fairness(FairnessInput(values=tuple(per_node.values()), label=resource)),
    )


def carbon_emissions(energy_j: float, config: CarbonConfig) -> float:
    """Grams CO2-equivalent for the given energy at the configured grid
    intensity (1 kWh = 3.6 MJ)."""
    if energy_j < 0:
        raise ValueError("energy must be non-negative")
    return (energy_j / JOULES_PER_KWH) * config.intensity_g_per_kwh


def adaptivity_quotient(events: Sequence[AdaptationEvent]) -> float:
    """Mean improvement-per-second over adaptation events, in 1/s.

    Each event contributes (performance ratio) / (adaptation time); the
    ratio is post/base for higher-is-better metrics and base/post for
    lower-is-better ones, so improvements always score above 1 per
    unit ratio.
    """
    if not events:
        raise ValueError("adaptivity_quotient requires at least one event")
    terms = []
    for e in events:
        if e.p_base <= 0 or e.p_post <= 0 or e.t_adapt_s <= 0:
            raise ValueError(f"adaptation event {e.event_id!r} violates positivity")
        if e.polarity == "higher_better":
            ratio = e.p_post / e.p_base
        elif e.polarity == "lower_better":
            ratio = e.p_base / e.p_post
        else:
            raise ValueError(f"unknown polarity {e.polarity!r} on event {e.event_id!r}")
        terms.append(ratio / e.t_adapt_s)
    # fsum makes the mean exactly permutation invariant
    return math.fsum(terms) / len(terms)


def amdahl_speedup(f_enhanced: float, s_enhanced: float) -> float:
    """Overall speedup when a fraction f of the work is sped up s times:
    1 / ((1 - f) + f/s). Bounded above by 1/(1-f)."""
    if not 0.0 <= f_enhanced <= 1.0:
        raise ValueError("enhanced fraction must be in [0, 1]")
    if s_enhanced <= 0:
        raise ValueError("enhanced speedup must be positive")
    return 1.0 / ((1.0 - f_enhanced) + f_enhanced / s_enhanced)
