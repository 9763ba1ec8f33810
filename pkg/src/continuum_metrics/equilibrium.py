"""Cost-resource-QoS trade-off: evaluate a QoS surface and find the
constrained optimum.

The surface is data, either a tabulated grid over (R, C) axes or a
named parametric family, and the solver is an exhaustive scan over the
feasible lattice {R >= r_min} x {C <= c_max}, so optimality on the grid
is exact. Ties break toward the smallest cost, then the smallest
resource level, independent of evaluation order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InfeasibleProblemError


def _saturating_linear(r, c, a: float, b: float, cost_weight: float):
    return a * r / (r + b) - cost_weight * c


# name -> (callable(R, C, **coefficients), required coefficient names)
FAMILIES = {
    "saturating_linear": (_saturating_linear, ("a", "b", "cost_weight")),
}


@dataclass(frozen=True, eq=False)
class EquilibriumProblem:
    """QoS surface plus the cost ceiling and resource floor."""

    r_axis: np.ndarray
    c_axis: np.ndarray
    c_max: float
    r_min: float
    q_table: np.ndarray | None = None
    family: str | None = None
    coefficients: dict[str, float] | None = None

    def __post_init__(self):
        r_axis = np.asarray(self.r_axis, dtype=float)
        c_axis = np.asarray(self.c_axis, dtype=float)
        for name, axis in (("r_axis", r_axis), ("c_axis", c_axis)):
            if axis.ndim != 1 or len(axis) == 0:
                raise ValueError(f"{name} must be a non-empty 1-D grid")
            if not np.all(np.isfinite(axis)):
                raise ValueError(f"{name} must be finite")
            if np.any(np.diff(axis) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        object.__setattr__(self, "r_axis", r_axis)
        object.__setattr__(self, "c_axis", c_axis)
        if (self.q_table is None) == (self.family is None):
            raise ValueError("provide exactly one of q_table or family")
        if self.q_table is not None:
            table = np.asarray(self.q_table, dtype=float)
            if table.shape != (len(r_axis), len(c_axis)):
                raise ValueError(
                    f"q_table shape {table.shape} != ({len(r_axis)}, {len(c_axis)})")
            if not np.all(np.isfinite(table)):
                raise ValueError("q_table must be finite")
            table.setflags(write=False)
            object.__setattr__(self, "q_table", table)
        else:
            if self.family not in FAMILIES:
                raise ValueError(
                    f"unknown family {self.family!r}; known: {sorted(FAMILIES)}")
            _fn, names = FAMILIES[self.family]
            coeffs = dict(self.coefficients or {})
            missing = [n for n in names if n not in coeffs]
            if missing:
                raise ValueError(f"family {self.family!r} missing coefficients {missing}")
            object.__setattr__(self, "coefficients", coeffs)
        if not (math.isfinite(self.c_max) and math.isfinite(self.r_min)):
            raise ValueError("constraint bounds must be finite")


@dataclass(frozen=True)
class EquilibriumSolution:
    r_star: float
    c_star: float
    q_star: float
    feasible_count: int


def q_values(problem: EquilibriumProblem) -> np.ndarray:
    """The full Q grid, rows indexed by r_axis and columns by c_axis."""
    if problem.q_table is not None:
        return problem.q_table
    fn, _names = FAMILIES[problem.family]
    rr, cc = np.meshgrid(problem.r_axis, problem.c_axis, indexing="ij")
    return fn(rr, cc, **problem.coefficients)


def _axis_index(axis: np.ndarray, value: float) -> int | None:
    hits = np.nonzero(np.isclose(axis, value, rtol=1e-12, atol=0.0))[0]
    return int(hits[0]) if len(hits) else None


def evaluate_qos(problem: EquilibriumProblem, r: float, c: float) -> float:
    """Q at one point: exact table lookup, or the family formula within
    the axis bounds; no interpolation ever."""
    if problem.q_table is not None:
        i = _axis_index(problem.r_axis, r)
        j = _axis_index(problem.c_axis, c)
        if i is None or j is None:
            raise ValueError(f"({r}, {c}) is not a grid point of the tabulated surface")
        return float(problem.q_table[i, j])
    if not (problem.r_axis[0] <= r <= problem.r_axis[-1]
            and problem.c_axis[0] <= c <= problem.c_axis[-1]):
        raise ValueError(f"({r}, {c}) is outside the axis bounds")
    fn, _names = FAMILIES[problem.family]
    return float(fn(r, c, **problem.coefficients))


def solve_equilibrium(problem: EquilibriumProblem) -> EquilibriumSolution:
    """Maximize Q over all feasible grid points by exhaustive evaluation."""
    r_ok = np.nonzero(problem.r_axis >= problem.r_min)[0]
    c_ok = np.nonzero(problem.c_axis <= problem.c_max)[0]
    binding = []
    if len(r_ok) == 0:
        binding.append("r_min")
    if len(c_ok) == 0:
        binding.append("c_max")
    if binding:
        raise InfeasibleProblemError(
            f"no feasible grid point; binding constraint(s): {', '.join(binding)}",
            binding=tuple(binding),
        )
    q = q_values(problem)[np.ix_(r_ok, c_ok)]
    q_star = float(q.max())
    # ties break to the smallest cost, then the smallest resource level
    ties = np.argwhere(q == q_star)
    ci = int(ties[:, 1].min())
    ri = int(ties[ties[:, 1] == ci][:, 0].min())
    return EquilibriumSolution(
        r_star=float(problem.r_axis[r_ok[ri]]),
        c_star=float(problem.c_axis[c_ok[ci]]),
        q_star=q_star,
        feasible_count=int(q.size),
    )


def equilibrium_report(problem: EquilibriumProblem,
                       solution: EquilibriumSolution) -> dict:
    """Optimum plus binding constraints and the marginal Q change per
    grid step in each axis around it (one-sided at grid boundaries)."""
    q = q_values(problem)
    ri = _axis_index(problem.r_axis, solution.r_star)
    ci = _axis_index(problem.c_axis, solution.c_star)
    if ri is None or ci is None:
        raise ValueError("solution does not lie on the problem grid")

    feasible_r = problem.r_axis[problem.r_axis >= problem.r_min]
    feasible_c = problem.c_axis[problem.c_axis <= problem.c_max]

    marginals = {
        "r": {
            "forward": float(q[ri + 1, ci] - q[ri, ci]) if ri + 1 < len(problem.r_axis) else None,
            "backward": float(q[ri, ci] - q[ri - 1, ci]) if ri >= 1 else None,
        },
        "c": {
            "forward": float(q[ri, ci + 1] - q[ri, ci]) if ci + 1 < len(problem.c_axis) else None,
            "backward": float(q[ri, ci] - q[ri, ci - 1]) if ci >= 1 else None,
        },
    }
    fwd, bwd = marginals["r"]["forward"], marginals["r"]["backward"]
    diminishing = fwd < bwd if (fwd is not None and bwd is not None) else None
    if diminishing:
        note = ("marginal QoS per resource step is shrinking at the optimum; "
                "further scaling buys less than the last step did")
    elif diminishing is None:
        note = "optimum sits on a resource grid boundary; returns profile is one-sided"
    else:
        note = "no diminishing returns detected at the optimum"
    return {
        "r_star": solution.r_star,
        "c_star": solution.c_star,
        "q_star": solution.q_star,
        "feasible_count": solution.feasible_count,
        "binding": {
            "c_max": bool(solution.c_star == float(feasible_c.max())),
            "r_min": bool(solution.r_star == float(feasible_r.min())),
        },
        "marginals": marginals,
        "diminishing_returns_in_r": diminishing,
        "note": note,
    }


def load_problem(source) -> EquilibriumProblem:
    """Build a problem from a JSON file or an already-parsed dict.

    Expected keys: r_axis, c_axis, c_max, r_min, and either q_table
    (row-major, rows follow r_axis) or family + coefficients.
    """
    if isinstance(source, (str, Path)):
        obj = json.loads(Path(source).read_text(encoding="utf-8"))
    elif isinstance(source, dict):
        obj = source
    else:
        data = source.read()
        obj = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    if not isinstance(obj, dict):
        raise ValueError("problem file must contain a JSON object")
    known = {"r_axis", "c_axis", "c_max", "r_min", "q_table", "family", "coefficients"}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown problem keys: {sorted(unknown)}")
    try:
        return EquilibriumProblem(
            r_axis=obj["r_axis"],
            c_axis=obj["c_axis"],
            c_max=float(obj["c_max"]),
            r_min=float(obj["r_min"]),
            q_table=obj.get("q_table"),
            family=obj.get("family"),
            coefficients=obj.get("coefficients"),
        )
    except KeyError as exc:
        raise ValueError(f"problem file missing key {exc.args[0]!r}") from exc
