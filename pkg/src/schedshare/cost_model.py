"""Machine cost functions: step costs, validation, normalization, approximation.

A machine's cost is a non-decreasing step function of its integer load,
represented by an ordered list of segments ``(length, step_cost)``. Cost is 0
at load 0, jumps to the k-th step cost while the load sits inside the k-th
segment, and is infinite beyond the last represented segment (the tail).
Costs are exact rationals throughout; "infinite" is ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import (
    DecreasingCost,
    InfeasibleDemand,
    NoFiniteCost,
    NotNondecreasing,
    ZeroCostSegment,
)

INFINITE = math.inf

#: ExtendedCost is a nonnegative Fraction or INFINITE. Python's numeric tower
#: already gives the ordering and absorption we need (Fraction < inf, inf + x = inf).
ExtendedCost = Fraction | float


def as_fraction(x) -> Fraction:
    """Coerce ints, strings like '3/4' or '0.25', and Fractions to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        # floats only appear from JSON scalars; exact conversion keeps us honest
        return Fraction(x).limit_denominator(10**12)
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


@dataclass(frozen=True)
class StepCostFunction:
    """Non-decreasing step cost: ``segments[k] = (length, step_cost)``.

    Step costs must be positive (zero-cost machines are rejected) and
    non-decreasing; adjacent equal costs are legal at construction but must be
    merged (``merge_equal_segments``) before mechanism use. The tail beyond
    the represented segments is infinite cost. An empty segment list is the
    always-infinite machine (capacity 0).
    """

    segments: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        segs = tuple((int(ln), as_fraction(c)) for ln, c in self.segments)
        object.__setattr__(self, "segments", segs)
        prev = None
        for ln, c in segs:
            if ln <= 0:
                raise ZeroCostSegment(f"segment length must be positive, got {ln}")
            if c <= 0:
                raise ZeroCostSegment(f"step cost must be positive, got {c}")
            if prev is not None and c < prev:
                raise DecreasingCost(f"step cost {c} decreases below {prev}")
            prev = c

    @property
    def capacity(self) -> int:
        """Total load representable at finite cost."""
        return sum(ln for ln, _ in self.segments)

    @property
    def four_step_valid(self) -> bool:
        """True iff every segment spans at least 4 load units."""
        return all(ln >= 4 for ln, _ in self.segments)

    @property
    def is_capacitated_constant(self) -> bool:
        """Exactly one segment plus the infinite tail."""
        return len(self.segments) == 1

    def cumulative_lengths(self) -> list[int]:
        """Prefix sums of segment lengths; entry k = capacity of segments 1..k."""
        out, tot = [], 0
        for ln, _ in self.segments:
            tot += ln
            out.append(tot)
        return out


def eval_cost(f: StepCostFunction, load: int) -> ExtendedCost:
    """Cost of the machine at the given load (0 at load 0, inf past capacity)."""
    if load < 0:
        raise ValueError("load must be nonnegative")
    if load == 0:
        return Fraction(0)
    pos = 0
    for ln, c in f.segments:
        pos += ln
        if load <= pos:
            return c
    return INFINITE


def merge_equal_segments(f: StepCostFunction) -> StepCostFunction:
    """Coalesce adjacent equal-cost segments; result has strictly increasing costs."""
    merged: list[list] = []
    for ln, c in f.segments:
        if merged and merged[-1][1] == c:
            merged[-1][0] += ln
        else:
            merged.append([ln, c])
    return StepCostFunction(tuple((ln, c) for ln, c in merged))


@dataclass(frozen=True)
class Instance:
    """An ordered list of machines; the list order is the fixed machine ordering."""

    machines: tuple[StepCostFunction, ...]

    def __post_init__(self):
        object.__setattr__(self, "machines", tuple(self.machines))
        if not self.machines:
            raise ValueError("instance needs at least one machine")

    @property
    def m(self) -> int:
        return len(self.machines)

    @property
    def total_capacity(self) -> int:
        return sum(f.capacity for f in self.machines)

    def require_feasible(self, q: int) -> None:
        if q > self.total_capacity:
            raise InfeasibleDemand(
                f"{q} jobs exceed total capacity {self.total_capacity}"
            )

    def min_step_cost(self) -> Fraction:
        """Smallest step cost over all segments of all machines."""
        costs = [c for f in self.machines for _, c in f.segments]
        if not costs:
            raise NoFiniteCost("all machines have empty (always-infinite) costs")
        return min(costs)

    def merged(self) -> "Instance":
        return Instance(tuple(merge_equal_segments(f) for f in self.machines))


def normalize(inst: Instance) -> tuple[Instance, Fraction]:
    """Rescale all step costs so the minimum becomes exactly 1.

    Returns the rescaled instance and the scale applied (multiply reported
    costs by 1/scale to recover original units).
    """
    scale = 1 / inst.min_step_cost()
    machines = tuple(
        StepCostFunction(tuple((ln, c * scale) for ln, c in f.segments))
        for f in inst.machines
    )
    return Instance(machines), scale


def approximate_bounded(samples: Sequence, horizon: int) -> StepCostFunction:
    """Dominating 4-step approximation of a tabulated non-decreasing cost.

    ``samples[l-1]`` is the cost at load l for l in 1..horizon; the horizon
    must be a positive multiple of 4. The result takes the sampled value at
    each multiple of 4 across the preceding 4 loads, then merges equal steps,
    so it dominates the input pointwise on 1..horizon.
    """
    if horizon < 4 or horizon % 4 != 0:
        raise ValueError("horizon must be a positive multiple of 4")
    if len(samples) < horizon:
        raise ValueError("need a sample for every load in 1..horizon")
    vals = [as_fraction(v) for v in samples[:horizon]]
    prev = None
    for v in vals:
        if v <= 0:
            raise NotNondecreasing("samples must be positive")
        if prev is not None and v < prev:
            raise NotNondecreasing("samples must be non-decreasing")
        prev = v
    segs = tuple((4, vals[4 * k - 1]) for k in range(1, horizon // 4 + 1))
    return merge_equal_segments(StepCostFunction(segs))


def max_jump_ratio(samples: Sequence, horizon: int) -> Fraction:
    """Largest one-step relative jump c(l+1)/c(l) over 1..horizon-1.

    A finite-horizon diagnostic for how fast the tabulated cost grows; it
    does not classify the function, it just reports the observed ratio.
    """
    vals = [as_fraction(v) for v in samples[:horizon]]
    if len(vals) < horizon:
        raise ValueError("need a sample for every load in 1..horizon")
    if any(v <= 0 for v in vals):
        raise NotNondecreasing("samples must be positive")
    if horizon == 1:
        return Fraction(1)
    return max(vals[i + 1] / vals[i] for i in range(horizon - 1))


def serialize_cost(f: StepCostFunction) -> dict:
    """JSON form used in scenario files."""
    return {
        "segments": [{"len": ln, "cost": _frac_str(c)} for ln, c in f.segments],
        "tail": "infinite",
    }


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# re-export for reports
frac_str = _frac_str
