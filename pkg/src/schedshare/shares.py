"""Share values and the per-segment quantities the protocols charge.

A share is either infinite or a lexicographic pair (macro, micro): macro is
an exact rational amount of cost, micro encodes the "arbitrarily small"
positive charges exactly as a rank. Any positive macro beats every
micro-only value, and micro ranks are ordered against the segment fill
order, so every strict comparison in the protocols holds with no numeric
epsilon tuning.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering

from .cost_model import Instance, StepCostFunction, frac_str
from .errors import OverCapacity, TooFew
from .delayed_opt import SegmentOrder


@total_ordering
@dataclass(frozen=True)
class ShareValue:
    """Extended cost share: infinite, or Finite(macro, micro) compared lexicographically."""

    macro: Fraction = Fraction(0)
    micro: int = 0
    infinite: bool = False

    def __post_init__(self):
        if self.infinite:
            object.__setattr__(self, "macro", Fraction(0))
            object.__setattr__(self, "micro", 0)
        else:
            object.__setattr__(self, "macro", Fraction(self.macro))
            if self.macro < 0 or (self.macro == 0 and self.micro < 0):
                raise ValueError("shares are nonnegative")

    def _key(self):
        return (1, Fraction(0), 0) if self.infinite else (0, self.macro, self.micro)

    def __lt__(self, other: "ShareValue") -> bool:
        return self._key() < other._key()

    def __eq__(self, other) -> bool:
        return isinstance(other, ShareValue) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def to_json(self):
        if self.infinite:
            return "inf"
        return {"macro": frac_str(self.macro), "microRank": self.micro}

    def __repr__(self):
        if self.infinite:
            return "ShareValue(inf)"
        return f"ShareValue({self.macro}, micro={self.micro})"


ZERO_SHARE = ShareValue()
INFINITE_SHARE = ShareValue(infinite=True)


def finite(macro, micro: int = 0) -> ShareValue:
    return ShareValue(Fraction(macro), micro)


def last_segment(f: StepCostFunction, load: int) -> int:
    """1-based index of the segment holding the last job at the given load."""
    if load < 1:
        raise ValueError("load must be positive")
    pos = 0
    for k, (ln, _) in enumerate(f.segments, start=1):
        pos += ln
        if load <= pos:
            return k
    raise OverCapacity(f"load {load} exceeds capacity {f.capacity}")


def excess(f: StepCostFunction, load: int) -> int:
    """Jobs sitting in the last used segment, or 0 if that segment is full."""
    lam = last_segment(f, load)
    before = sum(ln for ln, _ in f.segments[: lam - 1])
    w = load - before
    return 0 if w == f.segments[lam - 1][0] else w


def cumulative_cost(inst: Instance, order: SegmentOrder, machine: int, segment: int) -> Fraction:
    """Aggregate cost of all machines if every segment up to the reference rank fills.

    For each machine, the largest step cost among its segments ranked at or
    before the reference; machines with no such segment contribute 0.
    """
    ref_rank = order.rank_of(machine, segment)
    total = Fraction(0)
    for j, f in enumerate(inst.machines):
        best = Fraction(0)
        for k in range(1, len(f.segments) + 1):
            if order.rank_of(j, k) <= ref_rank:
                c = f.segments[k - 1][1]
                if c > best:
                    best = c
        total += best
    return total


def epsilon_micro(order: SegmentOrder, machine: int, segment: int) -> int:
    """Micro rank realizing the strictly decreasing tiny charges along the fill order."""
    return (order.total + 1) - order.rank_of(machine, segment)


def priority_agent(agents, i: int, pi: dict) -> object:
    """The i-th (1-based) member of the set under the global ordering."""
    ordered = sorted(agents, key=lambda a: pi[a])
    if i < 1 or i > len(ordered):
        raise TooFew(f"asked for element {i} of a {len(ordered)}-element set")
    return ordered[i - 1]
