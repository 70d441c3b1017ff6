"""Minimum-social-cost allocations, thresholds, and target loads.

The oracle answers "what is the cheapest way to put q identical jobs on the
machines" for every q up to total capacity, via a suffix DP over machines.
All arithmetic is exact: step costs are scaled by the least common multiple
of their denominators and the DP runs on Python integers.

Thresholds a_k are the largest job counts whose optimal cost stays below
2^k in normalized units (minimum step cost = 1); the per-k optimal target
loads drive the online assignment algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .cost_model import INFINITE, ExtendedCost, Instance, eval_cost
from .errors import InfeasibleDemand

_INF = math.inf


def scaled_costs(inst: Instance) -> tuple[int, list[list[int]], list[list[int]]]:
    """Integer view of an instance.

    Returns ``(den, costs, cums)`` where every step cost times ``den`` is an
    integer; ``costs[j][k]`` is the scaled cost of machine j's k-th segment
    and ``cums[j][k]`` the capacity through that segment.
    """
    den = 1
    for f in inst.machines:
        for _, c in f.segments:
            den = den * c.denominator // math.gcd(den, c.denominator)
    costs, cums = [], []
    for f in inst.machines:
        costs.append([int(c * den) for _, c in f.segments])
        cums.append(f.cumulative_lengths())
    return den, costs, cums


def _cost_at(costs_j: list[int], cums_j: list[int], load: int):
    if load == 0:
        return 0
    for cum, c in zip(cums_j, costs_j):
        if load <= cum:
            return c
    return _INF


@dataclass(frozen=True)
class ThresholdEntry:
    k: int
    a_k: int
    targets: tuple[int, ...]


@dataclass(frozen=True)
class ThresholdTable:
    entries: tuple[ThresholdEntry, ...]
    normalized_scale: Fraction

    def a_values(self) -> tuple[int, ...]:
        return tuple(e.a_k for e in self.entries)


class OptOracle:
    """Suffix DP giving optimal cost and allocation for every job count.

    The reconstruction breaks ties toward the lexicographically greatest load
    vector in machine-index order (lower-index machines packed first), which
    pins a single optimal family; the per-k target loads are read off it.
    """

    def __init__(self, inst: Instance):
        self.inst = inst
        self.den, self._costs, self._cums = scaled_costs(inst)
        self.capacity = inst.total_capacity
        m = inst.m
        caps = [f.capacity for f in inst.machines]
        # g[j][t]: min scaled cost of putting t jobs on machines j..m-1
        g = [[_INF] * (self.capacity + 1) for _ in range(m + 1)]
        g[m][0] = 0
        suffix_cap = 0
        for j in range(m - 1, -1, -1):
            suffix_cap += caps[j]
            for t in range(suffix_cap + 1):
                best = _INF
                hi = min(t, caps[j])
                for x in range(hi + 1):
                    rest = g[j + 1][t - x]
                    if rest is _INF or rest == _INF:
                        continue
                    cand = _cost_at(self._costs[j], self._cums[j], x) + rest
                    if cand < best:
                        best = cand
                g[j][t] = best
        self._g = g
        self._caps = caps

    def cost_scaled(self, q: int) -> int:
        """Scaled optimal cost for q jobs; raises when q is infeasible."""
        self.inst.require_feasible(q)
        c = self._g[0][q]
        assert c != _INF
        return c

    def cost(self, q: int) -> Fraction:
        return Fraction(self.cost_scaled(q), self.den)

    def allocation(self, q: int) -> tuple[int, ...]:
        """Lexicographically greatest cost-minimizing load vector for q jobs."""
        self.inst.require_feasible(q)
        loads = []
        rem = q
        for j in range(self.inst.m):
            target = self._g[j][rem]
            pick = None
            for x in range(min(rem, self._caps[j]), -1, -1):
                rest = self._g[j + 1][rem - x]
                if rest == _INF:
                    continue
                if _cost_at(self._costs[j], self._cums[j], x) + rest == target:
                    pick = x
                    break
            assert pick is not None
            loads.append(pick)
            rem -= pick
        assert rem == 0
        return tuple(loads)

    def min_step_cost_scaled(self) -> int:
        return min(c for costs_j in self._costs for c in costs_j)


def opt_allocation(inst: Instance, q: int) -> tuple[tuple[int, ...], ExtendedCost]:
    """Optimal load vector and its cost for q jobs (see OptOracle tie-break)."""
    oracle = OptOracle(inst)
    return oracle.allocation(q), oracle.cost(q)


def social_cost(inst: Instance, loads) -> ExtendedCost:
    """Total machine cost generated by a load vector."""
    total: ExtendedCost = Fraction(0)
    for f, load in zip(inst.machines, loads):
        c = eval_cost(f, load)
        if c is INFINITE or c == INFINITE:
            return INFINITE
        total += c
    return total


def thresholds(inst: Instance, n: int, oracle: OptOracle | None = None) -> ThresholdTable:
    """Threshold table a_0, a_1, ... up to the first a_k >= n.

    a_k is the largest q whose optimal cost is below 2^k in normalized units;
    the comparison is done exactly against 2^k times the minimum step cost.
    """
    inst.require_feasible(n)
    oracle = oracle or OptOracle(inst)
    min_scaled = oracle.min_step_cost_scaled()
    entries = []
    k = 0
    while True:
        bound = (1 << k) * min_scaled
        a_k = 0
        for q in range(oracle.capacity, -1, -1):
            if oracle.cost_scaled(q) < bound:
                a_k = q
                break
        entries.append(ThresholdEntry(k, a_k, oracle.allocation(a_k)))
        if a_k >= n:
            break
        k += 1
    assert entries[0].a_k == 0, "normalized a_0 must be 0"
    return ThresholdTable(tuple(entries), Fraction(1, 1) / inst.min_step_cost())
