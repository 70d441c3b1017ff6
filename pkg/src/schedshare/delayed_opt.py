"""The online assignment algorithm and the segment priority order it induces.

Jobs arrive one at a time. For each job the algorithm finds the smallest
threshold level k at which some machine is still below its optimal target
load for a_k jobs, and gives the job to the smallest-index such machine.
The sequence is independent of the total number of jobs, so the trace for n
jobs is a prefix of the trace for n+1 (checked by tests).

Every run carries cheap internal assertions for the paper-level facts the
rest of the package leans on: the computed level never exceeds the level
that covers the current job count, segments fill contiguously, and the final
cost sits inside the 4x window around the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .cost_model import Instance
from .errors import InfeasibleDemand, UnrankedSegment
from .opt_oracle import OptOracle


@dataclass(frozen=True)
class AssignmentTrace:
    """Per-job machine choices (1-based machine ids) and the final load vector."""

    per_job: tuple[int, ...]
    final_loads: tuple[int, ...]


@dataclass(frozen=True)
class SegmentOrder:
    """Fill order of (machine, segment) pairs, ranks 1..total segment count.

    ``rank[(j, k)]`` uses 0-based machine index j and 1-based segment index k.
    """

    rank: dict[tuple[int, int], int]
    ordered: tuple[tuple[int, int], ...]

    @property
    def total(self) -> int:
        return len(self.ordered)

    def rank_of(self, machine: int, segment: int) -> int:
        try:
            return self.rank[(machine, segment)]
        except KeyError:
            raise UnrankedSegment(f"segment {segment} of machine {machine + 1}")

    def machine_order(self) -> tuple[int, ...]:
        """Machines by first use (0-based indices)."""
        seen: list[int] = []
        for j, _ in self.ordered:
            if j not in seen:
                seen.append(j)
        return tuple(seen)


def _segment_of(cums: list[int], load: int) -> int:
    """1-based segment index containing the given positive load."""
    for k, cum in enumerate(cums, start=1):
        if load <= cum:
            return k
    raise AssertionError("load beyond capacity")


def delayed_opt_assign(
    inst: Instance, n: int, oracle: OptOracle | None = None
) -> AssignmentTrace:
    """Run the online algorithm for n jobs."""
    inst.require_feasible(n)
    oracle = oracle or OptOracle(inst)
    min_scaled = oracle.min_step_cost_scaled()
    m = inst.m
    cums = [f.cumulative_lengths() for f in inst.machines]

    a_vals: list[int] = []
    targets: list[tuple[int, ...]] = []

    def extend_to(k: int) -> None:
        while len(a_vals) <= k:
            kk = len(a_vals)
            bound = (1 << kk) * min_scaled
            a_k = 0
            for q in range(oracle.capacity, -1, -1):
                if oracle.cost_scaled(q) < bound:
                    a_k = q
                    break
            a_vals.append(a_k)
            targets.append(oracle.allocation(a_k))

    loads = [0] * m
    per_job: list[int] = []
    k_cur = 0
    extend_to(0)
    prev_seg: tuple[int, int] | None = None
    for q in range(1, n + 1):
        while True:
            extend_to(k_cur)
            tgt = targets[k_cur]
            j_pick = next((j for j in range(m) if loads[j] < tgt[j]), None)
            if j_pick is not None:
                break
            k_cur += 1
        # level-monotonicity check: the chosen level is covered by the first
        # threshold reaching the current job count
        k_cover = k_cur
        extend_to(k_cover)
        while a_vals[k_cover] < q:
            k_cover += 1
            extend_to(k_cover)
        assert k_cur <= k_cover
        loads[j_pick] += 1
        per_job.append(j_pick + 1)
        # contiguity: a new segment opens only after the previous one filled
        seg = (j_pick, _segment_of(cums[j_pick], loads[j_pick]))
        if prev_seg is not None and seg != prev_seg:
            pj, pk = prev_seg
            assert loads[pj] >= cums[pj][pk - 1], "previous segment left unfilled"
        prev_seg = seg

    if n >= 1:
        _assert_cost_window(inst, oracle, tuple(loads), n, a_vals, extend_to, min_scaled)
    return AssignmentTrace(tuple(per_job), tuple(loads))


def _assert_cost_window(inst, oracle, loads, n, a_vals, extend_to, min_scaled):
    k = 0
    extend_to(k)
    while a_vals[k] < n:
        k += 1
        extend_to(k)
    onl = _scaled_cost_of_loads(inst, oracle, loads)
    assert onl < (1 << (k + 1)) * min_scaled, "online cost outside 2^(k+1) bound"
    if k >= 1 and n > a_vals[k - 1]:
        assert oracle.cost_scaled(n) >= (1 << (k - 1)) * min_scaled


def _scaled_cost_of_loads(inst: Instance, oracle: OptOracle, loads) -> int:
    total = 0
    for j, load in enumerate(loads):
        if load == 0:
            continue
        cums = inst.machines[j].cumulative_lengths()
        total += oracle._costs[j][_segment_of(cums, load) - 1]
    return total


def segment_order(
    inst: Instance, horizon: int, oracle: OptOracle | None = None
) -> SegmentOrder:
    """Rank every segment by the arrival time of its first job.

    The ranking is produced by simulating the online algorithm out to total
    capacity, so segments untouched within the horizon get the ranks they
    would receive if demand kept growing; the horizon argument is validated
    but does not change the (prefix-consistent) order.
    """
    inst.require_feasible(horizon)
    oracle = oracle or OptOracle(inst)
    trace = delayed_opt_assign(inst, inst.total_capacity, oracle)
    cums = [f.cumulative_lengths() for f in inst.machines]
    loads = [0] * inst.m
    rank: dict[tuple[int, int], int] = {}
    ordered: list[tuple[int, int]] = []
    for mid in trace.per_job:
        j = mid - 1
        loads[j] += 1
        key = (j, _segment_of(cums[j], loads[j]))
        if key not in rank:
            rank[key] = len(ordered) + 1
            ordered.append(key)
    assert len(ordered) == sum(len(f.segments) for f in inst.machines)
    return SegmentOrder(rank, tuple(ordered))


def competitive_ratio(inst: Instance, n_range) -> Fraction:
    """Largest online-to-optimal cost ratio over the given job counts."""
    ns = sorted(set(int(n) for n in n_range))
    if not ns or ns[0] < 1:
        raise ValueError("job counts must be positive")
    inst.require_feasible(ns[-1])
    oracle = OptOracle(inst)
    trace = delayed_opt_assign(inst, ns[-1], oracle)
    best = Fraction(0)
    loads = [0] * inst.m
    upto = 0
    for n in ns:
        while upto < n:
            loads[trace.per_job[upto] - 1] += 1
            upto += 1
        onl = _scaled_cost_of_loads(inst, oracle, loads)
        ratio = Fraction(onl, oracle.cost_scaled(n))
        if ratio > best:
            best = ratio
    return best
