"""Games, profiles, Nash checks, exhaustive equilibrium search, stability constructions.

A Game freezes one realized agent set against a mechanism spec. Machine
indices are 0-based throughout the Python API; serialization layers add 1.
Hot scans (Nash witness search, exhaustive enumeration, batch audits) run on
the int64 kernel view; the per-agent reference path in ``mechanisms`` backs
everything user-facing and the tests hold the two paths equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np

from . import _kernels as K
from .cost_model import INFINITE, ExtendedCost, Instance, eval_cost
from .delayed_opt import delayed_opt_assign
from .errors import (
    ConstructionNotStable,
    InfeasibleDemand,
    MissingDisruptors,
    TooLarge,
    ValidationError,
)
from .mechanisms import (
    AgentUniverse,
    MechanismKind,
    MechanismSpec,
    share_on_machine,
)
from .opt_oracle import OptOracle, scaled_costs
from .shares import INFINITE_SHARE, ShareValue, excess, last_segment

ENUMERATION_GUARD = 10**7

_MECH_CODE = {
    MechanismKind.CAPACITATED_TWO: K.MECH_CAP,
    MechanismKind.STEP_TWO: K.MECH_STEP,
    MechanismKind.STOCHASTIC: K.MECH_STOCH,
}


@dataclass(frozen=True)
class Profile:
    """Assignment of every present agent to a machine index, in priority order."""

    assignment: tuple

    @staticmethod
    def of(mapping: Mapping, pi: Mapping) -> "Profile":
        items = sorted(mapping.items(), key=lambda kv: pi[kv[0]])
        return Profile(tuple((a, int(j)) for a, j in items))

    def as_dict(self) -> dict:
        return dict(self.assignment)

    def machine_of(self, agent) -> int:
        return dict(self.assignment)[agent]

    def loads(self, m: int) -> tuple[int, ...]:
        out = [0] * m
        for _, j in self.assignment:
            out[j] += 1
        return tuple(out)


@dataclass(frozen=True)
class NashResult:
    is_nash: bool
    witness: Optional[tuple] = None  # (agent, better machine index)


@dataclass(frozen=True)
class BrOutcome:
    status: str  # "converged" | "cycled" | "exhausted"
    profile: Optional[Profile] = None
    rounds: int = 0
    cycle: tuple = ()


class Game:
    """One realized scheduling game: spec + universe + present agents."""

    def __init__(self, universe: AgentUniverse, present, spec: MechanismSpec):
        self.universe = universe
        self.spec = spec
        self.instance: Instance = spec.instance
        present = frozenset(present)
        if not present <= set(universe.agents):
            raise ValidationError("present agents must belong to the universe")
        self.present = tuple(a for a in universe.agents if a in present)
        self.pi = universe.pi
        self.disruptors = universe.disruptors
        self.present_disruptors = tuple(
            a for a in self.present if a in universe.disruptors
        )
        if len(self.present) > self.instance.total_capacity:
            raise InfeasibleDemand(
                f"{len(self.present)} agents exceed total capacity "
                f"{self.instance.total_capacity}"
            )
        if spec.kind is not MechanismKind.CAPACITATED_TWO and not spec.diagnostic:
            # step cost functions are conceptually total; the listed segments
            # must cover the demand horizon on every machine, otherwise the
            # truncation disarms the deviations the equilibrium analysis uses
            for j, f in enumerate(self.instance.machines):
                if f.capacity < len(self.present):
                    raise ValidationError(
                        f"machine {j + 1} lists only {f.capacity} slots for "
                        f"{len(self.present)} agents; add segments to cover the horizon"
                    )
        if spec.kind in (MechanismKind.CAPACITATED_TWO, MechanismKind.STEP_TWO):
            want = 1 if spec.diagnostic and len(universe.disruptors) == 1 else 2
            if len(universe.disruptors) != want:
                raise ValidationError(
                    f"{spec.kind.value} needs exactly {want} disruptors"
                )
            if not universe.disruptors <= set(self.present):
                raise MissingDisruptors(
                    "both known disruptors must be present for this mechanism"
                )
        self._compiled = None
        self._oracle: Optional[OptOracle] = None

    # -- cached helpers -------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.present)

    @property
    def m(self) -> int:
        return self.instance.m

    @property
    def oracle(self) -> OptOracle:
        if self._oracle is None:
            self._oracle = OptOracle(self.instance)
        return self._oracle

    def delayed_opt_trace(self):
        return delayed_opt_assign(self.instance, self.n, self.oracle)

    def compiled(self):
        """Int64 kernel view of the game (built once)."""
        if self._compiled is not None:
            return self._compiled
        inst = self.instance
        den, costs, cums = scaled_costs(inst)
        seg_ptr = [0]
        seg_len: list[int] = []
        seg_cost: list[int] = []
        seg_cum: list[int] = []
        for j, f in enumerate(inst.machines):
            for (ln, _), sc, cum in zip(f.segments, costs[j], cums[j]):
                seg_len.append(ln)
                seg_cost.append(sc)
                seg_cum.append(cum)
            seg_ptr.append(len(seg_len))
        phi = np.zeros(len(seg_len), np.int64)
        eps = np.zeros(len(seg_len), np.int64)
        for j, f in enumerate(inst.machines):
            for k in range(1, len(f.segments) + 1):
                t = seg_ptr[j] + k - 1
                val = self.spec.phi[(j, k)] * den
                assert val.denominator == 1
                phi[t] = int(val)
                eps[t] = self.spec.eps[(j, k)]
        cap = np.array([f.capacity for f in inst.machines], np.int64)
        gd = (
            np.array(seg_ptr, np.int64),
            np.array(seg_len, np.int64),
            np.array(seg_cost, np.int64),
            np.array(seg_cum, np.int64),
            cap,
            phi,
            eps,
        )
        if len(phi) and int(phi.max()) * (self.n + 2) >= 2**61:
            raise ValidationError("scaled costs too large for exact int64 kernels")
        is_dis = np.array(
            [1 if a in self.disruptors else 0 for a in self.present], np.int8
        )
        self._compiled = {
            "mech": _MECH_CODE[self.spec.kind],
            "gd": gd,
            "is_dis": is_dis,
            "den": den,
            "m1": -1 if self.spec.machine1 is None else self.spec.machine1,
            "m2": -1 if self.spec.machine2 is None else self.spec.machine2,
            "d_total": len(self.present_disruptors),
        }
        return self._compiled

    # -- profile conversions ---------------------------------------------

    def profile_array(self, profile) -> np.ndarray:
        d = profile.as_dict() if isinstance(profile, Profile) else dict(profile)
        if set(d) != set(self.present):
            raise ValidationError("profile must assign exactly the present agents")
        arr = np.empty(self.n, np.int64)
        for idx, a in enumerate(self.present):
            j = int(d[a])
            if not 0 <= j < self.m:
                raise ValidationError(f"machine index {j} out of range")
            arr[idx] = j
        return arr

    def profile_from_array(self, arr) -> Profile:
        return Profile(tuple((a, int(arr[i])) for i, a in enumerate(self.present)))

    def profile_from_code(self, code: int) -> Profile:
        digits = [0] * self.n
        for i in range(self.n - 1, -1, -1):
            digits[i] = code % self.m
            code //= self.m
        return Profile(tuple((a, digits[i]) for i, a in enumerate(self.present)))

    # -- share accounting (reference path) --------------------------------

    def shares(self, profile) -> dict:
        """Per-agent ShareValue; machines loaded past their represented
        capacity charge everyone on them infinity under the step protocols."""
        d = profile.as_dict() if isinstance(profile, Profile) else dict(profile)
        by_machine: dict[int, set] = {}
        for a, j in d.items():
            by_machine.setdefault(j, set()).add(a)
        out = {}
        d_present = len(self.present_disruptors)
        for j, users in by_machine.items():
            cap_j = self.instance.machines[j].capacity
            if len(users) > cap_j and self.spec.kind is not MechanismKind.CAPACITATED_TWO:
                for a in users:
                    out[a] = INFINITE_SHARE
                continue
            for a in users:
                out[a] = share_on_machine(
                    self.spec, self.disruptors, users, j, a, self.pi, d_present
                )
        return out

    def social_cost(self, profile) -> ExtendedCost:
        d = profile.as_dict() if isinstance(profile, Profile) else dict(profile)
        loads = [0] * self.m
        for _, j in d.items():
            loads[j] += 1
        total: ExtendedCost = Fraction(0)
        for j, load in enumerate(loads):
            c = eval_cost(self.instance.machines[j], load)
            if c == INFINITE:
                return INFINITE
            total += c
        return total

    def total_charged(self, profile) -> tuple[ExtendedCost, int]:
        macro: ExtendedCost = Fraction(0)
        micro = 0
        for sv in self.shares(profile).values():
            if sv.infinite:
                return INFINITE, 0
            macro += sv.macro
            micro += sv.micro
        return macro, micro

    def share_of_on(self, profile, agent, j: int) -> ShareValue:
        """Share the agent would pay on machine j, everyone else fixed."""
        d = profile.as_dict() if isinstance(profile, Profile) else dict(profile)
        users = {a for a, jj in d.items() if jj == j}
        users.add(agent)
        cap_j = self.instance.machines[j].capacity
        if len(users) > cap_j and self.spec.kind is not MechanismKind.CAPACITATED_TWO:
            return INFINITE_SHARE
        return share_on_machine(
            self.spec, self.disruptors, users, j, agent, self.pi,
            len(self.present_disruptors),
        )

    def best_response(self, profile, agent) -> tuple[int, ShareValue]:
        """Minimizing machine for the agent; ties keep the current machine."""
        d = profile.as_dict() if isinstance(profile, Profile) else dict(profile)
        current = d[agent]
        best_j, best_v = current, self.share_of_on(profile, agent, current)
        for j in range(self.m):
            if j == current:
                continue
            v = self.share_of_on(profile, agent, j)
            if v < best_v:
                best_j, best_v = j, v
        return best_j, best_v

    # -- kernel-backed checks ----------------------------------------------

    def is_nash(self, profile) -> NashResult:
        if self.n == 0:
            return NashResult(True)
        c = self.compiled()
        arr = self.profile_array(profile)
        i, j = K.nash_witness(
            c["mech"], arr, c["is_dis"], self.m, c["gd"], c["m1"], c["m2"], c["d_total"]
        )
        if i < 0:
            return NashResult(True)
        return NashResult(False, (self.present[int(i)], int(j)))

    def enumerate_pne(self, guard: int = ENUMERATION_GUARD) -> list[Profile]:
        return [rec[0] for rec in self.enumerate_pne_detailed(guard)]

    def enumerate_pne_detailed(
        self, guard: int = ENUMERATION_GUARD
    ) -> list[tuple[Profile, ExtendedCost, int]]:
        """All PNE in lexicographic order with their (macro, micro) charges."""
        if self.m**self.n > guard:
            raise TooLarge(
                f"{self.m}^{self.n} profiles exceed the enumeration guard {guard}"
            )
        if self.n == 0:
            return [(Profile(()), Fraction(0), 0)]
        c = self.compiled()
        codes, cmac, cmic = K.enumerate_pne_kernel(
            c["mech"], self.n, self.m, c["is_dis"], c["gd"], c["m1"], c["m2"],
            c["d_total"],
        )
        den = c["den"]
        out = []
        for code, mac, mic in zip(codes.tolist(), cmac.tolist(), cmic.tolist()):
            macro = INFINITE if mac >= int(K.INF_MACRO) else Fraction(mac, den)
            out.append((self.profile_from_code(code), macro, int(mic)))
        return out

    def br_dynamics(self, start, max_rounds: int = 100) -> BrOutcome:
        """Round-robin best responses in priority order until a fixed point."""
        profile = start if isinstance(start, Profile) else Profile.of(start, self.pi)
        seen = {profile.assignment: 0}
        history = [profile]
        for rounds in range(1, max_rounds + 1):
            d = profile.as_dict()
            changed = False
            for a in self.present:
                j, _ = self.best_response(d, a)
                if j != d[a]:
                    d[a] = j
                    changed = True
            profile = Profile.of(d, self.pi)
            if not changed:
                return BrOutcome("converged", profile, rounds)
            if profile.assignment in seen:
                cycle = tuple(history[seen[profile.assignment]:])
                return BrOutcome("cycled", profile, rounds, cycle)
            seen[profile.assignment] = len(history)
            history.append(profile)
        return BrOutcome("exhausted", profile, max_rounds)

    # -- stability constructions -------------------------------------------

    def construct_stable_profile(self) -> Profile:
        """Build the proof profile for the game's mechanism and verify it."""
        if self.n == 0:
            return Profile(())
        profile = self._construct_unverified()
        check = self.is_nash(profile)
        if not check.is_nash:
            raise ConstructionNotStable(
                f"constructed profile failed the Nash check; witness {check.witness}; "
                f"profile {profile.assignment}"
            )
        return profile

    def _construct_unverified(self) -> Profile:
        inst = self.instance
        trace = self.delayed_opt_trace()
        A = list(trace.final_loads)
        used = [j for j in range(self.m) if A[j] > 0]
        dis = [a for a in self.present if a in self.disruptors]
        regs = [a for a in self.present if a not in self.disruptors]
        if len(used) == 1:
            only = used[0]
            return Profile.of({a: only for a in self.present}, self.pi)
        r = trace.per_job[-1] - 1
        lam = {j: last_segment(inst.machines[j], A[j]) for j in used}
        w = {j: excess(inst.machines[j], A[j]) for j in used}
        # machines by increasing micro charge = decreasing rank of last used segment
        eps_sorted = sorted(used, key=lambda j: -self.spec.order.rank[(j, lam[j])])
        assert eps_sorted[0] == r

        kind = self.spec.kind
        if kind is MechanismKind.CAPACITATED_TWO:
            mo = [j for j in self.spec.order.machine_order() if A[j] > 0]
            pos = mo.index(r)
            if A[r] <= 2 and pos > 0:
                dis_machine = mo[pos - 1]
            else:
                dis_machine = r
            spots = {dis_machine: list(dis)}
            return self._place(A, spots, special=r, topslots=1)

        if kind is MechanismKind.STEP_TWO:
            if w[r] != 1 and A[r] > 2:
                spots = {r: list(dis)}
                return self._place(A, spots, special=r, topslots=1)
            spots = {eps_sorted[1]: list(dis)}
            return self._place(A, spots, special=r, topslots=min(2, A[r]))

        # stochastic protocol
        d = len(dis)
        beta_last = {j: inst.machines[j].segments[lam[j] - 1][0] for j in used}
        if d == 0:
            if w[r] != beta_last[r] - 1:
                return self._place(A, {}, special=r, topslots=2 if w[r] == 1 else 1)
            j = self._max_cost_machine(A, lam, used)
            if j != r:
                A[j] -= 1
                A[r] += 1
            return self._place(A, {}, special=j, topslots=1)
        f = (
            self.spec.machine1
            if self.spec.machine1 is not None and self.spec.machine1 != r
            else self.spec.machine2
        )
        assert f is not None and A[f] > 0
        if d == 1:
            if w[r] != beta_last[r] - 1:
                return self._place(
                    A, {f: list(dis)}, special=r, topslots=2 if w[r] == 1 else 1
                )
            j = self._max_cost_machine(A, lam, used)
            phi_f = self.spec.phi[(f, lam[f])]
            cost_j = inst.machines[j].segments[lam[j] - 1][1]
            if phi_f > cost_j:
                j = f
            if j != r:
                A[j] -= 1
                A[r] += 1
            return self._place(A, {f: list(dis)}, special=j, topslots=1)
        spots = self._stochastic_spots(A, used, r, f, w, dis, eps_sorted)
        topslots = 2 if (w[r] == 1 or A[r] == 2) and A[r] >= 2 else 1
        return self._place(A, spots, special=r, topslots=topslots)

    def _max_cost_machine(self, A, lam, used):
        best, best_cost = None, None
        for j in used:
            c = self.instance.machines[j].segments[lam[j] - 1][1]
            if best_cost is None or c > best_cost:
                best, best_cost = j, c
        return best

    def _stochastic_spots(self, A, used, r, f, w, dis, eps_sorted):
        """Disruptor seats for two or more present disruptors.

        Pairs go to machines by increasing micro charge; with an odd count
        the lowest-priority disruptor is held back for a rest point on the
        first-two machine f; overflow falls back to the last machine and
        then anywhere with room.
        """
        d = len(dis)
        spots: dict[int, list] = {j: [] for j in used}
        free = {j: A[j] for j in used}
        queue = list(dis)
        reserved = queue.pop() if d % 2 == 1 else None
        case1 = w[r] != 1 and A[r] > 2
        case3 = w[r] == 1 and A[r] > 2
        pair_machines = [j for j in eps_sorted if (case1 or j != r)]
        if reserved is not None:
            pair_machines = [j for j in pair_machines if j != f]
        for jm in pair_machines:
            if len(queue) < 2:
                break
            if free[jm] < 2:
                continue
            spots[jm] += [queue.pop(0), queue.pop(0)]
            free[jm] -= 2
        if queue and not case1:
            if A[r] == 2 and len(queue) >= 2 and free[r] >= 2:
                spots[r] += [queue.pop(0), queue.pop(0)]
                free[r] -= 2
            elif A[r] == 1 and free[r] >= 1:
                spots[r].append(queue.pop(0))
                free[r] -= 1
            elif case3 and len(queue) >= 2 and free[r] >= 2:
                spots[r] += [queue.pop(0), queue.pop(0)]
                free[r] -= 2
        if reserved is not None and free[f] >= 1:
            spots[f].append(reserved)
            free[f] -= 1
            reserved = None
        if queue and len(spots[f]) == 1 and free[f] >= 1:
            spots[f].append(queue.pop(0))
            free[f] -= 1
        if reserved is not None:
            queue.append(reserved)
        for jm in sorted(used):
            while queue and free[jm] > 0:
                spots[jm].append(queue.pop(0))
                free[jm] -= 1
        assert not queue, "disruptors exceed the allocation's capacity"
        if case3 and len(spots[r]) >= 2:
            self._promote_top_pair(spots, r, dis)
        return spots

    def _promote_top_pair(self, spots, r, dis):
        """Make sure the two highest-priority disruptors sit on machine r."""
        for want in dis[:2]:
            if want in spots[r]:
                continue
            donor = next(j for j in spots if want in spots[j])
            swap_out = next(x for x in spots[r] if x not in dis[:2])
            spots[r][spots[r].index(swap_out)] = want
            spots[donor][spots[donor].index(want)] = swap_out

    def _place(self, loads, dis_spots, special: int, topslots: int) -> Profile:
        """Seat regulars so the non-zero payers are the globally highest
        priority agents, with the lowest of those on the special machine."""
        regs = [a for a in self.present if a not in self.disruptors]
        reg_slots = {}
        for j in range(self.m):
            taken = len(dis_spots.get(j, []))
            assert taken <= loads[j]
            if loads[j] - taken > 0:
                reg_slots[j] = loads[j] - taken
        assert sum(reg_slots.values()) == len(regs)
        payers = {}
        for j in sorted(reg_slots):
            payers[j] = min(topslots, reg_slots[j]) if j == special else 1
        u = sum(payers.values())
        top, rest = regs[:u], regs[u:]
        k_s = payers.get(special, 0)
        sp_top = top[u - k_s:] if k_s else []
        others = iter(top[: u - k_s])
        assignment: dict = {}
        remaining = dict(reg_slots)
        for j in sorted(payers):
            if j == special:
                continue
            assignment[next(others)] = j
            remaining[j] -= 1
        for a in sp_top:
            assignment[a] = special
        if k_s:
            remaining[special] -= k_s
        rest_iter = iter(rest)
        for j in sorted(remaining):
            for _ in range(remaining[j]):
                assignment[next(rest_iter)] = j
        for j, agents in dis_spots.items():
            for a in agents:
                assignment[a] = j
        return Profile.of(assignment, self.pi)
