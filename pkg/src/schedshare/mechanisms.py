"""The three cost-sharing protocols and disruptor-set selection.

All three protocols charge against the same precomputed quantities: the
segment fill order of the online algorithm, the cumulative costs along it,
and the strictly decreasing micro charges. The capacitated protocol is the
single-segment case with genuine over-capacity branches; the step protocol
replaces "full/over capacity" with the excess of the last used segment; the
stochastic protocol adds two rest points on the first two machines and
handles crowds of disruptors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .cost_model import Instance
from .delayed_opt import SegmentOrder, segment_order
from .errors import (
    MissingProbabilities,
    OverCapacity,
    ValidationError,
    WrongMechanism,
    ZeroProbability,
)
from .shares import (
    INFINITE_SHARE,
    ZERO_SHARE,
    ShareValue,
    cumulative_cost,
    epsilon_micro,
    excess,
    last_segment,
)


class MechanismKind(str, Enum):
    CAPACITATED_TWO = "cap2"
    STEP_TWO = "step2"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class AgentUniverse:
    """Registered agents in priority order, the disruptor set, optional arrival probabilities."""

    agents: tuple
    disruptors: frozenset
    probabilities: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "disruptors", frozenset(self.disruptors))
        if len(set(self.agents)) != len(self.agents):
            raise ValidationError("duplicate agent ids")
        if not self.disruptors <= set(self.agents):
            raise ValidationError("disruptors must be registered agents")
        if self.probabilities is not None:
            probs = tuple(float(p) for p in self.probabilities)
            if len(probs) != len(self.agents):
                raise ValidationError("need one probability per agent")
            if any(p < 0 or p > 1 for p in probs):
                raise ValidationError("probabilities must lie in [0, 1]")
            object.__setattr__(self, "probabilities", probs)

    @property
    def pi(self) -> dict:
        """Priority rank per agent; lower rank = higher priority."""
        return {a: i for i, a in enumerate(self.agents)}


@dataclass(frozen=True)
class MechanismSpec:
    """A protocol kind plus everything precomputed from the machine side.

    The precomputation (segment order, cumulative costs, micro ranks, the
    first two machines) depends only on the instance, never on which agents
    show up, so one spec serves every realized agent set.

    ``diagnostic=True`` bypasses the capacity-at-least-4 and
    two-disruptor validations for the empirical no-equilibrium probes.
    """

    kind: MechanismKind
    instance: Instance
    diagnostic: bool = False
    order: SegmentOrder = field(init=False)
    phi: dict = field(init=False)
    eps: dict = field(init=False)
    machine1: Optional[int] = field(init=False)
    machine2: Optional[int] = field(init=False)

    def __post_init__(self):
        inst = self.instance
        for j, f in enumerate(inst.machines):
            costs = [c for _, c in f.segments]
            if any(b >= a for a, b in zip(costs[1:], costs)):
                raise ValidationError(
                    f"machine {j + 1} has equal adjacent step costs; merge segments first"
                )
        if self.kind is MechanismKind.CAPACITATED_TWO:
            for j, f in enumerate(inst.machines):
                if not f.is_capacitated_constant:
                    raise ValidationError(
                        f"machine {j + 1} is not capacitated constant (one segment)"
                    )
                if not self.diagnostic and f.capacity < 4:
                    raise ValidationError(
                        f"machine {j + 1} capacity {f.capacity} below 4"
                    )
        else:
            if not self.diagnostic:
                for j, f in enumerate(inst.machines):
                    if not f.four_step_valid:
                        raise ValidationError(
                            f"machine {j + 1} has a segment shorter than 4"
                        )
        order = segment_order(inst, inst.total_capacity)
        phi: dict = {}
        eps: dict = {}
        for j, f in enumerate(inst.machines):
            for k in range(1, len(f.segments) + 1):
                phi[(j, k)] = cumulative_cost(inst, order, j, k)
                eps[(j, k)] = epsilon_micro(order, j, k)
        ranked = sorted(phi, key=lambda key: order.rank[key])
        for prev, nxt in zip(ranked, ranked[1:]):
            if not phi[prev] < phi[nxt]:
                raise ValidationError("cumulative costs are not strictly increasing")
        mo = order.machine_order()
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "machine1", mo[0] if mo else None)
        object.__setattr__(self, "machine2", mo[1] if len(mo) > 1 else None)

    def phi_share(self, j: int, k: int) -> ShareValue:
        return ShareValue(self.phi[(j, k)])

    def eps_share(self, j: int, k: int) -> ShareValue:
        return ShareValue(Fraction(0), self.eps[(j, k)])


def _split_users(users, disruptors, pi):
    dis = sorted((a for a in users if a in disruptors), key=lambda a: pi[a])
    reg = sorted((a for a in users if a not in disruptors), key=lambda a: pi[a])
    return dis, reg


def share_on_machine(
    spec: MechanismSpec,
    disruptors: frozenset,
    users: set,
    j: int,
    agent,
    pi: Mapping,
    d_present: int,
) -> ShareValue:
    """Share of one agent on machine j given exactly the users of j.

    ``users`` must contain the agent; ``d_present`` is the number of
    disruptors present in the whole game (the full set the protocol can hope
    to see together on one machine).
    """
    f = spec.instance.machines[j]
    load = len(users)
    dis, reg = _split_users(users, disruptors, pi)
    is_dis = agent in disruptors

    if spec.kind is MechanismKind.CAPACITATED_TWO:
        beta = f.capacity
        cost_j = f.segments[0][1]
        if is_dis:
            if load <= beta and len(dis) == d_present and load > len(dis):
                return spec.eps_share(j, 1)
            if load > beta and len(dis) == 1:
                return spec.eps_share(j, 1)
            return spec.phi_share(j, 1)
        if load > beta:
            return INFINITE_SHARE
        if agent != reg[0]:
            return ZERO_SHARE
        if load == beta and not dis:
            return ShareValue(cost_j)
        return spec.phi_share(j, 1)

    # step protocols: loads beyond the represented segments are a caller error
    if load > f.capacity:
        raise OverCapacity(f"load {load} exceeds machine {j + 1} capacity {f.capacity}")
    lam = last_segment(f, load)
    w = excess(f, load)

    if is_dis:
        if spec.kind is MechanismKind.STOCHASTIC:
            if (
                j in (spec.machine1, spec.machine2)
                and w in (0, f.segments[lam - 1][0] - 1)
                and len(dis) == 1
            ):
                return ZERO_SHARE
            if w != 1 and len(dis) >= 2 and reg and agent in dis[:2]:
                return spec.eps_share(j, lam)
            if w == 1 and len(dis) == 1 and lam > 1:
                return spec.eps_share(j, lam - 1)
            return spec.phi_share(j, lam)
        # two known disruptors
        if w != 1 and len(dis) == d_present and load > len(dis):
            return spec.eps_share(j, lam)
        if w == 1 and len(dis) == 1 and lam > 1:
            return spec.eps_share(j, lam - 1)
        return spec.phi_share(j, lam)

    # regular agents: identical for the step and stochastic protocols
    if w == 0 and not dis and agent == reg[0]:
        return ShareValue(f.segments[lam - 1][1])
    if w == 0 and dis and agent == reg[0]:
        return spec.phi_share(j, lam)
    if w == 1 and agent in reg[:2]:
        return spec.phi_share(j, lam)
    if w not in (0, 1) and agent == reg[0]:
        return spec.phi_share(j, lam)
    return ZERO_SHARE


def _shares(spec, disruptors, profile, pi, expected_kinds) -> dict:
    if spec.kind not in expected_kinds:
        raise WrongMechanism(f"spec kind {spec.kind.value} not accepted here")
    present_dis = frozenset(a for a in profile if a in disruptors)
    by_machine: dict[int, set] = {}
    for a, j in profile.items():
        by_machine.setdefault(j, set()).add(a)
    out = {}
    for j, users in by_machine.items():
        for a in users:
            out[a] = share_on_machine(
                spec, disruptors, users, j, a, pi, len(present_dis)
            )
    return out


def shares_capacitated(spec: MechanismSpec, disruptors, profile: Mapping, pi: Mapping) -> dict:
    """Per-agent shares under the capacitated two-disruptor protocol."""
    return _shares(spec, frozenset(disruptors), dict(profile), pi,
                   (MechanismKind.CAPACITATED_TWO,))


def shares_step(spec: MechanismSpec, disruptors, profile: Mapping, pi: Mapping) -> dict:
    """Per-agent shares under the 4-step two-disruptor protocol."""
    return _shares(spec, frozenset(disruptors), dict(profile), pi,
                   (MechanismKind.STEP_TWO,))


def shares_stochastic(spec: MechanismSpec, disruptors, profile: Mapping, pi: Mapping) -> dict:
    """Per-agent shares under the stochastic-arrivals protocol."""
    return _shares(spec, frozenset(disruptors), dict(profile), pi,
                   (MechanismKind.STOCHASTIC,))


def select_disruptors(universe: AgentUniverse) -> frozenset:
    """Choose the disruptor set from the arrival probabilities.

    Identical probabilities p: 3 + floor(3 ln(p N) / -ln(1-p)) agents,
    clamped to [3, N], with p = 1 read as the limit (3 disruptors).
    Heterogeneous: the two most likely agents plus the smallest further
    prefix (by decreasing probability) whose probabilities sum to at least
    3 ln(expected agent count). Natural logarithms throughout.
    """
    if universe.probabilities is None:
        raise MissingProbabilities("disruptor selection needs arrival probabilities")
    probs = universe.probabilities
    if any(p <= 0 for p in probs):
        raise ZeroProbability("automatic selection needs p > 0 for every agent")
    n = len(universe.agents)
    if len(set(probs)) == 1:
        p = probs[0]
        if p >= 1.0:
            size = 3
        else:
            size = 3 + math.floor(3 * math.log(p * n) / -math.log(1.0 - p))
        size = min(n, max(3, size))
        return frozenset(universe.agents[:size])
    by_prob = sorted(range(n), key=lambda i: (-probs[i], i))
    n_tilde = sum(probs)
    if n_tilde <= 1:
        chosen = by_prob[: min(3, n)]
        return frozenset(universe.agents[i] for i in chosen)
    target = 3 * math.log(n_tilde)
    chosen = by_prob[:2]
    acc = 0.0
    for i in by_prob[2:]:
        if acc >= target:
            break
        chosen.append(i)
        acc += probs[i]
    return frozenset(universe.agents[i] for i in chosen)
