"""Shared test utilities: instance builders, brute-force oracles, and an
independently written share-rule evaluator.

The share oracle here deliberately re-states every protocol branch as a
(guard, value) list and asserts exactly one guard fires, so it doubles as
the branch-exclusivity check and stays structurally independent of the
library's evaluator.
"""

from fractions import Fraction

import numpy as np

from schedshare import (
    AgentUniverse,
    Game,
    Instance,
    MechanismKind,
    MechanismSpec,
    StepCostFunction,
)
from schedshare.cost_model import INFINITE, eval_cost
from schedshare.shares import INFINITE_SHARE, ShareValue, excess, last_segment


def cap_machine(cost, beta) -> StepCostFunction:
    return StepCostFunction(((beta, Fraction(cost)),))


def cap_instance(*pairs) -> Instance:
    """pairs of (cost, capacity)."""
    return Instance(tuple(cap_machine(c, b) for c, b in pairs))


def step_instance(*machines) -> Instance:
    """each machine is a list of (length, cost) pairs."""
    return Instance(tuple(
        StepCostFunction(tuple((ln, Fraction(c)) for ln, c in m)) for m in machines
    ))


def fig_a_instance() -> Instance:
    return cap_instance((1, 1), (2, 3), (15, 6))


def fig_b_instance() -> Instance:
    return cap_instance((1, 1), (2, 2), (2, 2), (2, 2), (7, 8))


def random_cap_instance(rng, m_max=3, beta_lo=4, beta_hi=8, cost_hi=64) -> Instance:
    m = int(rng.integers(1, m_max + 1))
    return cap_instance(*(
        (int(rng.integers(1, cost_hi + 1)), int(rng.integers(beta_lo, beta_hi + 1)))
        for _ in range(m)
    ))


def random_step_instance(rng, m_max=3, seg_max=2, len_lo=4, len_hi=8, cost_hi=64,
                         min_cap=0) -> Instance:
    """Strictly increasing step costs within each machine, lengths >= 4.

    ``min_cap`` extends every machine with further segments until it can hold
    that many jobs, mirroring that step functions are total and the listed
    segments must cover the demand horizon.
    """
    m = int(rng.integers(1, m_max + 1))
    machines = []
    for _ in range(m):
        segs = []
        cost = 0
        for _ in range(int(rng.integers(1, seg_max + 1))):
            cost += int(rng.integers(1, cost_hi + 1))
            segs.append((int(rng.integers(len_lo, len_hi + 1)), cost))
        while sum(ln for ln, _ in segs) < min_cap:
            cost += int(rng.integers(1, cost_hi + 1))
            segs.append((int(rng.integers(len_lo, len_hi + 1)), cost))
        machines.append(segs)
    return step_instance(*machines)


def max_step_agents(inst: Instance) -> int:
    """Largest agent count every machine of a step-mechanism game can hold."""
    return min(f.capacity for f in inst.machines)


def random_general_instance(rng, m_max=5, cap_budget=40, cost_hi=64) -> Instance:
    """Arbitrary step instances (no 4-step restriction) for sweep tests."""
    m = int(rng.integers(1, m_max + 1))
    machines = [[] for _ in range(m)]
    budget = int(rng.integers(m, cap_budget + 1))
    costs = [0] * m
    # every machine gets one segment; leftover capacity lands on random machines
    lengths = [[1] for _ in range(m)]
    for _ in range(budget - m):
        i = int(rng.integers(0, m))
        if rng.random() < 0.3 and len(lengths[i]) < 3:
            lengths[i].append(1)
        else:
            lengths[i][-1] += 1
    for i in range(m):
        for ln in lengths[i]:
            costs[i] += int(rng.integers(1, cost_hi + 1))
            machines[i].append((ln, costs[i]))
    return step_instance(*machines)


def make_game(inst: Instance, kind: MechanismKind, n: int, d_count: int,
              probabilities=None, diagnostic=False) -> Game:
    agents = tuple(range(n))
    uni = AgentUniverse(agents, frozenset(agents[:d_count]), probabilities)
    spec = MechanismSpec(kind, inst, diagnostic=diagnostic)
    return Game(uni, agents, spec)


def random_game(rng, kind: MechanismKind, n_hi=8, d_choices=None, m_max=3) -> Game:
    """A random validated game of the given mechanism kind."""
    if kind is MechanismKind.CAPACITATED_TWO:
        inst = random_cap_instance(rng, m_max=m_max)
        n_cap = inst.total_capacity
    else:
        inst = random_step_instance(rng, m_max=m_max)
        n_cap = max_step_agents(inst)
    n = int(rng.integers(2, min(n_hi, n_cap) + 1))
    if kind is MechanismKind.STOCHASTIC:
        d = int(rng.choice(d_choices)) if d_choices is not None else int(
            rng.integers(0, n + 1)
        )
        d = min(d, n)
    else:
        d = 2
    return make_game(inst, kind, n, d)


# -- brute-force optimal allocation ------------------------------------------


def _compositions(total, caps):
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for x in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - x, caps[1:]):
            yield (x,) + rest


def brute_opt(inst: Instance, q: int):
    """(minimum cost, list of minimizing load vectors) by full enumeration."""
    caps = [f.capacity for f in inst.machines]
    best = None
    winners = []
    for loads in _compositions(q, caps):
        cost = Fraction(0)
        for f, load in zip(inst.machines, loads):
            c = eval_cost(f, load)
            assert c != INFINITE
            cost += c
        if best is None or cost < best:
            best, winners = cost, [loads]
        elif cost == best:
            winners.append(loads)
    return best, winners


# -- independently written share rules ----------------------------------------


def _exactly_one(branches, context):
    hits = [thunk for guard, thunk in branches if guard]
    assert len(hits) == 1, f"{len(hits)} protocol branches fired: {context}"
    return hits[0]()


def oracle_share(game: Game, users: frozenset, j: int, agent) -> ShareValue:
    """Share of `agent` among `users` of machine j, re-derived branch by branch."""
    spec = game.spec
    f = spec.instance.machines[j]
    pi = game.pi
    load = len(users)
    dis = sorted((a for a in users if a in game.disruptors), key=pi.get)
    reg = sorted((a for a in users if a not in game.disruptors), key=pi.get)
    d_all = len(game.present_disruptors)
    is_dis = agent in game.disruptors
    if spec.kind is MechanismKind.CAPACITATED_TWO:
        beta = f.capacity
        cost_j = ShareValue(f.segments[0][1])
        eps_j = spec.eps_share(j, 1)
        phi_j = spec.phi_share(j, 1)
        if is_dis:
            b1 = load <= beta and len(dis) == d_all and len(reg) >= 1
            b2 = load > beta and dis == [agent]
            return _exactly_one(
                [
                    (b1, lambda: eps_j),
                    (b2, lambda: eps_j),
                    (not (b1 or b2), lambda: phi_j),
                ],
                (users, j, agent),
            )
        h1 = reg[0]
        return _exactly_one(
            [
                (load <= beta and agent != h1, lambda: ShareValue(Fraction(0))),
                (load == beta and not dis and agent == h1, lambda: cost_j),
                (load == beta and dis and agent == h1, lambda: phi_j),
                (load < beta and agent == h1, lambda: phi_j),
                (load > beta, lambda: INFINITE_SHARE),
            ],
            (users, j, agent),
        )

    if load > f.capacity:
        return INFINITE_SHARE
    lam = last_segment(f, load)
    w = excess(f, load)
    phi = spec.phi_share(j, lam)
    if is_dis:
        if spec.kind is MechanismKind.STOCHASTIC:
            beta_lam = f.segments[lam - 1][0]
            b_rest = (j in (spec.machine1, spec.machine2)
                      and w in (0, beta_lam - 1) and dis == [agent])
            b_eps = (w != 1 and len(dis) >= 2 and len(reg) >= 1
                     and agent in dis[:2])
            b_prev = (w == 1 and dis == [agent] and lam > 1)
            return _exactly_one(
                [
                    (b_rest, lambda: ShareValue(Fraction(0))),
                    (b_eps, lambda: spec.eps_share(j, lam)),
                    (b_prev, lambda: spec.eps_share(j, lam - 1)),
                    (not (b_rest or b_eps or b_prev), lambda: phi),
                ],
                (users, j, agent),
            )
        b_eps = (w != 1 and len(dis) == d_all and len(reg) >= 1)
        b_prev = (w == 1 and dis == [agent] and lam > 1)
        return _exactly_one(
            [
                (b_eps, lambda: spec.eps_share(j, lam)),
                (b_prev, lambda: spec.eps_share(j, lam - 1)),
                (not (b_eps or b_prev), lambda: phi),
            ],
            (users, j, agent),
        )
    h1 = reg[0]
    h2 = reg[1] if len(reg) > 1 else None
    fired = [
        (w == 0 and not dis and agent == h1,
         lambda: ShareValue(f.segments[lam - 1][1])),
        (w == 0 and dis and agent == h1, lambda: phi),
        (w == 1 and agent in (h1, h2), lambda: phi),
        (w not in (0, 1) and agent == h1, lambda: phi),
    ]
    if not any(g for g, _ in fired):
        return ShareValue(Fraction(0))
    return _exactly_one(fired, (users, j, agent))


def oracle_shares(game: Game, profile: dict) -> dict:
    by_machine: dict[int, set] = {}
    for a, j in profile.items():
        by_machine.setdefault(j, set()).add(a)
    out = {}
    for j, users in by_machine.items():
        for a in users:
            out[a] = oracle_share(game, frozenset(users), j, a)
    return out


def oracle_is_nash(game: Game, profile: dict) -> bool:
    """Nash check built purely on the oracle share rules."""
    by_machine: dict[int, set] = {}
    for a, j in profile.items():
        by_machine.setdefault(j, set()).add(a)
    for a, j0 in profile.items():
        current = oracle_share(game, frozenset(by_machine[j0]), j0, a)
        for j in range(game.m):
            if j == j0:
                continue
            users = frozenset(by_machine.get(j, set()) | {a})
            if oracle_share(game, users, j, a) < current:
                return False
    return True


def random_profile(rng, game: Game) -> dict:
    return {a: int(rng.integers(0, game.m)) for a in game.present}
