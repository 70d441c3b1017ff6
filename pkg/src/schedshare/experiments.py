"""Price-of-anarchy measurements, Monte Carlo expected PoA, and diagnostics.

The expected-PoA harness draws independent realizations of the agent set
from per-agent arrival probabilities. Realized sets repeat, and the game for
a realization is deterministic, so results are cached by the present-set
bitmask; the sampling statistics are unchanged. Per-sample worst equilibria
come from exhaustive enumeration when the profile space fits the guard, and
otherwise from the structural bound path: with at least three disruptors
every equilibrium shares the online algorithm's allocation, so the worst
charge is enveloped machine-by-machine over disruptor placements; with at
most two, the (regulars + disruptors) multiple of the online cost is used
and flagged as a bound rather than an exact value.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .cost_model import INFINITE, Instance, serialize_cost
from .delayed_opt import delayed_opt_assign
from .errors import NoEquilibrium, TooLarge, ValidationError
from .game_engine import ENUMERATION_GUARD, Game, Profile
from .mechanisms import AgentUniverse, MechanismKind, MechanismSpec
from .opt_oracle import OptOracle
from .shares import excess, last_segment


def instance_digest(inst: Instance) -> str:
    payload = json.dumps([serialize_cost(f) for f in inst.machines], sort_keys=True)
    return hashlib.md5(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class PoAReport:
    instance: str
    mechanism: str
    n_agents: int
    worst_charged_macro: Fraction
    opt_cost: Fraction
    poa: Fraction
    pne_count: int
    claim1_holds: Optional[bool]


def poa(game: Game, guard: int = ENUMERATION_GUARD) -> PoAReport:
    """Worst-equilibrium charged cost over the optimal social cost.

    Micro (rank-only) parts never enter the ratio; they are tiny by
    construction and reported separately elsewhere.
    """
    records = game.enumerate_pne_detailed(guard)
    if not records:
        raise NoEquilibrium("no pure Nash equilibrium in this game")
    worst = max(macro for _, macro, _ in records)
    assert worst != INFINITE, "an equilibrium charged infinity"
    if game.n == 0:
        opt_cost = Fraction(0)
        ratio = Fraction(1)
    else:
        opt_cost = game.oracle.cost(game.n)
        ratio = worst / opt_cost
    claim1: Optional[bool] = None
    if game.spec.kind in (MechanismKind.CAPACITATED_TWO, MechanismKind.STEP_TWO):
        a_loads = game.delayed_opt_trace().final_loads
        claim1 = all(p.loads(game.m) == a_loads for p, _, _ in records)
    return PoAReport(
        instance=instance_digest(game.instance),
        mechanism=game.spec.kind.value,
        n_agents=game.n,
        worst_charged_macro=worst,
        opt_cost=opt_cost,
        poa=ratio,
        pne_count=len(records),
        claim1_holds=claim1,
    )


# -- structural bound path (stochastic mechanism) ---------------------------


def _machine_worst_macro(spec: MechanismSpec, j: int, load: int, d_j: int) -> Fraction:
    """Macro charge machine j collects under the stochastic rules at this load
    with d_j disruptors aboard; placement within the machine cannot change it."""
    if load == 0:
        return Fraction(0)
    f = spec.instance.machines[j]
    lam = last_segment(f, load)
    w = excess(f, load)
    phi = spec.phi[(j, lam)]
    step_cost = f.segments[lam - 1][1]
    beta_lam = f.segments[lam - 1][0]
    reg = load - d_j
    if d_j == 0:
        dis_part = Fraction(0)
    elif d_j == 1:
        if j in (spec.machine1, spec.machine2) and w in (0, beta_lam - 1):
            dis_part = Fraction(0)
        elif w == 1 and lam > 1:
            dis_part = Fraction(0)
        else:
            dis_part = phi
    else:
        if w != 1 and reg >= 1:
            dis_part = (d_j - 2) * phi
        else:
            dis_part = d_j * phi
    if reg == 0:
        reg_part = Fraction(0)
    elif w == 0:
        reg_part = step_cost if d_j == 0 else phi
    elif w == 1:
        reg_part = min(2, reg) * phi
    else:
        reg_part = phi
    return dis_part + reg_part


def _structural_worst(game: Game) -> Fraction:
    """Upper envelope of the worst-equilibrium macro charge without enumeration."""
    trace = game.delayed_opt_trace()
    a_loads = trace.final_loads
    cost_a = Fraction(game.social_cost(Profile.of(
        _assignment_from_loads(game, a_loads), game.pi)))
    d = len(game.present_disruptors)
    r_cnt = game.n - d
    if d <= 2:
        return (r_cnt + d) * cost_a
    best = Fraction(0)
    loads = [x for x in a_loads]

    def rec(j: int, left: int, acc: Fraction):
        nonlocal best
        if j == len(loads) - 1:
            if left <= loads[j]:
                total = acc + _machine_worst_macro(game.spec, j, loads[j], left)
                if total > best:
                    best = total
            return
        for d_j in range(min(left, loads[j]) + 1):
            rec(j + 1, left - d_j, acc + _machine_worst_macro(game.spec, j, loads[j], d_j))

    rec(0, d, Fraction(0))
    return best


def _assignment_from_loads(game: Game, loads) -> dict:
    out = {}
    it = iter(game.present)
    for j, load in enumerate(loads):
        for _ in range(load):
            out[next(it)] = j
    return out


# -- expected price of anarchy ----------------------------------------------


@dataclass(frozen=True)
class SampleRow:
    index: int
    size: int
    d: int
    poa: Fraction
    exact: bool


@dataclass(frozen=True)
class ExpectedPoAReport:
    samples: int
    seed: int
    mean_poa: float
    std_error: float
    bound: float
    n_tilde: float
    d_size: int
    mean_poa_d_le2: float
    mean_poa_d_ge3: float
    count_d_le2: int
    count_d_ge3: int
    lemma6_estimate: float
    lemma6_std_error: float
    exhaustive_count: int
    structural_count: int
    empty_count: int
    skip_empty: bool
    rows: tuple = field(repr=False, default=())


def _sample_mask(seed: int, index: int, probs: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng((seed, index))
    return rng.random(probs.shape[0]) < probs


def _poa_for_present(spec, universe, present, guard):
    """(poa, d, size, exact) for one realized agent set."""
    if not present:
        return Fraction(1), 0, 0, True
    game = Game(universe, present, spec)
    d = len(game.present_disruptors)
    opt_cost = game.oracle.cost(game.n)
    if game.m**game.n <= guard:
        records = game.enumerate_pne_detailed(guard)
        if not records:
            raise NoEquilibrium(
                "stochastic mechanism produced a game with no equilibrium"
            )
        worst = max(macro for _, macro, _ in records)
        return worst / opt_cost, d, game.n, True
    return _structural_worst(game) / opt_cost, d, game.n, False


def _rows_in_range(spec, universe, lo, hi, seed, guard, skip_empty):
    probs = np.array(universe.probabilities, dtype=float)
    agents = universe.agents
    cache: dict = {}
    rows = []
    for idx in range(lo, hi):
        mask = _sample_mask(seed, idx, probs)
        key = mask.tobytes()
        if key not in cache:
            present = tuple(a for a, keep in zip(agents, mask) if keep)
            cache[key] = _poa_for_present(spec, universe, present, guard)
        ratio, d, size, exact = cache[key]
        if size == 0 and skip_empty:
            continue
        rows.append(SampleRow(idx, size, d, ratio, exact))
    return rows


def expected_poa(
    inst: Instance,
    universe: AgentUniverse,
    samples: int,
    seed: int,
    *,
    guard: int = ENUMERATION_GUARD,
    skip_empty: bool = False,
    workers: int = 1,
    keep_rows: bool = False,
) -> ExpectedPoAReport:
    """Monte Carlo estimate of the expected price of anarchy (stochastic mechanism).

    Deterministic for a given seed regardless of worker count: sample i draws
    from its own stream derived from (seed, i) and results merge by index.
    """
    if universe.probabilities is None:
        raise ValidationError("expected_poa needs arrival probabilities")
    spec = MechanismSpec(MechanismKind.STOCHASTIC, inst)
    if workers <= 1:
        rows = _rows_in_range(spec, universe, 0, samples, seed, guard, skip_empty)
    else:
        chunk = (samples + workers - 1) // workers
        payloads = []
        for w in range(workers):
            lo, hi = w * chunk, min(samples, (w + 1) * chunk)
            if lo >= hi:
                break
            payloads.append((universe, inst, spec.kind, lo, hi, seed, guard, skip_empty))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_worker_entry, payloads))
        rows = [row for part in parts for row in part]
    rows.sort(key=lambda r: r.index)

    n_tilde = float(sum(universe.probabilities))
    bound = 3.0 * math.log(n_tilde) + 18.0 if n_tilde > 0 else 18.0
    poas = np.array([float(r.poa) for r in rows], dtype=float)
    sizes = np.array([r.size for r in rows], dtype=float)
    dle2 = np.array([r.d <= 2 for r in rows], dtype=bool)
    mean = float(poas.mean()) if len(rows) else 1.0
    se = float(poas.std(ddof=1) / math.sqrt(len(rows))) if len(rows) > 1 else 0.0
    lemma6_vals = np.where(dle2, sizes, 0.0)
    lemma6 = float(lemma6_vals.mean()) if len(rows) else 0.0
    lemma6_se = (
        float(lemma6_vals.std(ddof=1) / math.sqrt(len(rows))) if len(rows) > 1 else 0.0
    )
    return ExpectedPoAReport(
        samples=samples,
        seed=seed,
        mean_poa=mean,
        std_error=se,
        bound=bound,
        n_tilde=n_tilde,
        d_size=len(universe.disruptors),
        mean_poa_d_le2=float(poas[dle2].mean()) if dle2.any() else 0.0,
        mean_poa_d_ge3=float(poas[~dle2].mean()) if (~dle2).any() else 0.0,
        count_d_le2=int(dle2.sum()),
        count_d_ge3=int((~dle2).sum()),
        lemma6_estimate=lemma6,
        lemma6_std_error=lemma6_se,
        exhaustive_count=sum(1 for r in rows if r.exact),
        structural_count=sum(1 for r in rows if not r.exact),
        empty_count=sum(1 for r in rows if r.size == 0),
        skip_empty=skip_empty,
        rows=tuple(rows) if keep_rows else (),
    )


def _worker_entry(payload):
    universe, inst, kind, lo, hi, seed, guard, skip_empty = payload
    spec = MechanismSpec(kind, inst)
    return _rows_in_range(spec, universe, lo, hi, seed, guard, skip_empty)


# -- competitive sweep -------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    n: int
    online_cost: Fraction
    opt_cost: Fraction
    ratio: Fraction


def competitive_sweep(inst: Instance, n_max: int) -> list[SweepRow]:
    """Online vs optimal cost for every n up to n_max; every ratio must be < 4."""
    inst.require_feasible(n_max)
    oracle = OptOracle(inst)
    trace = delayed_opt_assign(inst, n_max, oracle)
    loads = [0] * inst.m
    rows = []
    for n in range(1, n_max + 1):
        loads[trace.per_job[n - 1] - 1] += 1
        onl = Fraction(0)
        for j, load in enumerate(loads):
            if load:
                f = inst.machines[j]
                onl += f.segments[last_segment(f, load) - 1][1]
        opt_cost = oracle.cost(n)
        ratio = onl / opt_cost
        assert ratio < 4, f"competitive ratio {ratio} at n={n} breaches the bound"
        rows.append(SweepRow(n, onl, opt_cost, ratio))
    return rows


# -- capacity / disruptor-count diagnostic -----------------------------------


@dataclass(frozen=True)
class DiagnosticOutcome:
    n_agents: int
    disruptor_count: int
    pne: tuple

    @property
    def exists(self) -> bool:
        return len(self.pne) > 0


def capacity_diagnostic(
    inst: Instance,
    n_agents: int,
    disruptor_count: int = 2,
    guard: int = ENUMERATION_GUARD,
) -> DiagnosticOutcome:
    """Apply the capacitated rules verbatim with validation bypassed.

    Probes instances with capacities below 4 or with a single disruptor for
    the empirical absence of equilibria.
    """
    agents = tuple(range(n_agents))
    universe = AgentUniverse(agents, frozenset(agents[:disruptor_count]))
    spec = MechanismSpec(MechanismKind.CAPACITATED_TWO, inst, diagnostic=True)
    game = Game(universe, agents, spec)
    pne = game.enumerate_pne(guard)
    return DiagnosticOutcome(n_agents, disruptor_count, tuple(pne))
