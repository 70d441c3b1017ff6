"""Scenario files: parsing, validation, and resolution into library objects.

A scenario is one JSON object describing machines, the agent universe, the
mechanism, and experiment knobs. Validation is strict: unknown fields are
rejected and every error names the offending path. Machine indices are
1-based in files and CSV output, 0-based inside the library.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .cost_model import Instance, StepCostFunction, as_fraction, serialize_cost
from .errors import ParseError, SchemaError, ValidationError
from .mechanisms import AgentUniverse, MechanismKind, select_disruptors

_TOP_FIELDS = {
    "machines",
    "agents",
    "disruptors",
    "probabilities",
    "mechanism",
    "seed",
    "samples",
    "nOverride",
    "profile",
}


@dataclass(frozen=True)
class Scenario:
    instance: Instance
    agents: tuple
    disruptors: object  # "auto" or tuple of agent ids
    probabilities: Optional[tuple]
    mechanism: MechanismKind
    seed: int
    samples: int
    n_override: Optional[int]
    profile: Optional[dict]  # agent -> 0-based machine index


def _fail(path: str, msg: str):
    raise SchemaError(f"{path}: {msg}")


def _expect(cond, path, msg):
    if not cond:
        _fail(path, msg)


def _parse_cost(value, path) -> Fraction:
    try:
        c = as_fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        _fail(path, f"cannot parse {value!r} as a rational")
    if c <= 0:
        _fail(path, "cost must be positive")
    return c


def _parse_machine(obj, path) -> StepCostFunction:
    _expect(isinstance(obj, dict), path, "machine must be an object")
    unknown = set(obj) - {"segments", "tail"}
    _expect(not unknown, path, f"unknown fields {sorted(unknown)}")
    segs = obj.get("segments")
    _expect(isinstance(segs, list) and segs, f"{path}.segments",
            "need a non-empty list of segments")
    tail = obj.get("tail", "infinite")
    _expect(tail == "infinite", f"{path}.tail", "only 'infinite' tails are supported")
    parsed = []
    for i, seg in enumerate(segs):
        spath = f"{path}.segments[{i}]"
        _expect(isinstance(seg, dict), spath, "segment must be an object")
        unknown = set(seg) - {"len", "cost"}
        _expect(not unknown, spath, f"unknown fields {sorted(unknown)}")
        ln = seg.get("len")
        _expect(isinstance(ln, int) and ln > 0, f"{spath}.len",
                "length must be a positive integer")
        parsed.append((ln, _parse_cost(seg.get("cost"), f"{spath}.cost")))
    try:
        return StepCostFunction(tuple(parsed))
    except ValidationError as exc:
        _fail(path, str(exc))


def parse_scenario(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    _expect(isinstance(raw, dict), "$", "scenario must be a JSON object")
    unknown = set(raw) - _TOP_FIELDS
    _expect(not unknown, "$", f"unknown fields {sorted(unknown)}")
    for req in ("machines", "agents", "mechanism"):
        _expect(req in raw, f"$.{req}", "required field missing")

    machines = raw["machines"]
    _expect(isinstance(machines, list) and machines, "$.machines",
            "need a non-empty list of machines")
    inst = Instance(tuple(
        _parse_machine(mobj, f"$.machines[{i}]") for i, mobj in enumerate(machines)
    ))

    agents_raw = raw["agents"]
    if isinstance(agents_raw, int):
        _expect(agents_raw >= 0, "$.agents", "agent count must be nonnegative")
        agents = tuple(f"a{i + 1}" for i in range(agents_raw))
    else:
        _expect(isinstance(agents_raw, list), "$.agents", "must be a count or a list")
        _expect(all(isinstance(a, str) for a in agents_raw), "$.agents",
                "agent ids must be strings")
        _expect(len(set(agents_raw)) == len(agents_raw), "$.agents",
                "agent ids must be unique")
        agents = tuple(agents_raw)

    mech_raw = raw["mechanism"]
    kinds = {k.value: k for k in MechanismKind}
    _expect(mech_raw in kinds, "$.mechanism", f"must be one of {sorted(kinds)}")
    mechanism = kinds[mech_raw]
    if mechanism is MechanismKind.CAPACITATED_TWO:
        for i, f in enumerate(inst.machines):
            _expect(f.is_capacitated_constant, f"$.machines[{i}]",
                    "capacitated mechanism requires exactly one segment per machine")

    dis_raw = raw.get("disruptors", "auto")
    if dis_raw != "auto":
        _expect(isinstance(dis_raw, list), "$.disruptors", "must be 'auto' or a list")
        bad = [a for a in dis_raw if a not in agents]
        _expect(not bad, "$.disruptors", f"unknown agents {bad}")
        _expect(len(set(dis_raw)) == len(dis_raw), "$.disruptors", "duplicates")
        dis = tuple(dis_raw)
    else:
        dis = "auto"

    probs_raw = raw.get("probabilities")
    probabilities: Optional[tuple] = None
    if probs_raw is not None:
        if isinstance(probs_raw, (int, float)):
            _expect(0 <= probs_raw <= 1, "$.probabilities", "must lie in [0, 1]")
            probabilities = tuple(float(probs_raw) for _ in agents)
        else:
            _expect(isinstance(probs_raw, list), "$.probabilities",
                    "must be a scalar or a list")
            _expect(len(probs_raw) == len(agents), "$.probabilities",
                    "need one probability per agent")
            for i, p in enumerate(probs_raw):
                _expect(isinstance(p, (int, float)) and 0 <= p <= 1,
                        f"$.probabilities[{i}]", "must lie in [0, 1]")
            probabilities = tuple(float(p) for p in probs_raw)
    if mechanism is MechanismKind.STOCHASTIC:
        _expect(probabilities is not None, "$.probabilities",
                "stochastic mechanism requires arrival probabilities")

    seed = raw.get("seed", 0)
    _expect(isinstance(seed, int), "$.seed", "must be an integer")
    samples = raw.get("samples", 1000)
    _expect(isinstance(samples, int) and samples > 0, "$.samples",
            "must be a positive integer")
    n_override = raw.get("nOverride")
    if n_override is not None:
        _expect(isinstance(n_override, int) and n_override >= 0, "$.nOverride",
                "must be a nonnegative integer")

    profile_raw = raw.get("profile")
    profile: Optional[dict] = None
    if profile_raw is not None:
        _expect(isinstance(profile_raw, dict), "$.profile", "must be an object")
        profile = {}
        for a, mid in profile_raw.items():
            _expect(a in agents, f"$.profile.{a}", "unknown agent")
            _expect(isinstance(mid, int) and 1 <= mid <= inst.m, f"$.profile.{a}",
                    f"machine id must be in 1..{inst.m}")
            profile[a] = mid - 1
        _expect(set(profile) == set(agents), "$.profile",
                "profile must assign every agent")

    return Scenario(
        instance=inst,
        agents=agents,
        disruptors=dis,
        probabilities=probabilities,
        mechanism=mechanism,
        seed=seed,
        samples=samples,
        n_override=n_override,
        profile=profile,
    )


def apply_n_override(scn: Scenario, n: Optional[int]) -> Scenario:
    """Shrink or regenerate the agent list to n agents (CLI --n)."""
    n = scn.n_override if n is None else n
    if n is None or n == len(scn.agents):
        return scn
    if all(a == f"a{i + 1}" for i, a in enumerate(scn.agents)):
        agents = tuple(f"a{i + 1}" for i in range(n))
    else:
        if n > len(scn.agents):
            raise SchemaError("$.nOverride: cannot exceed the explicit agent list")
        agents = scn.agents[:n]
    if scn.disruptors != "auto":
        missing = [d for d in scn.disruptors if d not in agents]
        if missing:
            raise SchemaError(f"$.nOverride: drops listed disruptors {missing}")
    probabilities = scn.probabilities
    if probabilities is not None:
        if len(set(probabilities)) == 1:
            probabilities = tuple(probabilities[0] for _ in range(n))
        elif n <= len(probabilities):
            probabilities = probabilities[:n]
        else:
            raise SchemaError("$.nOverride: cannot extend per-agent probabilities")
    return replace(scn, agents=agents, probabilities=probabilities, profile=None,
                   n_override=None)


def scenario_universe(scn: Scenario) -> AgentUniverse:
    """Resolve the agent universe, selecting disruptors when set to 'auto'."""
    if scn.disruptors != "auto":
        return AgentUniverse(scn.agents, frozenset(scn.disruptors), scn.probabilities)
    if scn.mechanism is MechanismKind.STOCHASTIC:
        base = AgentUniverse(scn.agents, frozenset(), scn.probabilities)
        return AgentUniverse(scn.agents, select_disruptors(base), scn.probabilities)
    if len(scn.agents) < 2:
        raise SchemaError("$.disruptors: 'auto' needs at least two agents")
    return AgentUniverse(scn.agents, frozenset(scn.agents[:2]), scn.probabilities)


def serialize_scenario(scn: Scenario) -> dict:
    """Canonical JSON form (round-trips through parse_scenario)."""
    out = {
        "machines": [serialize_cost(f) for f in scn.instance.machines],
        "agents": list(scn.agents),
        "disruptors": "auto" if scn.disruptors == "auto" else list(scn.disruptors),
        "mechanism": scn.mechanism.value,
        "seed": scn.seed,
        "samples": scn.samples,
    }
    if scn.probabilities is not None:
        out["probabilities"] = list(scn.probabilities)
    if scn.n_override is not None:
        out["nOverride"] = scn.n_override
    if scn.profile is not None:
        out["profile"] = {a: j + 1 for a, j in scn.profile.items()}
    return out
