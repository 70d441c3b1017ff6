from fractions import Fraction

import numpy as np
import pytest

from schedshare import Game, AgentUniverse, MechanismKind, MechanismSpec, Profile
from schedshare.cost_model import INFINITE
from schedshare.errors import (
    ConstructionNotStable,
    MissingDisruptors,
    TooLarge,
    ValidationError,
)
from schedshare.shares import ShareValue

from helpers import (
    cap_instance,
    make_game,
    oracle_is_nash,
    random_game,
    random_profile,
    step_instance,
)


def worked_game():
    return make_game(cap_instance((2, 4), (3, 5)), MechanismKind.CAPACITATED_TWO, 7, 2)


def test_game_validation():
    inst = cap_instance((2, 4), (3, 5))
    spec = MechanismSpec(MechanismKind.CAPACITATED_TWO, inst)
    agents = tuple(range(4))
    with pytest.raises(ValidationError):
        Game(AgentUniverse(agents, frozenset({0, 1, 2})), agents, spec)
    with pytest.raises(MissingDisruptors):
        Game(AgentUniverse(agents, frozenset({0, 1})), agents[1:], spec)
    with pytest.raises(ValidationError):
        MechanismSpec(MechanismKind.CAPACITATED_TWO, cap_instance((2, 3)))
    with pytest.raises(ValidationError):
        MechanismSpec(MechanismKind.STEP_TWO, step_instance([(3, 1), (4, 2)]))
    with pytest.raises(ValidationError):
        MechanismSpec(MechanismKind.STEP_TWO, step_instance([(4, 1), (4, 1)]))


def test_social_cost_and_charges():
    game = worked_game()
    d1, d2, r1, r2, r3, r4, r5 = game.present
    empty_game = make_game(
        cap_instance((2, 4), (3, 5)), MechanismKind.STOCHASTIC, 0, 0
    )
    assert empty_game.social_cost({}) == 0
    assert empty_game.total_charged({}) == (Fraction(0), 0)
    overload = {a: 0 for a in game.present}
    assert game.social_cost(overload) == INFINITE
    assert game.total_charged(overload)[0] == INFINITE


def test_best_response_examples():
    game = worked_game()
    d1, d2, r1, r2, r3, r4, r5 = game.present
    prof = {r1: 0, r2: 0, r3: 0, r4: 0, r5: 1, d1: 1, d2: 1}
    # r5 pays the cumulative cost of its machine; moving overloads the other
    j, v = game.best_response(prof, r5)
    assert j == 1 and v == ShareValue(Fraction(3))
    # an agent at a unique minimum stays put
    j, _ = game.best_response(prof, r2)
    assert j == 0
    # ties keep the current machine
    tie_game = make_game(cap_instance((2, 4), (2, 4)), MechanismKind.STOCHASTIC, 2, 0)
    x, y = tie_game.present
    assert tie_game.spec.phi[(0, 1)] != tie_game.spec.phi[(1, 1)]
    prof2 = {x: 1, y: 1}
    jx, _ = tie_game.best_response(prof2, y)
    assert jx == 1  # paying zero already; zero elsewhere is not better


def test_is_nash_single_machine():
    game = make_game(cap_instance((3, 6)), MechanismKind.STOCHASTIC, 4, 1)
    prof = {a: 0 for a in game.present}
    assert game.is_nash(Profile.of(prof, game.pi)).is_nash


def test_is_nash_disruptor_witness():
    # a machine never used by the online run, full of regulars: a disruptor
    # elsewhere profits by overloading it
    inst = cap_instance((1, 4), (2, 4), (3, 4))
    game = make_game(inst, MechanismKind.CAPACITATED_TWO, 6, 2)
    d1, d2, r1, r2, r3, r4 = game.present
    assert game.delayed_opt_trace().final_loads == (4, 2, 0)
    prof = {d1: 0, d2: 0, r1: 2, r2: 2, r3: 2, r4: 2}
    res = game.is_nash(Profile.of(prof, game.pi))
    assert not res.is_nash
    assert res.witness == (d1, 2)


def test_enumerate_single_machine():
    game = make_game(cap_instance((3, 6)), MechanismKind.STOCHASTIC, 4, 0)
    pne = game.enumerate_pne()
    assert len(pne) == 1
    assert pne[0].loads(1) == (4,)


def test_enumerate_guard():
    inst = cap_instance((1, 20), (2, 20), (3, 20))
    game = make_game(inst, MechanismKind.STOCHASTIC, 20, 0)
    with pytest.raises(TooLarge):
        game.enumerate_pne(guard=10**6)


def test_enumerate_matches_oracle_nash_filter():
    rng = np.random.default_rng(31)
    import itertools

    for trial in range(12):
        kind = list(MechanismKind)[trial % 3]
        game = random_game(rng, kind, n_hi=5, m_max=2)
        n = game.n
        found = {p.assignment for p in game.enumerate_pne()}
        expected = set()
        for combo in itertools.product(range(game.m), repeat=n):
            prof = {a: combo[i] for i, a in enumerate(game.present)}
            if oracle_is_nash(game, prof):
                expected.add(Profile.of(prof, game.pi).assignment)
        assert found == expected


def test_kernel_nash_agrees_with_oracle_on_random_profiles():
    rng = np.random.default_rng(47)
    for trial in range(40):
        kind = list(MechanismKind)[trial % 3]
        game = random_game(rng, kind)
        for _ in range(15):
            prof = random_profile(rng, game)
            assert game.is_nash(Profile.of(prof, game.pi)).is_nash == oracle_is_nash(
                game, prof
            )


def test_enumerated_pne_are_br_fixed_points():
    game = worked_game()
    for profile in game.enumerate_pne():
        out = game.br_dynamics(profile, max_rounds=3)
        assert out.status == "converged" and out.rounds == 1
        assert out.profile == profile


def test_br_dynamics_converges_or_is_labeled():
    rng = np.random.default_rng(53)
    statuses = set()
    for trial in range(25):
        kind = list(MechanismKind)[trial % 3]
        game = random_game(rng, kind, n_hi=7)
        start = random_profile(rng, game)
        out = game.br_dynamics(start, max_rounds=6)
        statuses.add(out.status)
        if out.status == "converged":
            assert game.is_nash(out.profile).is_nash
    assert "converged" in statuses


def test_construct_stable_capacitated_examples():
    # seven agents on (2,cap4),(3,cap5): the online run fills the second
    # machine first, leaving two jobs on the cap-4 machine
    game = worked_game()
    profile = game.construct_stable_profile()
    assert game.is_nash(profile).is_nash
    assert profile.loads(game.m) == game.delayed_opt_trace().final_loads
    d1, d2 = game.present_disruptors
    d = profile.as_dict()
    assert d[d1] == d[d2] == 1  # disruptors on the last full machine

    # five agents: everything fits the second machine alone
    game5 = make_game(cap_instance((2, 4), (3, 5)), MechanismKind.CAPACITATED_TWO, 5, 2)
    p5 = game5.construct_stable_profile()
    assert p5.loads(2) == (0, 5)

    # single-machine stochastic game with no disruptors
    g1 = make_game(cap_instance((3, 6)), MechanismKind.STOCHASTIC, 5, 0)
    assert g1.construct_stable_profile().loads(1) == (5,)


def test_construct_stable_randomized_all_mechanisms():
    rng = np.random.default_rng(61)
    for trial in range(120):
        kind = list(MechanismKind)[trial % 3]
        game = random_game(rng, kind, n_hi=10, d_choices=[0, 1, 2, 5])
        profile = game.construct_stable_profile()  # raises if not Nash
        assert game.is_nash(profile).is_nash


def test_construct_stable_loads_match_online_run():
    rng = np.random.default_rng(67)
    for _ in range(30):
        game = random_game(rng, MechanismKind.STEP_TWO, n_hi=9)
        profile = game.construct_stable_profile()
        assert profile.loads(game.m) == game.delayed_opt_trace().final_loads
