import json
from fractions import Fraction
from pathlib import Path

import pytest

from schedshare.cli import main, _COMMANDS
from schedshare.errors import NoEquilibrium, ParseError, SchemaError
from schedshare.scenario import (
    apply_n_override,
    parse_scenario,
    scenario_universe,
    serialize_scenario,
)


def minimal(**overrides):
    doc = {
        "machines": [
            {"segments": [{"len": 4, "cost": "2"}], "tail": "infinite"},
            {"segments": [{"len": 5, "cost": "3"}], "tail": "infinite"},
        ],
        "agents": 7,
        "disruptors": "auto",
        "mechanism": "cap2",
        "seed": 7,
    }
    doc.update(overrides)
    return json.dumps(doc)


def test_parse_minimal():
    scn = parse_scenario(minimal())
    assert scn.instance.m == 2
    assert scn.agents == tuple(f"a{i}" for i in range(1, 8))
    assert scn.mechanism.value == "cap2"
    uni = scenario_universe(scn)
    assert uni.disruptors == {"a1", "a2"}


def test_parse_rejects_bad_documents():
    with pytest.raises(ParseError):
        parse_scenario("{not json")
    with pytest.raises(SchemaError, match=r"mystery"):
        parse_scenario(minimal(mystery=1))
    with pytest.raises(SchemaError, match=r"machines\[0\]"):
        parse_scenario(minimal(machines=[
            {"segments": [{"len": 4, "cost": "1"}, {"len": 4, "cost": "2"}]}
        ]))  # capacitated mechanism wants one segment
    with pytest.raises(SchemaError, match=r"probabilities"):
        parse_scenario(minimal(mechanism="stochastic"))
    with pytest.raises(SchemaError, match=r"cost"):
        parse_scenario(minimal(machines=[{"segments": [{"len": 4, "cost": "0"}]}]))
    with pytest.raises(SchemaError, match=r"disruptors"):
        parse_scenario(minimal(disruptors=["ghost", "a1"]))


def test_round_trip():
    scn = parse_scenario(minimal(
        probabilities=0.4,
        mechanism="stochastic",
        profile={f"a{i}": 1 + (i % 2) for i in range(1, 8)},
    ))
    again = parse_scenario(json.dumps(serialize_scenario(scn)))
    assert again == scn


def test_n_override():
    scn = parse_scenario(minimal())
    smaller = apply_n_override(scn, 4)
    assert smaller.agents == ("a1", "a2", "a3", "a4")
    bigger = apply_n_override(scn, 9)
    assert len(bigger.agents) == 9
    explicit = parse_scenario(minimal(agents=["x", "y", "z"], disruptors=["x", "y"]))
    assert apply_n_override(explicit, 2).agents == ("x", "y")
    with pytest.raises(SchemaError):
        apply_n_override(explicit, 5)
    with pytest.raises(SchemaError):
        apply_n_override(explicit, 1)  # would drop a listed disruptor


def run_cli(tmp_path, doc, *argv, expect=0):
    scenario = tmp_path / "scenario.json"
    scenario.write_text(doc)
    code = main([argv[0], "--scenario", str(scenario), *argv[1:]])
    assert code == expect, f"exit {code} != {expect} for {argv}"


def test_cli_delayed_opt_matches_figure(tmp_path, capsys):
    doc = json.dumps({
        "machines": [
            {"segments": [{"len": 1, "cost": "1"}]},
            {"segments": [{"len": 3, "cost": "2"}]},
            {"segments": [{"len": 6, "cost": "15"}]},
        ],
        "agents": 10,
        "mechanism": "cap2",
    })
    run_cli(tmp_path, doc, "delayed-opt", "--n", "10")
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "job,machine"
    machines = [int(line.split(",")[1]) for line in out[1:]]
    assert machines == [1, 2, 2, 2, 3, 3, 3, 3, 3, 3]


def test_cli_thresholds(tmp_path, capsys):
    doc = json.dumps({
        "machines": [
            {"segments": [{"len": 1, "cost": "1"}]},
            {"segments": [{"len": 3, "cost": "2"}]},
            {"segments": [{"len": 6, "cost": "15"}]},
        ],
        "agents": 10,
        "mechanism": "cap2",
    })
    run_cli(tmp_path, doc, "thresholds")
    out = capsys.readouterr().out.strip().splitlines()
    a_vals = [int(line.split(",")[1]) for line in out[1:]]
    assert a_vals == [0, 1, 4, 4, 6, 10]


def test_cli_poa_stable_equilibria_and_out(tmp_path, capsys):
    doc = minimal()
    run_cli(tmp_path, doc, "poa", "--out", str(tmp_path / "artifacts"))
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0].startswith("instance,mechanism")
    assert "8/5" in out[1]
    summary = json.loads((tmp_path / "artifacts" / "summary.json").read_text())
    assert summary["poa"] == "8/5"
    assert (tmp_path / "artifacts" / "poa.csv").exists()

    run_cli(tmp_path, doc, "stable")
    capsys.readouterr()
    run_cli(tmp_path, doc, "equilibria")
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0].split(",")[:3] == ["pne", "agent", "machine"]


def test_cli_shares_needs_profile(tmp_path, capsys):
    run_cli(tmp_path, minimal(), "shares", expect=2)
    doc = minimal(profile={f"a{i}": 1 if i <= 4 else 2 for i in range(1, 8)})
    run_cli(tmp_path, doc, "shares")
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "agent,machine,shareMacro,shareMicro"
    assert len(out) == 8


def test_cli_expected_poa(tmp_path, capsys):
    doc = json.dumps({
        "machines": [
            {"segments": [{"len": 4, "cost": "1"}, {"len": 4, "cost": "4"}]},
            {"segments": [{"len": 5, "cost": "2"}, {"len": 4, "cost": "7"}]},
        ],
        "agents": 6,
        "mechanism": "stochastic",
        "probabilities": 0.5,
        "samples": 120,
        "seed": 3,
    })
    run_cli(tmp_path, doc, "expected-poa", "--out", str(tmp_path / "mc"))
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0].startswith("samples,seed,meanPoA")
    assert (tmp_path / "mc" / "expected-poa-samples.csv").exists()


def test_cli_sweep_and_diagnostic(tmp_path, capsys):
    run_cli(tmp_path, minimal(), "sweep")
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "n,onlineCost,optCost,ratio"
    assert len(out) == 10  # capacity 9

    doc = json.dumps({
        "machines": [
            {"segments": [{"len": 4, "cost": "2"}]},
            {"segments": [{"len": 3, "cost": "19/10"}]},
        ],
        "agents": 6,
        "mechanism": "cap2",
    })
    run_cli(tmp_path, doc, "diagnostic")
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "variant,disruptors,agents,pneCount"
    counts = {line.split(",")[0]: int(line.split(",")[-1]) for line in out[1:]}
    assert counts["2-disruptor"] == 0  # capacity-3 machine breaks stability here


def test_cli_exit_codes(tmp_path, capsys):
    run_cli(tmp_path, "{bad", "poa", expect=2)
    run_cli(tmp_path, minimal(), "sweep", "--n", "99", expect=4)
    # mechanism validation failures surface as validation errors
    bad_beta = json.dumps({
        "machines": [{"segments": [{"len": 3, "cost": "1"}]}],
        "agents": 3,
        "mechanism": "cap2",
    })
    run_cli(tmp_path, bad_beta, "equilibria", expect=2)
    # a huge profile space trips the guard
    big = json.dumps({
        "machines": [
            {"segments": [{"len": 40, "cost": "1"}]},
            {"segments": [{"len": 40, "cost": "2"}]},
            {"segments": [{"len": 40, "cost": "3"}]},
        ],
        "agents": 40,
        "mechanism": "stochastic",
        "probabilities": 0.5,
        "disruptors": ["a1", "a2", "a3"],
    })
    run_cli(tmp_path, big, "equilibria", expect=4)


def test_cli_no_equilibrium_exit_code(tmp_path, monkeypatch, capsys):
    def boom(args):
        raise NoEquilibrium("none")

    monkeypatch.setitem(_COMMANDS, "poa", boom)
    run_cli(tmp_path, minimal(), "poa", expect=3)
