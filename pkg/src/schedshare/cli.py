"""Command-line interface.

Every command reads one scenario file and writes a fixed-header CSV to
stdout; scalar summaries go to stderr as ``key=value`` lines so stdout stays
machine-readable. With ``--out DIR`` the CSV and a ``summary.json`` are also
written there. Exit codes: 0 success, 2 validation error, 3 no equilibrium,
4 demand/search too large. Rationals are printed exactly as ``p/q``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from .cost_model import INFINITE, frac_str
from .delayed_opt import delayed_opt_assign
from .errors import (
    InfeasibleDemand,
    NoEquilibrium,
    ParseError,
    SchemaError,
    TooLarge,
    ValidationError,
)
from .experiments import (
    capacity_diagnostic,
    competitive_sweep,
    expected_poa,
    instance_digest,
    poa,
)
from .game_engine import Game
from .mechanisms import MechanismSpec
from .opt_oracle import OptOracle, thresholds
from .scenario import apply_n_override, parse_scenario, scenario_universe


def _fmt(x) -> str:
    if x == INFINITE:
        return "inf"
    if isinstance(x, Fraction):
        return frac_str(x)
    if isinstance(x, bool):
        return "true" if x else "false"
    return str(x)


class _Emitter:
    def __init__(self, command: str, out_dir: str | None):
        self.command = command
        self.dir = Path(out_dir) if out_dir else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)
        self.summary: dict = {}

    def csv(self, header, rows, name: str | None = None):
        name = name or self.command
        w = csv.writer(sys.stdout)
        w.writerow(header)
        all_rows = [[_fmt(x) for x in row] for row in rows]
        w.writerows(all_rows)
        if self.dir:
            with open(self.dir / f"{name}.csv", "w", newline="") as fh:
                cw = csv.writer(fh)
                cw.writerow(header)
                cw.writerows(all_rows)

    def csv_file_only(self, header, rows, name: str):
        if not self.dir:
            return
        with open(self.dir / f"{name}.csv", "w", newline="") as fh:
            cw = csv.writer(fh)
            cw.writerow(header)
            cw.writerows([[_fmt(x) for x in row] for row in rows])

    def note(self, key, value):
        self.summary[key] = value if not isinstance(value, Fraction) else _fmt(value)
        print(f"{key}={_fmt(value)}", file=sys.stderr)

    def finish(self):
        if self.dir:
            with open(self.dir / "summary.json", "w") as fh:
                json.dump(self.summary, fh, indent=2, sort_keys=True)


def _load(args):
    scn = parse_scenario(Path(args.scenario).read_text())
    return apply_n_override(scn, args.n)


def _game(scn):
    universe = scenario_universe(scn)
    spec = MechanismSpec(scn.mechanism, scn.instance)
    return Game(universe, universe.agents, spec)


def _share_rows(game, profile):
    shares = game.shares(profile)
    d = profile.as_dict() if hasattr(profile, "as_dict") else dict(profile)
    rows = []
    for a in game.present:
        sv = shares[a]
        rows.append([
            a,
            d[a] + 1,
            "inf" if sv.infinite else _fmt(sv.macro),
            0 if sv.infinite else sv.micro,
        ])
    return rows


def cmd_opt(args):
    scn = _load(args)
    em = _Emitter("opt", args.out)
    n = args.n if args.n is not None else len(scn.agents)
    oracle = OptOracle(scn.instance)
    loads = oracle.allocation(n)
    from .cost_model import eval_cost

    em.csv(
        ["machine", "load", "cost"],
        [[j + 1, load, eval_cost(scn.instance.machines[j], load)]
         for j, load in enumerate(loads)],
    )
    em.note("n", n)
    em.note("opt_cost", oracle.cost(n))
    em.finish()
    return 0


def cmd_thresholds(args):
    scn = _load(args)
    em = _Emitter("thresholds", args.out)
    n = args.n if args.n is not None else len(scn.agents)
    table = thresholds(scn.instance, n)
    em.csv(
        ["k", "a_k"] + [f"target_m{j + 1}" for j in range(scn.instance.m)],
        [[e.k, e.a_k, *e.targets] for e in table.entries],
    )
    em.note("normalized_scale", table.normalized_scale)
    em.finish()
    return 0


def cmd_delayed_opt(args):
    scn = _load(args)
    em = _Emitter("delayed-opt", args.out)
    n = args.n if args.n is not None else len(scn.agents)
    oracle = OptOracle(scn.instance)
    trace = delayed_opt_assign(scn.instance, n, oracle)
    em.csv(["job", "machine"], [[q + 1, mid] for q, mid in enumerate(trace.per_job)])
    table = thresholds(scn.instance, max(n, 1), oracle)
    a_vals = table.a_values()
    k = next(i for i, a in enumerate(a_vals) if a >= n)
    min_cost = scn.instance.min_step_cost()
    from .opt_oracle import social_cost as loads_cost

    em.note("final_loads", ",".join(str(x) for x in trace.final_loads))
    em.note("online_cost", loads_cost(scn.instance, trace.final_loads))
    em.note("opt_cost", oracle.cost(n) if n else Fraction(0))
    em.note("bound_upper_2k1", (1 << (k + 1)) * min_cost)
    em.note("bound_lower_2k_1", (Fraction(1, 2) if k == 0 else Fraction(1 << (k - 1))) * min_cost)
    em.finish()
    return 0


def cmd_shares(args):
    scn = _load(args)
    if scn.profile is None:
        raise SchemaError("$.profile: the shares command needs a profile in the scenario")
    em = _Emitter("shares", args.out)
    game = _game(scn)
    from .game_engine import Profile

    profile = Profile.of(scn.profile, game.pi)
    em.csv(["agent", "machine", "shareMacro", "shareMicro"], _share_rows(game, profile))
    macro, micro = game.total_charged(profile)
    em.note("social_cost", game.social_cost(profile))
    em.note("charged_macro", macro)
    em.note("charged_micro", micro)
    em.finish()
    return 0


def cmd_equilibria(args):
    scn = _load(args)
    em = _Emitter("equilibria", args.out)
    game = _game(scn)
    records = game.enumerate_pne_detailed()
    rows = []
    for idx, (profile, macro, micro) in enumerate(records):
        cost = game.social_cost(profile)
        for arow in _share_rows(game, profile):
            rows.append([idx, *arow, cost, macro, micro])
    em.csv(
        ["pne", "agent", "machine", "shareMacro", "shareMicro",
         "socialCost", "chargedMacro", "chargedMicro"],
        rows,
    )
    em.note("pne_count", len(records))
    em.finish()
    return 0 if records else 3


def cmd_stable(args):
    scn = _load(args)
    em = _Emitter("stable", args.out)
    game = _game(scn)
    profile = game.construct_stable_profile()
    em.csv(["agent", "machine", "shareMacro", "shareMicro"], _share_rows(game, profile))
    em.note("is_nash", True)
    macro, micro = game.total_charged(profile)
    em.note("charged_macro", macro)
    em.note("social_cost", game.social_cost(profile))
    em.finish()
    return 0


def cmd_poa(args):
    scn = _load(args)
    em = _Emitter("poa", args.out)
    game = _game(scn)
    report = poa(game)
    em.csv(
        ["instance", "mechanism", "agents", "worstChargedMacro", "optCost",
         "poa", "pneCount", "claim1Holds"],
        [[report.instance, report.mechanism, report.n_agents,
          report.worst_charged_macro, report.opt_cost, report.poa,
          report.pne_count,
          "" if report.claim1_holds is None else report.claim1_holds]],
    )
    em.note("poa", report.poa)
    em.finish()
    return 0


def cmd_expected_poa(args):
    scn = _load(args)
    em = _Emitter("expected-poa", args.out)
    universe = scenario_universe(scn)
    samples = args.samples if args.samples is not None else scn.samples
    seed = args.seed if args.seed is not None else scn.seed
    report = expected_poa(
        scn.instance, universe, samples, seed,
        workers=args.workers, keep_rows=args.out is not None,
    )
    em.csv(
        ["samples", "seed", "meanPoA", "stdError", "bound", "nTilde", "dSize",
         "meanPoA_dLe2", "meanPoA_dGe3", "countDle2", "countDge3",
         "lemma6", "lemma6SE", "exhaustive", "structural", "empty"],
        [[report.samples, report.seed, f"{report.mean_poa:.6f}",
          f"{report.std_error:.6f}", f"{report.bound:.6f}",
          f"{report.n_tilde:.6f}", report.d_size,
          f"{report.mean_poa_d_le2:.6f}", f"{report.mean_poa_d_ge3:.6f}",
          report.count_d_le2, report.count_d_ge3,
          f"{report.lemma6_estimate:.6f}", f"{report.lemma6_std_error:.6f}",
          report.exhaustive_count, report.structural_count, report.empty_count]],
    )
    if report.rows:
        em.csv_file_only(
            ["index", "size", "d", "poa", "exact"],
            [[r.index, r.size, r.d, r.poa, r.exact] for r in report.rows],
            "expected-poa-samples",
        )
    em.note("mean_poa", f"{report.mean_poa:.6f}")
    em.note("bound", f"{report.bound:.6f}")
    em.finish()
    return 0


def cmd_sweep(args):
    scn = _load(args)
    em = _Emitter("sweep", args.out)
    n_max = args.n if args.n is not None else scn.instance.total_capacity
    rows = competitive_sweep(scn.instance, n_max)
    em.csv(
        ["n", "onlineCost", "optCost", "ratio"],
        [[r.n, r.online_cost, r.opt_cost, r.ratio] for r in rows],
    )
    em.note("max_ratio", max(r.ratio for r in rows) if rows else Fraction(1))
    em.finish()
    return 0


def cmd_diagnostic(args):
    scn = _load(args)
    em = _Emitter("diagnostic", args.out)
    n = args.n if args.n is not None else len(scn.agents)
    d_count = 2 if scn.disruptors == "auto" else max(1, len(scn.disruptors))
    rows = []
    for variant in sorted({d_count, 1}, reverse=True):
        outcome = capacity_diagnostic(scn.instance, n, variant)
        rows.append([f"{variant}-disruptor", variant, n, len(outcome.pne)])
    em.csv(["variant", "disruptors", "agents", "pneCount"], rows)
    em.note("instance", instance_digest(scn.instance))
    em.finish()
    return 0


_COMMANDS = {
    "opt": cmd_opt,
    "thresholds": cmd_thresholds,
    "delayed-opt": cmd_delayed_opt,
    "shares": cmd_shares,
    "equilibria": cmd_equilibria,
    "stable": cmd_stable,
    "poa": cmd_poa,
    "expected-poa": cmd_expected_poa,
    "sweep": cmd_sweep,
    "diagnostic": cmd_diagnostic,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schedshare",
        description="Cost-sharing mechanisms on parallel-machine scheduling games",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", help="directory for CSV/JSON artifacts")
        p.add_argument("--n", type=int, help="override job/agent count")
        p.add_argument("--samples", type=int, help="Monte Carlo sample count")
        p.add_argument("--seed", type=int, help="Monte Carlo seed")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel workers (never changes output)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, SchemaError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NoEquilibrium as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (TooLarge, InfeasibleDemand) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
