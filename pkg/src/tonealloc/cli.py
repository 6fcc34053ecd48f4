"""Command-line entry point: run, oracle, gen and compare subcommands.

Exit codes are a stable contract for harness scripting: 0 converged,
2 unconverged, 1 usage/validation error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .errors import NumericalError, ToneAllocError, ValidationError
from .oracle import dual_oracle_solve, exhaustive_grid_solve
from .protocol import NetworkModel, RunConfig, run_until_converged
from .scenario_io import ScenarioRanges, generate_random_scenario, load_scenario, save_scenario
from .trace import write_trace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNCONVERGED = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise _UsageError(message)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument("--seed", type=int, default=0, help="network RNG seed")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--reduced", dest="reduced", action="store_true", default=True,
                      help="reduced price updates (default)")
    mode.add_argument("--full", dest="reduced", action="store_false",
                      help="update every tone price each round")
    p.add_argument("--alpha0", type=float, default=0.1, help="initial step size")
    p.add_argument("--tau", type=float, default=50.0, help="step decay constant")
    p.add_argument("--step-schedule", choices=["diminishing", "constant"],
                   default="diminishing")
    p.add_argument("--epsilon", type=float, default=1e-3, help="stopping tolerance")
    p.add_argument("--window", type=int, default=5, help="stopping window")
    p.add_argument("--max-rounds", type=int, default=5000)
    p.add_argument("--async", dest="asynchronous", action="store_true",
                   help="enable the delay/drop network model")
    p.add_argument("--delay", type=int, default=0, help="per-link delay in rounds")
    p.add_argument("--drop", type=float, default=0.0, help="message drop probability")
    p.add_argument("--trace", default=None, help="write the round trace CSV here")
    p.add_argument("--json", dest="as_json", action="store_true",
                   help="print a machine-readable summary")


def _build_parser() -> _Parser:
    parser = _Parser(prog="tonealloc",
                     description="distributed tone pricing for uplink power/tone allocation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="distributed primal-dual run")
    _add_run_flags(run_p)

    oracle_p = sub.add_parser("oracle", help="centralized baselines")
    oracle_p.add_argument("--scenario", required=True)
    oracle_p.add_argument("--iters", type=int, default=50000)
    oracle_p.add_argument("--tol", type=float, default=1e-9)
    oracle_p.add_argument("--exhaustive", action="store_true",
                          help="also brute-force (tiny instances only)")
    oracle_p.add_argument("--grid-points", type=int, default=201)
    oracle_p.add_argument("--json", dest="as_json", action="store_true")

    gen_p = sub.add_parser("gen", help="generate a random scenario")
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--users", "-K", type=int, required=True)
    gen_p.add_argument("--tones", "-N", type=int, required=True)
    gen_p.add_argument("--output", "-o", required=True)
    gen_p.add_argument("--gain-range", type=float, nargs=2, default=[0.1, 10.0])
    gen_p.add_argument("--beta-range", type=float, nargs=2, default=[0.0, 0.2])
    gen_p.add_argument("--power-range", type=float, nargs=2, default=[1.0, 5.0])
    gen_p.add_argument("--weight-range", type=float, nargs=2, default=[0.5, 2.0])
    gen_p.add_argument("--sigma2", type=float, default=1.0)
    gen_p.add_argument("--smax-choices", default="10,inf",
                       help="comma-separated SNR cap choices ('inf' allowed)")

    cmp_p = sub.add_parser("compare",
                           help="distributed reduced/full vs centralized, with gaps")
    _add_run_flags(cmp_p)
    cmp_p.add_argument("--iters", type=int, default=50000)
    cmp_p.add_argument("--tol", type=float, default=1e-9)
    return parser


def _network(args) -> NetworkModel | None:
    if not args.asynchronous:
        return NetworkModel(0, 0.0, args.seed)
    return NetworkModel(args.delay, args.drop, args.seed)


def _config(args, reduced=None) -> RunConfig:
    return RunConfig(
        max_rounds=args.max_rounds,
        epsilon=args.epsilon,
        window=args.window,
        reduced=args.reduced if reduced is None else reduced,
        alpha0=args.alpha0,
        tau=args.tau,
        step_schedule=args.step_schedule,
        synchronous=not args.asynchronous,
    )


def _run_metadata(args, config) -> dict:
    return {
        "artifact_version": __version__,
        "prng": "numpy.Generator(PCG64)",
        "seed": args.seed,
        "config": {
            "max_rounds": config.max_rounds,
            "epsilon": config.epsilon,
            "window": config.window,
            "reduced": config.reduced,
            "alpha0": config.alpha0,
            "tau": config.tau,
            "step_schedule": config.step_schedule,
            "synchronous": config.synchronous,
            "delay_rounds": 0 if not args.asynchronous else args.delay,
            "drop_probability": 0.0 if not args.asynchronous else args.drop,
        },
    }


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    config = _config(args)
    result = run_until_converged(scenario, config, network=_network(args))
    if args.trace:
        write_trace(result.trace, args.trace, metadata=_run_metadata(args, config))
    summary = {
        "converged": result.converged,
        "converged_by": result.converged_by,
        "rounds": result.rounds_used,
        "primal": result.primal_value,
        "dual_bound": result.dual_bound,
        "final_residual": result.trace[-1].residual if result.trace else 0.0,
        "updates_total": int(sum(r.updates_performed for r in result.trace)),
    }
    if args.as_json:
        print(json.dumps(summary))
    else:
        status = "converged" if result.converged else "NOT converged"
        print(f"{status} after {result.rounds_used} rounds"
              + (f" ({result.converged_by})" if result.converged_by else ""))
        print(f"recovered objective : {result.primal_value:.9f} nats")
        print(f"dual upper bound    : {result.dual_bound:.9f} nats")
        print(f"price updates total : {summary['updates_total']}")
    return EXIT_OK if result.converged else EXIT_UNCONVERGED


def _cmd_oracle(args) -> int:
    scenario = load_scenario(args.scenario)
    res = dual_oracle_solve(scenario, iters=args.iters, tol=args.tol)
    summary = {
        "dual_value": res.dual_value,
        "primal_value": res.primal_value,
        "gap": res.gap,
        "iters_used": res.iters_used,
    }
    if args.exhaustive:
        ex = exhaustive_grid_solve(scenario, grid_points=args.grid_points)
        summary["exhaustive_value"] = ex.best_value
        summary["exhaustive_error_bound"] = ex.error_bound
    if args.as_json:
        print(json.dumps(summary))
    else:
        print(f"dual value   : {res.dual_value:.9f} nats ({res.iters_used} iterations)")
        print(f"primal value : {res.primal_value:.9f} nats")
        print(f"duality gap  : {res.gap:.3e}")
        if "exhaustive_value" in summary:
            print(f"exhaustive   : {summary['exhaustive_value']:.9f} nats"
                  f" (error bound {summary['exhaustive_error_bound']:.3e})")
    return EXIT_OK


def _cmd_gen(args) -> int:
    choices = []
    for tok in args.smax_choices.split(","):
        tok = tok.strip().lower()
        choices.append(np.inf if tok in ("inf", "infinity") else float(tok))
    ranges = ScenarioRanges(
        gain_low=args.gain_range[0], gain_high=args.gain_range[1],
        sigma2=args.sigma2,
        beta_low=args.beta_range[0], beta_high=args.beta_range[1],
        snr_cap_choices=tuple(choices),
        power_low=args.power_range[0], power_high=args.power_range[1],
        weight_low=args.weight_range[0], weight_high=args.weight_range[1],
    )
    scenario = generate_random_scenario(args.seed, args.users, args.tones, ranges)
    save_scenario(scenario, args.output)
    print(f"wrote {args.users}x{args.tones} scenario to {args.output}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    results = {}
    for label, reduced in (("reduced", True), ("full", False)):
        res = run_until_converged(scenario, _config(args, reduced=reduced),
                                  network=_network(args))
        results[label] = res
    oracle = dual_oracle_solve(scenario, iters=args.iters, tol=args.tol)

    rows = []
    for label in ("reduced", "full"):
        res = results[label]
        rows.append({
            "solver": f"distributed-{label}",
            "rounds_to_eps": res.rounds_used if res.converged else None,
            "converged": res.converged,
            "objective": res.primal_value,
            "dual_value": res.dual_bound,
            "updates_total": int(sum(r.updates_performed for r in res.trace)),
        })
    rows.append({
        "solver": "centralized",
        "rounds_to_eps": oracle.iters_used,
        "converged": True,
        "objective": oracle.primal_value,
        "dual_value": oracle.dual_value,
        "updates_total": oracle.iters_used * scenario.num_tones,
    })
    gap = {
        label: (oracle.dual_value - results[label].primal_value)
        / max(abs(oracle.dual_value), 1e-300)
        for label in ("reduced", "full")
    }
    if args.as_json:
        print(json.dumps({"rows": rows, "relative_gap": gap}))
    else:
        print(f"{'solver':<20}{'rounds':>8}{'objective':>16}{'dual':>16}{'updates':>10}")
        for row in rows:
            rounds = row["rounds_to_eps"] if row["rounds_to_eps"] is not None else "-"
            print(f"{row['solver']:<20}{rounds:>8}{row['objective']:>16.9f}"
                  f"{row['dual_value']:>16.9f}{row['updates_total']:>10}")
        print(f"gap vs centralized dual: reduced {gap['reduced']:.4%}, "
              f"full {gap['full']:.4%}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "compare":
            return _cmd_compare(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, _UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ToneAllocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"error: invalid scenario document: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
