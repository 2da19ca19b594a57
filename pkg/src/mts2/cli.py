"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 solver failure.
Failures print a single JSON line on standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from . import experiments, planner, producer, simulator
from .equilibrium import solve_equilibrium
from .errors import MTSError, SolverError, ValidationError
from .model import EffectiveRates, InventoryPolicy, JoiningProfile, load_params
from .performance import report

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(obj):
    """Replace non-finite floats with None so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit(doc, out=None):
    text = json.dumps(_clean(doc), indent=2, allow_nan=False)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _range(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected min:max:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric range {text!r}") from None
    if not (step > 0 and hi >= lo):
        raise argparse.ArgumentTypeError(f"range needs max >= min and step > 0, got {text!r}")
    return lo, hi, step


def _ratios(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if any(not v > 0 for v in values):
        raise argparse.ArgumentTypeError("holding-cost ratios must be positive")
    return values


def _policy(args) -> InventoryPolicy:
    return InventoryPolicy(*args.S)


def _profile_or_rates(args, params):
    if args.q is not None:
        profile = JoiningProfile(*args.q)
        return profile, EffectiveRates(profile.q1 * params.Lambda1, profile.q2 * params.Lambda2)
    lam = EffectiveRates(*args.lam)
    for i in (1, 2):
        if lam.lam(i) > params.Lambda(i):
            raise ValidationError(f"lambda{i} exceeds the potential rate Lambda{i}")
    q = tuple(lam.lam(i) / params.Lambda(i) if params.Lambda(i) else 0.0 for i in (1, 2))
    return JoiningProfile(*q), lam


# ---------------------------------------------------------------------------
# subcommands


def cmd_measures(args):
    params = load_params(args.config)
    _, rates = _profile_or_rates(args, params)
    _emit(report(rates, _policy(args), params).to_dict(), args.out)


def cmd_equilibrium(args):
    params = load_params(args.config)
    _emit(solve_equilibrium(params, _policy(args)).to_dict(), args.out)


def cmd_producer(args):
    params = load_params(args.config)
    _emit(producer.optimize_policy(params).to_dict(), args.out)


def cmd_planner(args):
    params = load_params(args.config)
    _emit(planner.optimize_welfare(params).to_dict(), args.out)


def cmd_tolls(args):
    params = load_params(args.config)
    if args.S is None:
        sol = planner.optimize_welfare(params)
    else:
        sol = planner.optimize_rates_for_policy(_policy(args), params)
    eq = solve_equilibrium(params, sol.policy, tolls=sol.tolls)
    doc = sol.to_dict()
    doc["target_profile"] = {
        "q1": sol.rates.lambda1 / params.Lambda1 if params.Lambda1 else 0.0,
        "q2": sol.rates.lambda2 / params.Lambda2 if params.Lambda2 else 0.0,
    }
    doc["tolled_equilibrium"] = eq.to_dict()
    _emit(doc, args.out)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MTS2_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"MTS2_SEED must be an integer, got {env!r}") from None
    return simulator.SimConfig().seed


def cmd_simulate(args):
    params = load_params(args.config)
    profile, _ = _profile_or_rates(args, params)
    policy = _policy(args)
    config = simulator.SimConfig(num_arrivals=args.arrivals, warmup_fraction=args.warmup,
                                 replications=args.replications, seed=_seed(args))
    est = simulator.simulate(params, policy, profile, config, workers=args.threads)
    doc = {"config": dataclasses.asdict(config), "estimates": est.to_dict()}
    if args.compare:
        exact = report(EffectiveRates(profile.q1 * params.Lambda1, profile.q2 * params.Lambda2),
                       policy, params)
        doc["exact"] = exact.to_dict()
        doc["comparison"] = simulator.compare(est, exact)
    _emit(doc, args.out)


def _sweep_spec(args, params, rho_fixed=None):
    kappa = args.kappa or (experiments.FULL_KAPPA if args.full else experiments.DESK_KAPPA)
    rho = getattr(args, "rho_range", None) or (experiments.FULL_RHO if args.full else experiments.DESK_RHO)
    try:
        return experiments.SweepSpec(kappa_range=kappa, rho_range=rho, h2_over_h1=args.h_ratio,
                                     base=params, cross_section_rho=rho_fixed)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _write_cells(cells, out):
    if out:
        with open(out, "w", newline="") as fh:
            experiments.write_csv(cells, fh)
    else:
        experiments.write_csv(cells, sys.stdout)


def cmd_sweep(args):
    params = load_params(args.config)
    cells = experiments.run_sweep(_sweep_spec(args, params), workers=args.threads)
    _write_cells(cells, args.out)


def cmd_cross_section(args):
    params = load_params(args.config)
    if not 0 < args.rho < 1:
        raise ValidationError("--rho must lie in (0, 1)")
    spec = _sweep_spec(args, params, rho_fixed=args.rho)
    _write_cells(experiments.cross_section(spec, workers=args.threads), args.out)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mts2", description="Two-product make-to-stock queueing game solver.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON market configuration")
        p.add_argument("--out", help="write output here instead of standard output")
        p.set_defaults(func=func)
        return p

    def stock(p, required=True):
        p.add_argument("--S", nargs=2, type=int, metavar=("S1", "S2"), required=required,
                       help="base-stock levels")

    def load(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--q", nargs=2, type=float, metavar=("Q1", "Q2"), help="joining probabilities")
        g.add_argument("--lam", nargs=2, type=float, metavar=("L1", "L2"), help="effective arrival rates")

    p = add("measures", cmd_measures, "closed-form performance measures")
    stock(p)
    load(p)

    p = add("equilibrium", cmd_equilibrium, "customer joining equilibrium for fixed stock")
    stock(p)

    add("producer", cmd_producer, "profit-maximizing base-stock levels")
    add("planner", cmd_planner, "welfare-maximizing rates and stock")

    p = add("tolls", cmd_tolls, "tolls that implement the planner's rates")
    stock(p, required=False)

    p = add("simulate", cmd_simulate, "discrete-event simulation")
    stock(p)
    load(p)
    p.add_argument("--arrivals", type=int, default=simulator.SimConfig.num_arrivals)
    p.add_argument("--replications", type=int, default=simulator.SimConfig.replications)
    p.add_argument("--warmup", type=float, default=simulator.SimConfig.warmup_fraction)
    p.add_argument("--seed", type=int, default=None, help="base seed (else MTS2_SEED, else 12345)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--compare", action="store_true", help="add closed forms and z-scores")

    for name, func in (("sweep", cmd_sweep), ("cross-section", cmd_cross_section)):
        p = add(name, func, "parameter sweep to CSV" if name == "sweep" else "kappa series at fixed rho")
        p.add_argument("--kappa", type=_range, help="min:max:step")
        if name == "sweep":
            p.add_argument("--rho", dest="rho_range", type=_range, help="min:max:step")
            p.add_argument("--h-ratio", type=_ratios, default=(1.0,), help="comma-separated h2/h1")
        else:
            p.add_argument("--rho", type=float, default=0.9, help="fixed potential utilization")
            p.add_argument("--h-ratio", type=_ratios, default=(0.9, 1.0, 1.1), help="comma-separated h2/h1")
        p.add_argument("--full", action="store_true", help="the fine 0.01 x 0.001 grid")
        p.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    return parser


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    try:
        args.func(args)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, exc.code, str(exc))
    except SolverError as exc:
        return _fail(EXIT_SOLVER, exc.code, str(exc))
    except MTSError as exc:
        return _fail(EXIT_SOLVER, exc.code, str(exc))
    except OSError as exc:
        return _fail(EXIT_USAGE, "io", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
