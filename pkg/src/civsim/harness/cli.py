"""``civsim`` command line.

Exit status: 0 on success, 2 for bad input files or arguments, 3 when a
calibration fit is infeasible or misses its tolerance.
"""

from __future__ import annotations

import argparse
import sys

from ..calibration import ConfigError
from ..simnet import AttackSetup
from . import commands
from .fit import FitError, Infeasible


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="civsim", description="Caller ID verification simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=None):
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--calibration", help="calibration JSON (default: packaged fit)")
        sp.add_argument("--topology", help="topology JSON (default: packaged topology)")
        sp.add_argument("--out", help="output stem; writes <stem>.csv and <stem>.json")
        sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("run", help="run a scenario file")
    sp.add_argument("scenario")
    common(sp)

    sp = sub.add_parser("sweep-n", help="DTMF response transmission time versus digits")
    sp.add_argument("scenario", nargs="?")
    sp.add_argument("--n", default="1-8", help="range like 1-8 or list like 1,2,4")
    sp.add_argument("--pairs", help="caller:callee,... (default: all nine platform pairs)")
    common(sp, 0)

    sp = sub.add_parser("sweep-markspace", help="DTMF decode success over mark/space")
    sp.add_argument("--marks", type=_floats, default=commands.MARK_GRID_MS)
    sp.add_argument("--spaces", type=_floats, default=(100.0, 150.0))
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--snr", type=float, help="override the calibrated SNR (dB)")
    common(sp, commands.MARKSPACE_SEED)

    sp = sub.add_parser("attack", help="adversary campaign")
    sp.add_argument("strategy", choices=("spoof-and-guess", "downgrade", "reflected-dos"))
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--n-guess", type=int, default=4)
    sp.add_argument("--attacker", default="eve")
    sp.add_argument("--victim", default="sip-a")
    sp.add_argument("--target", default="sip-b")
    sp.add_argument("--calls", type=int, default=100, help="reflected-dos: spoofed calls to place")
    sp.add_argument("--rate", type=float, default=6.0, help="reflected-dos: calls per minute")
    common(sp, commands.ATTACK_SEED)

    sp = sub.add_parser("fit-calibration", help="fit latency calibration to target totals")
    sp.add_argument("--targets")
    sp.add_argument("--bounds")
    common(sp)
    return p


def _print_report(rep):
    sys.stdout.write(rep.to_csv())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            rep = commands.cmd_run(args.scenario, args.calibration, args.out, args.topology, args.seed, args.jobs)
        elif args.command == "sweep-n":
            rep = commands.cmd_sweep_n(args.scenario, commands.parse_range(args.n), args.out, args.calibration,
                                       args.topology, commands.parse_pairs(args.pairs), args.seed)
        elif args.command == "sweep-markspace":
            rep = commands.cmd_sweep_markspace(args.marks, args.spaces, args.trials, args.out, args.calibration,
                                               args.snr, args.seed, args.jobs)
        elif args.command == "attack":
            if args.strategy == "spoof-and-guess":
                strategy = {"strategy": args.strategy, "n_guess_digits": args.n_guess}
            elif args.strategy == "reflected-dos":
                strategy = {"strategy": args.strategy, "calls": args.calls, "rate_per_min": args.rate}
            else:
                strategy = {"strategy": args.strategy}
            setup = AttackSetup(args.attacker, args.victim, args.target)
            rep = commands.cmd_attack(strategy, args.trials, args.seed, args.out, args.calibration, args.topology,
                                      setup, args.jobs)
        else:
            _, rep = commands.cmd_fit_calibration(args.targets, args.bounds, args.out, args.topology)
    except ConfigError as exc:
        print(f"civsim: config error: {exc}", file=sys.stderr)
        return 2
    except (Infeasible, FitError) as exc:
        print(f"civsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"civsim: {exc}", file=sys.stderr)
        return 2
    _print_report(rep)
    return 0


if __name__ == "__main__":
    sys.exit(main())
