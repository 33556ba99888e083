"""
Command-line entry point for the phase estimation bench.

    python main.py bounds --W 1e-3 --nbar 1 --m 1e6 --nu 0.1
    python main.py reproduce fig1 --out results/
"""
import argparse
import sys

import pydantic
from dotenv import load_dotenv

from commands import FIGURE_PRESETS, SWEEPABLE, PhaseBenchHandler, resolve_parameters
from errors import BenchError
from schemas import EstimatorMethod, PhiPolicy
from utils import logger, resolve_output_dir, set_log_level

COMMON_FLAGS = ('W', 'nbar', 'm', 'nu', 'phi', 'trials', 'seed', 'tol', 'method', 'policy', 'workers')
POSTERIOR_FLAGS = ('inversion', 'points', 'half_width')
SWEEP_FLAGS = ('vary', 'values', 'fixed_mnu2')


def _add_common(parser):
    parser.add_argument('--config', help="JSON key/value file or a run manifest to replay")
    parser.add_argument('--W', help="prior window width (radians)")
    parser.add_argument('--nbar', help="mean photon number per probe")
    parser.add_argument('--m', help="repetitions per experiment")
    parser.add_argument('--nu', help="unbalance parameter, 0 < nu < 1")
    parser.add_argument('--phi', help="true phase (radians)")
    parser.add_argument('--trials', help="Monte Carlo trials")
    parser.add_argument('--seed', help="64-bit master seed")
    parser.add_argument('--out', help="output directory")
    parser.add_argument('--tol', help="relative quadrature tolerance")
    parser.add_argument('--method', choices=[m.value for m in EstimatorMethod], help="phase estimator")
    parser.add_argument('--policy', choices=[p.value for p in PhiPolicy], help="true-phase policy")
    parser.add_argument('--workers', help="threads for Monte Carlo blocks")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help="debug logging")
    verbosity.add_argument('--quiet', '-q', action='store_true', help="warnings only")


def _add_curve_flags(parser):
    parser.add_argument('--inversion', choices=[m.value for m in EstimatorMethod],
                        help="estimator map for the exact curve")
    parser.add_argument('--points', help="grid points")
    parser.add_argument('--half-width', dest='half_width', help="grid half width in sigma")


def build_parser():
    parser = argparse.ArgumentParser(
        prog='phase-bench',
        description="Bounds, posterior curves and Monte Carlo campaigns for unbalanced-cat phase estimation.",
    )
    sub = parser.add_subparsers(dest='command', required=True)

    bounds = sub.add_parser('bounds', help="bounds table for one scenario")
    _add_common(bounds)

    posterior = sub.add_parser('posterior', help="exact and Gaussian estimator distributions")
    _add_common(posterior)
    _add_curve_flags(posterior)

    simulate = sub.add_parser('simulate', help="Monte Carlo campaign")
    _add_common(simulate)

    sweep = sub.add_parser('sweep', help="bounds over a range of one parameter")
    _add_common(sweep)
    sweep.add_argument('--vary', choices=SWEEPABLE, required=True, help="parameter to sweep")
    sweep.add_argument('--values', required=True, help="comma-separated values, e.g. 1e3,1e4,1e5")
    sweep.add_argument('--fixed-mnu2', dest='fixed_mnu2', help="hold m*nu^2 at this value")

    reproduce = sub.add_parser('reproduce', help="regenerate a reference figure's data")
    reproduce.add_argument('figure', choices=sorted(FIGURE_PRESETS))
    _add_common(reproduce)
    _add_curve_flags(reproduce)
    return parser


def _cli_values(args):
    names = COMMON_FLAGS + POSTERIOR_FLAGS + SWEEP_FLAGS
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def _pydantic_message(error: pydantic.ValidationError) -> str:
    first = error.errors()[0]
    return first['msg'].removeprefix('Value error, ')


def run(args):
    """Dispatch parsed arguments to the handler; returns the text table."""
    handler = PhaseBenchHandler(resolve_output_dir(args.out))
    preset = None
    if args.command == 'reproduce':
        preset = FIGURE_PRESETS[args.figure]
    params = resolve_parameters(_cli_values(args), args.config, preset)

    if args.command == 'bounds':
        _, text = handler.cmd_bounds(params)
    elif args.command == 'posterior':
        _, text = handler.cmd_posterior(params)
    elif args.command == 'simulate':
        _, text = handler.cmd_simulate(params)
    elif args.command == 'sweep':
        _, text = handler.cmd_sweep(params)
    else:
        _, text = handler.cmd_reproduce(args.figure, params)
    return text


def main(argv=None):
    """
    Run one command.

    Returns:
        int: 0 success, 2 validation, 3 numerical, 4 I/O, 1 unexpected
    """
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    set_log_level(args.verbose, args.quiet)

    try:
        text = run(args)
    except pydantic.ValidationError as e:
        message = _pydantic_message(e)
        logger.error(message)
        print(f"error: {message}", file=sys.stderr)
        return 2
    except BenchError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        logger.error(f"Invalid parameter: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 4
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1

    print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
