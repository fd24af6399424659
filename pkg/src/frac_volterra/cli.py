#!/usr/bin/env python3
"""
Command-line interface for the fractional Volterra toolkit

Usage:
    python -m frac_volterra.cli ml-eval --alpha 0.5 --z 2
    python -m frac_volterra.cli solve --config scenario.json --out-dir out
    python -m frac_volterra.cli verify --check ml-integral --alpha 0.3 --n 2048
    python -m frac_volterra.cli batch a.json b.json --out-dir runs
"""

import argparse
import os
import sys
from typing import Any, Dict, List, Optional

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from frac_volterra import __version__
from frac_volterra.core.special_functions import MlParams, ml_eval
from frac_volterra.errors import FracVolterraError
from frac_volterra.log import set_verbosity
from frac_volterra.scenario.config import (
    ESTIMATE_ALIASES,
    ESTIMATES,
    GRONWALL_MODE_ALIASES,
    GRONWALL_MODES,
    PROFILE_KINDS,
    VERIFY_CHECK_ALIASES,
    VERIFY_CHECKS,
    VERIFY_FUNCTIONS,
)
from frac_volterra.scenario.runner import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    exit_code_for,
    run_batch,
    run_config_file,
)

PSI_CHOICES = ("identity", "power", "logarithm", "exponential")
# Output key written to the path given by --out
PRIMARY_OUTPUTS = {
    "solve": "trace",
    "bounds": "bounds",
    "depend": "depend",
    "gronwall": "gronwall",
    "verify": "verify",
}


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "--problem", dest="config",
                        help="Scenario JSON file (default: built-in defaults)")
    common.add_argument("--out-dir", default=".", help="Directory for CSV and summary output")
    common.add_argument("--out", help="File for the main CSV; the other outputs go next to it")
    common.add_argument("--seed", type=int, default=0, help="Seed for randomized scenarios")
    common.add_argument("-v", "--verbose", action="store_true", help="Verbose output")
    common.add_argument("--n", type=int, help="Grid panels (grid.n)")
    common.add_argument("--grading-q", type=float, help="Grid grading exponent (grid.grading_q)")
    common.add_argument("--psi", choices=PSI_CHOICES, help="psi family (psi.family)")
    common.add_argument("--delta", type=float, help="Weight scale delta > 1 (space.delta)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        description="Fractional Volterra Toolkit - psi-Hilfer solvers and certified bounds",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  frac-volterra ml-eval --alpha 0.5 --z 2                 # Mittag-Leffler value
  frac-volterra verify --check ml-integral --alpha 0.3    # closed-form integral check
  frac-volterra gronwall --mode nested --config g.json    # Gronwall enclosure
  frac-volterra solve --config problem.json --out-dir out # Picard solve
  frac-volterra bounds --estimate apriori-integral --config problem.json
  frac-volterra depend --perturb 0.1 --perturb 0.01 --config problem.json
  frac-volterra batch a.json b.json --out-dir runs        # concurrent scenarios
        """,
    )
    parser.add_argument("--version", action="version", version=f"Fractional Volterra Toolkit v{__version__}")
    sub = parser.add_subparsers(dest="command")

    ml = sub.add_parser("ml-eval", help="Evaluate E_alpha(z)")
    ml.add_argument("--alpha", type=float, required=True, help="Order alpha in (0, 2]")
    ml.add_argument("--z", type=float, required=True, help="Real argument z")
    ml.add_argument("-v", "--verbose", action="store_true", help="Verbose output")

    verify = sub.add_parser("verify", parents=[common], help="Verify operator identities")
    verify.add_argument("--check", choices=VERIFY_CHECKS + tuple(VERIFY_CHECK_ALIASES),
                        help="Identity to check")
    verify.add_argument("--alpha", type=float, help="Order alpha")
    verify.add_argument("--beta", type=float, help="Hilfer type beta")
    verify.add_argument("--xi", type=float, help="Exponential rate xi")
    verify.add_argument("--function", choices=VERIFY_FUNCTIONS, help="Composition test function")
    verify.add_argument("--tolerance", type=float, help="Residual tolerance")

    gronwall = sub.add_parser("gronwall", parents=[common], help="Check Gronwall-type bounds")
    gronwall.add_argument("--mode", choices=GRONWALL_MODES + tuple(GRONWALL_MODE_ALIASES),
                          help="Bound to check")
    gronwall.add_argument("--alpha", type=float, help="Order alpha")
    gronwall.add_argument("--k-max", type=int, help="Series truncation")
    gronwall.add_argument("--profile-kind", choices=PROFILE_KINDS, help="Constant data or random instances")
    gronwall.add_argument("--instances", type=int, help="Random instances")

    solve = sub.add_parser("solve", parents=[common], help="Solve a registry problem by Picard iteration")
    solve.add_argument("--tol", type=float, help="Stopping tolerance on the weighted metric")
    solve.add_argument("--max-iter", type=int, help="Iteration cap")

    bounds = sub.add_parser("bounds", parents=[common], help="Check solution estimates")
    bounds.add_argument("--estimate", action="append", choices=sorted(ESTIMATES),
                        help="Estimate to check (repeatable)")
    bounds.add_argument("--theorem", dest="estimate", action="append", choices=list(ESTIMATE_ALIASES),
                        help="Estimate to check by number (repeatable)")

    depend = sub.add_parser("depend", parents=[common], help="Continuous and parameter dependence")
    depend.add_argument("--perturb", action="append", type=float, help="Perturbation size (repeatable)")
    depend.add_argument("--mu", type=float, help="Parameter value mu")
    depend.add_argument("--mu0", type=float, help="Reference parameter mu0")

    batch = sub.add_parser("batch", help="Run several scenario files concurrently")
    batch.add_argument("configs", nargs="+", help="Scenario JSON files")
    batch.add_argument("--out-dir", default=".", help="Parent directory of the per-scenario outputs")
    batch.add_argument("--seed", type=int, default=0, help="Seed for randomized scenarios")
    batch.add_argument("--workers", type=int, default=4, help="Concurrent scenarios")
    batch.add_argument("-v", "--verbose", action="store_true", help="Verbose output")

    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted config paths set on the command line."""
    get = lambda name: getattr(args, name, None)  # noqa: E731
    overrides = {
        "pipeline": args.command,
        "grid.n": get("n"),
        "grid.grading_q": get("grading_q"),
        "psi.family": get("psi"),
        "space.delta": get("delta"),
    }
    if args.command == "verify":
        overrides.update({
            "verify.check": get("check"),
            "verify.alpha": get("alpha"),
            "verify.beta": get("beta"),
            "verify.xi": get("xi"),
            "verify.function": get("function"),
            "verify.tolerance": get("tolerance"),
        })
    elif args.command == "gronwall":
        overrides.update({
            "gronwall.mode": get("mode"),
            "gronwall.alpha": get("alpha"),
            "gronwall.k_max": get("k_max"),
            "gronwall.profile.kind": get("profile_kind"),
            "gronwall.profile.instances": get("instances"),
        })
    elif args.command == "solve":
        overrides.update({"solver.tol": get("tol"), "solver.max_iter": get("max_iter")})
    elif args.command == "bounds":
        overrides["bounds.estimates"] = get("estimate")
    elif args.command == "depend":
        overrides.update({
            "depend.epsilons": get("perturb"),
            "depend.mu": get("mu"),
            "depend.mu0": get("mu0"),
        })
    if get("out"):
        overrides[f"outputs.{PRIMARY_OUTPUTS[args.command]}"] = os.path.basename(args.out)
    return overrides


def _output_dir(args: argparse.Namespace) -> str:
    if args.out:
        return os.path.join(args.out_dir, os.path.dirname(args.out))
    return args.out_dir


def _ml_eval(args: argparse.Namespace) -> int:
    try:
        value = ml_eval(MlParams(args.alpha, args.z))
    except FracVolterraError as exc:
        print(f"✗ Error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    print(format(value, ".15g"))
    return 0


def _batch(args: argparse.Namespace) -> int:
    missing = [path for path in args.configs if not os.path.exists(path)]
    if missing:
        print(f"ERROR: Scenario file not found: {missing[0]}", file=sys.stderr)
        return EXIT_CONFIG

    results = run_batch(args.configs, args.out_dir, seed=args.seed, workers=args.workers)
    worst = 0
    for path, (success, message, details) in results:
        mark = "✓" if success else "✗"
        print(f"{mark} {path}: {message}")
        worst = max(worst, details.get("exit_code", EXIT_CHECK_FAILED))
    return worst


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return 1

    set_verbosity(args.verbose)

    if args.command == "ml-eval":
        return _ml_eval(args)
    if args.command == "batch":
        return _batch(args)

    if args.verbose:
        print("\n" + "=" * 60)
        print("FRACTIONAL VOLTERRA TOOLKIT")
        print("=" * 60)

    out_dir = _output_dir(args)
    success, message, details = run_config_file(
        args.config, out_dir, seed=args.seed, verbose=args.verbose,
        overrides=overrides_from_args(args),
    )

    if success:
        print(f"\n✓ {message}")
        print(f"  Output written to: {os.path.abspath(out_dir)}")
        return 0
    field = details.get("field")
    if field is not None and details.get("exit_code") == EXIT_CONFIG:
        print(f"\n✗ Configuration error: {message}", file=sys.stderr)
    else:
        print(f"\n✗ Error: {message}", file=sys.stderr)
    return details.get("exit_code", EXIT_CHECK_FAILED)


if __name__ == "__main__":
    sys.exit(main())
