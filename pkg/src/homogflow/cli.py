"""Command-line entry point.

    homogflow <cell|simulate|average|ergodic|converge|validate>
              --config <path> [--out <dir>] [--seed <u64>] [--jobs <n>]

Exit codes: 0 success / criteria met, 1 criteria violated, 2 configuration
error, 3 runtime failure.
"""

import argparse
import sys

import numpy as np

from .coeffs import CoefficientError, validate as validate_coeffs
from .grid import SolverError
from .harness import (ConfigError, emit_report, load_config, run_average_study,
                      run_cell_study, run_convergence, run_ergodic_study,
                      run_simulate_study, window_medians)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homogflow",
        description="Two-continuum multiscale stochastic flow studies")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("cell", "simulate", "average", "ergodic", "converge",
                 "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML study file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the base seed")
        p.add_argument("--jobs", type=int, default=None,
                       help="parallel (epsilon, replica) workers")
        p.add_argument("--fields", action="store_true",
                       help="also emit corrector fields (cell)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, out_dir=args.out, seed=args.seed,
                             jobs=args.jobs)
        out = config.out_dir

        if args.command == "validate":
            report = validate_coeffs(config.coeffs, samples=10_000,
                                     dimension=config.mesh.dimension,
                                     seed=config.base_seed)
            print(f"rayleigh range [{report.rayleigh_min:.6g}, "
                  f"{report.rayleigh_max:.6g}] within "
                  f"[{report.declared_m:.6g}, {report.declared_M:.6g}]")
            print(f"sup|alpha| {report.alpha_sup:.6g} <= "
                  f"{report.declared_alpha_bound:.6g}; Lipschitz quotient "
                  f"{report.lip_quotient_max:.6g} <= "
                  f"{report.declared_alpha_lip:.6g}")
            print(f"periodicity residual {report.periodicity_residual:.3g}")
            if not report.ok:
                for v in report.violations:
                    print(f"VIOLATION: {v}")
                return 1
            print("all coefficient checks passed")
            return 0

        if args.command == "cell":
            written = run_cell_study(config, out, emit_correctors=args.fields)
        elif args.command == "simulate":
            written = run_simulate_study(config, out)
        elif args.command == "average":
            written = run_average_study(config, out)
        elif args.command == "ergodic":
            result = run_ergodic_study(config, out)
            written = result["written"]
            mix = result["mixing"]
            print(f"fitted mixing rate: {mix.fitted_rate:.4f}")
            meds = window_medians(result["window_rows"],
                                  result["window_epsilons"])
            print("window medians over the epsilon ladder:",
                  np.array2string(meds, precision=5))
        else:  # converge
            report = run_convergence(config)
            written = emit_report(report, out, svg=config.svg)
            ok = True
            for metric in report.metrics:
                med = report.medians(metric)
                mono = bool(np.all(np.diff(med) <= 0.0))
                ok = ok and mono
                print(f"{metric}: medians "
                      f"{np.array2string(med, precision=5)} "
                      f"{'nonincreasing' if mono else 'NOT nonincreasing'}")
            for path in written:
                print(f"wrote {path}")
            return 0 if ok else 1

        for path in written:
            print(f"wrote {path}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CoefficientError as exc:
        print(f"coefficient error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
