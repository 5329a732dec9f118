"""Command-line interface: marcus, rate, sweep, overlap, and validate.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 numerical
singularity, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import sys

from .core import (OFF_RESONANT, RESONANT, ConfigError, ConvergenceError,
                   SingularityError, build_system)
from .fock import overlap_matrix, overlap_matrix_oracle
from .harness import (build_sweep, config_hash, emit_csv, load_config,
                      result_metadata, run_sweep, validation_report)
from .marcus import marcus_result
from .offres import pmet_rate_offres
from .resonant import pmet_rate_resonant

_MODE_WORDS = {"resonant": RESONANT, "offres": OFF_RESONANT,
               "off_resonant": OFF_RESONANT}
_PATHWAY_WORDS = {"total": "total", "direct": "direct_only",
                  "bridge": "bridge_only"}


def _emit(result, out, metadata=None):
    if out is None:
        emit_csv(result, sys.stdout, metadata=None)
    else:
        emit_csv(result, out, metadata=metadata)


def _cmd_marcus(args):
    record = load_config(args.config)
    result = marcus_result(build_system(record))
    _emit(result, args.out, result_metadata(record))
    return 0


def _cmd_rate(args):
    record = load_config(args.config)
    spec = build_system(record)
    if args.mode is not None:
        wanted = _MODE_WORDS[args.mode]
        if wanted != spec.mode:
            raise ConfigError("--mode %s does not match config mode %r"
                              % (args.mode, spec.mode), key="mode")
    if spec.mode == RESONANT:
        if args.pathway is not None:
            raise ConfigError("--pathway applies only to off-resonant rates",
                              key="pathway")
        result = pmet_rate_resonant(spec, skip_poles=args.skip_poles)
    else:
        pathway = _PATHWAY_WORDS[args.pathway or "total"]
        result = pmet_rate_offres(spec, pathway, skip_poles=args.skip_poles)
    if result.poles_skipped:
        print("warning: %d channel(s) skipped at photon-shifted resonances"
              % result.poles_skipped, file=sys.stderr)
    _emit(result, args.out, result_metadata(record))
    return 0


def _cmd_sweep(args):
    record = load_config(args.config)
    sweep = build_sweep(record)
    result = run_sweep(sweep, workers=args.workers, skip_poles=args.skip_poles)
    skipped = sum(r.poles_skipped for r in result.rows)
    if skipped:
        print("warning: %d channel(s) skipped at photon-shifted resonances"
              % skipped, file=sys.stderr)
    _emit(result, args.out, result.metadata)
    return 0


def _cmd_overlap(args):
    if args.oracle:
        n_work = args.n_work if args.n_work is not None else 4 * args.size
        matrix = overlap_matrix_oracle(args.d, args.size, n_work)
    else:
        matrix = overlap_matrix(args.d, args.size)
    metadata = result_metadata({"d": args.d, "size": args.size,
                                "oracle": bool(args.oracle)})
    _emit(matrix, args.out, metadata)
    return 0


def _cmd_validate(args):
    failures = 0
    for name, passed, detail in validation_report():
        print("%s %s (%s)" % ("PASS" if passed else "FAIL", name, detail))
        failures += 0 if passed else 1
    return 0 if failures == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pmet",
        description="Electron-transfer rates for donor-bridge-acceptor systems "
                    "in and out of an optical cavity.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("marcus", help="cavity-free superexchange rate as one CSV row")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_marcus)

    p = sub.add_parser("rate", help="cavity-mediated rate with channel table")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=sorted(_MODE_WORDS), default=None)
    p.add_argument("--pathway", choices=sorted(_PATHWAY_WORDS), default=None)
    p.add_argument("--skip-poles", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("sweep", help="rate along one parameter axis")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--skip-poles", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("overlap", help="displacement overlap matrix as CSV")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--oracle", action="store_true",
                   help="use the matrix-exponential oracle instead of the closed form")
    p.add_argument("--n-work", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_overlap)

    p = sub.add_parser("validate",
                       help="run oracle-equivalence and reduction checks")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except SingularityError as exc:
        print("numerical singularity: %s" % exc, file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print("non-convergence: %s" % exc, file=sys.stderr)
        return 4
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
