"""Command-line entry point: ``randattn <command> [options]``.

Exit codes: 0 success, 2 invalid arguments, 3 numerical degeneracy (or a
failed selftest check), 4 I/O failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys

import numpy as np

from .errors import InvalidArgumentError, NumericalError, TensorFormatError
from .exact import AttentionInputs, softmax_attention
from .features import FeatureMapKind
from .harness.data import (
    CorrelatedGaussian,
    DataSpec,
    FromFile,
    IsotropicGaussian,
    SmoothSequence,
    generate_inputs,
)
from .harness.report import FORMATS, emit_report
from .harness.selftest import run_selftest
from .harness.studies import (
    DEFAULT_GRID,
    METHODS,
    UNBIASED_METHODS,
    MethodOptions,
    approx_error_study,
    run_method,
    scaling_benchmark,
    trial_source,
    unbiasedness_study,
)
from .harness.tensorio import read_tensor, write_tensor
from .proposals import ProposalKind
from .ra import Mode
from .weighting import WeightingKind

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(x) for x in text]
    return [x.strip() for x in str(text).split(",") if x.strip()]


GLOBAL_DEFAULTS = {"seed": 0, "workers": 1, "format": ["csv", "json"], "out_dir": ".",
                   "config": None, "stamp": False}


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Subcommands repeat the global flags so they may follow the command name;
    # their defaults are suppressed so they never overwrite a value given earlier.
    def d(name):
        return argparse.SUPPRESS if suppress else GLOBAL_DEFAULTS[name]

    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d("seed"), help="top-level seed (default 0)")
    g.add_argument("--workers", type=int, default=d("workers"), help="parallel worker processes for trials")
    g.add_argument("--format", type=_name_list, default=d("format"),
                   help="comma-separated report formats from csv,json,svg ('' for none)")
    g.add_argument("--out-dir", default=d("out_dir"), help="directory for report files")
    g.add_argument("--config", default=d("config"), help="JSON file of option defaults; command-line flags win")
    g.add_argument("--stamp", action="store_true", default=d("stamp"),
                   help="record the current UTC time in report metadata")
    return p


def _data_flags(p: argparse.ArgumentParser, n: int, m: int, d: int, gen: str = "isotropic") -> None:
    g = p.add_argument_group("data")
    g.add_argument("--n", type=int, default=n, help="number of queries")
    g.add_argument("--m", type=int, default=m, help="number of keys")
    g.add_argument("--d", type=int, default=d, help="head dimension")
    g.add_argument("--gen", choices=["isotropic", "correlated", "smooth", "file"], default=gen)
    g.add_argument("--scale", type=float, default=1.0, help="isotropic entry scale")
    g.add_argument("--rho", type=float, default=None, help="correlation (correlated) or AR(1) coefficient (smooth)")
    g.add_argument("--query-norm", type=float, default=12.0)
    g.add_argument("--key-spread", type=float, default=0.3)
    g.add_argument("--key-offset", type=float, default=2.0)
    g.add_argument("--heads", type=int, default=1)
    g.add_argument("--data-seed", type=int, default=None, help="data seed (defaults to --seed)")
    g.add_argument("--q", help="query tensor file (with --gen file)")
    g.add_argument("--k", help="key tensor file")
    g.add_argument("--v", help="value tensor file")


def _method_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("estimator options")
    g.add_argument("--feature-kind", choices=[k.value for k in FeatureMapKind], default="positive")
    g.add_argument("--proposal-kind", choices=[k.value for k in ProposalKind], default="local")
    g.add_argument("--weighting", choices=[k.value for k in WeightingKind], default="decoupled")
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--mode", choices=[m.value for m in Mode], default="train")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randattn", description=__doc__.splitlines()[0],
                                     parents=[_global_flags(False)])
    common = _global_flags(True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attend", parents=[common], help="run one estimator on one input")
    _data_flags(p, 64, 64, 16)
    _method_flags(p)
    p.add_argument("--method", choices=(*METHODS, "softmax"), default="lara",
                   help="estimator; softmax is an alias for exact")
    p.add_argument("--samples", type=int, default=16, help="samples S for rfa / ra")
    p.add_argument("--proposals", type=int, default=16, help="proposal count C for lara")
    p.add_argument("--prescaled", action="store_true", help="file queries already carry the 1/sqrt(D) factor")
    p.add_argument("--out", help="write the output matrix as a tensor file")

    p = sub.add_parser("approx-error", parents=[common], help="MSE of each estimator vs exact attention")
    _data_flags(p, 196, 196, 16)
    _method_flags(p)
    p.add_argument("--methods", type=_name_list, default=["ra", "lara", "rfa"])
    p.add_argument("--grid", type=_int_list, default=list(DEFAULT_GRID))
    p.add_argument("--trials", type=int, default=20)

    p = sub.add_parser("unbiasedness", parents=[common], help="per-entry z-scores of the grand mean")
    _data_flags(p, 2, 6, 4)
    p.add_argument("--method", choices=UNBIASED_METHODS, default="ra")
    p.add_argument("--trials", type=int, default=50_000)
    p.add_argument("--samples", type=int, default=1)

    p = sub.add_parser("bench", parents=[common], help="wall time and peak allocation vs sequence length")
    _method_flags(p)
    p.add_argument("--lengths", type=_int_list, default=[1024, 2048, 4096])
    p.add_argument("--methods", type=_name_list, default=["exact", "ra", "rfa", "lara"])
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--proposals", type=int, default=16)
    p.add_argument("--repeats", type=int, default=5)

    sub.add_parser("selftest", parents=[common], help="run the built-in invariant checks")
    return parser


def _parse(argv) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        with open(known.config, encoding="utf-8") as fh:
            defaults = json.load(fh)
        if not isinstance(defaults, dict):
            raise InvalidArgumentError("config file must hold a JSON object")
        defaults = {k.replace("-", "_"): v for k, v in defaults.items()}
        parser.set_defaults(**{k: v for k, v in defaults.items() if k in GLOBAL_DEFAULTS})
        local = {k: v for k, v in defaults.items() if k not in GLOBAL_DEFAULTS}
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                sp.set_defaults(**local)
    return parser.parse_args(argv)


def _generator(args):
    if args.gen == "isotropic":
        return IsotropicGaussian(args.scale)
    if args.gen == "correlated":
        return CorrelatedGaussian(0.5 if args.rho is None else args.rho)
    if args.gen == "smooth":
        rho = 0.9 if args.rho is None else args.rho
        return SmoothSequence(rho, args.query_norm, args.key_spread, args.key_offset)
    if not (args.q and args.k and args.v):
        raise InvalidArgumentError("--gen file needs --q, --k and --v")
    return FromFile(args.q, args.k, args.v)


def _data_spec(args) -> DataSpec:
    seed = args.seed if args.data_seed is None else args.data_seed
    return DataSpec(args.n, args.m, args.d, _generator(args), args.heads, seed)


def _options(args) -> MethodOptions:
    return MethodOptions(FeatureMapKind(args.feature_kind), ProposalKind(args.proposal_kind),
                         WeightingKind(args.weighting), args.beta, Mode(args.mode))


def _emit(report, args) -> None:
    unknown = set(args.format) - set(FORMATS)
    if unknown:
        raise InvalidArgumentError(f"unknown formats {sorted(unknown)}; choose from {FORMATS}")
    if args.stamp:
        report.timestamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    for path in emit_report(report, args.format, args.out_dir):
        print(f"wrote {path}")


def _attend(args) -> int:
    if args.gen == "file" or (args.q and args.k and args.v):
        Q, K, V = read_tensor(args.q), read_tensor(args.k), read_tensor(args.v)
        inputs = AttentionInputs(Q, K, V, prescaled=args.prescaled).scaled()
    else:
        inputs = generate_inputs(_data_spec(args))
    method = "exact" if args.method == "softmax" else args.method
    samples = args.proposals if method == "lara" else args.samples
    Y = run_method(method, inputs, samples, trial_source(args.seed, 0), _options(args))
    if args.out:
        write_tensor(args.out, Y)
    mse = float(np.mean((Y - softmax_attention(inputs)) ** 2))
    print(json.dumps({"method": method, "N": inputs.N, "M": inputs.M, "D": inputs.D,
                      "samples": samples, "mse_vs_exact": mse, "out": args.out}))
    return EXIT_OK


def _approx(args) -> int:
    report = approx_error_study(_data_spec(args), args.methods, args.grid, args.trials, args.seed,
                                _options(args), args.workers)
    _emit(report, args)
    for method, cells in report.summary.items():
        row = "  ".join(f"{g}:{c['mse']:.4g}" if c["mse"] is not None else f"{g}:failed" for g, c in cells.items())
        print(f"{method:10s} {row}")
    return EXIT_OK


def _unbiased(args) -> int:
    report = unbiasedness_study(_data_spec(args), args.method, args.trials, args.samples, args.seed, args.workers)
    _emit(report, args)
    s = report.summary
    print(f"{args.method}: {s['fraction_within_4']:.3f} of {s['entries']} entries with |z| <= 4 "
          f"(max |z| = {s['max_abs_z']:.3g})")
    return EXIT_OK


def _bench(args) -> int:
    report = scaling_benchmark(args.lengths, args.methods, args.d, args.samples, args.proposals,
                               args.repeats, args.seed, _options(args))
    _emit(report, args)
    for rec in report.records:
        t = "skipped" if rec["wall_time"] is None else f"{rec['wall_time'] * 1e3:.2f} ms"
        print(f"{rec['method']:10s} N={rec['N']:6d} {t}  peak={rec['peak_alloc']}")
    return EXIT_OK


def _selftest(args) -> int:
    report = run_selftest(args.seed)
    _emit(report, args)
    for rec in report.records:
        print(f"{'PASS' if rec['passed'] else 'FAIL'} {rec['check']}: {rec['value']} (tol {rec['tolerance']})")
    return EXIT_OK if all(r["passed"] for r in report.records) else EXIT_NUMERIC


COMMANDS = {"attend": _attend, "approx-error": _approx, "unbiasedness": _unbiased,
            "bench": _bench, "selftest": _selftest}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
        if args.workers < 1:
            raise InvalidArgumentError("--workers must be at least 1")
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_ARGS
    except TensorFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidArgumentError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
