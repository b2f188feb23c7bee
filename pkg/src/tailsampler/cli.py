"""Command-line entry point.

Exit codes: 0 success, 1 property failure, 2 input error, 3 sampler/runtime
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._seeding import derive_seed
from .bns import BnsConfig, train_toy_embeddings
from .data_model import Variant, parse_manifest, subset_csv
from .dpp import monte_carlo_marginals, sample_standard
from .errors import InputError, TailSamplerError
from .experiment import SyntheticConfig, TrainingSchedule, run_two_stage
from .ipdpp import SamplerConfig, balanced_resample, selected_indices
from .stochastic_matrix import build_stochastic_matrix, validate_lemmas
from .verification import SUITES, bound_rows_csv, run_suite

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def _manifest_probs(manifest, label):
    idx = np.arange(len(manifest)) if label is None else manifest.indices_of(label)
    if idx.size == 0:
        raise InputError(f"class {label} has no items")
    p = manifest.probabilities[idx]
    if np.isnan(p).any():
        raise InputError("every item needs a probability")
    return idx, p


# -- commands ----------------------------------------------------------------

def cmd_sample(args) -> int:
    manifest = parse_manifest(args.input, args.format)
    k = args.k if args.k is not None else 10 * min(n for n in manifest.class_counts.values() if n > 0)
    config = SamplerConfig(k=k, seed=args.seed, variant=Variant(args.variant), topup=not args.no_topup)
    samples = balanced_resample(manifest, config)
    _emit(subset_csv(manifest, selected_indices(samples)), args.output)
    summary = sys.stdout if args.output not in (None, "-") else sys.stderr
    print("class,available,selected", file=summary)
    for c in sorted(samples):
        print(f"{c},{manifest.class_counts[c]},{len(samples[c])}", file=summary)
    return EXIT_OK


def cmd_dpp_sample(args) -> int:
    manifest = parse_manifest(args.input, args.format)
    idx, p = _manifest_probs(manifest, args.class_label)
    sample = sample_standard(build_stochastic_matrix(p), args.seed, Variant(args.variant))
    _emit(subset_csv(manifest, idx[sample.sorted()]), args.output)
    return EXIT_OK


def cmd_dpp_verify(args) -> int:
    if args.input:
        manifest = parse_manifest(args.input, args.format)
        _, p = _manifest_probs(manifest, args.class_label)
    else:
        p = np.random.default_rng(derive_seed(args.seed, "dpp-verify")).random(args.n)
    report = monte_carlo_marginals(build_stochastic_matrix(p), args.seed, args.draws, Variant(args.variant))
    _emit(report.to_csv(), args.output)
    frac = report.fraction_within(3.0)
    print(f"# {frac:.1%} of items within 3 standard errors over {args.draws} draws", file=sys.stderr)
    return EXIT_OK if frac >= 0.95 else EXIT_PROPERTY


def cmd_verify(args) -> int:
    if args.matrix:
        manifest = parse_manifest(args.matrix, args.format)
        _, p = _manifest_probs(manifest, args.class_label)
        rep = validate_lemmas(build_stochastic_matrix(p))
        _emit(json.dumps(rep.as_dict()) + "\n", args.output)
        return EXIT_OK if rep.ok else EXIT_PROPERTY

    suites = SUITES if args.suite == "all" else (args.suite,)
    ok = True
    print(f"{'suite':<7} {'check':<68} {'trials':>6} {'fail':>5} {'worst':>10}  result")
    for name in suites:
        checks = run_suite(name, args.trials, args.seed, inject_fault=args.inject_fault)
        for chk in checks:
            ok &= chk.passed
            verdict = "PASS" if chk.passed else "FAIL"
            print(f"{name:<7} {chk.name:<68} {chk.trials:>6} {chk.failures:>5} {chk.worst:>10.3g}  {verdict}")
            if not chk.passed:
                print(f"        replay: {json.dumps(chk.replay, default=str)}")
            if chk.rows and args.output:
                _emit(bound_rows_csv(chk), args.output)
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_experiment(args) -> int:
    config = SyntheticConfig(
        num_classes=args.classes,
        max_class_size=args.n1,
        imbalance_factor=args.imbalance,
        dim=args.dim if args.dim is not None else args.classes,
        class_separation=args.separation,
        noise_sigma=args.sigma,
        seed=args.seed,
        test_per_class=args.test_per_class,
    )
    sizes = config.class_sizes()
    k = args.k if args.k is not None else 10 * min(sizes)
    sampler = SamplerConfig(k=k, seed=args.seed, variant=Variant(args.variant), topup=True)
    seeds = [derive_seed(args.seed, "experiment", i) for i in range(args.seeds)]
    schedule = TrainingSchedule(args.warmup_epochs, args.stage2_epochs, args.lr)
    pretrain = None
    if args.bns_pretrain:
        pretrain = BnsConfig(tau=args.tau, m=min(args.m, min(sizes) - 1), n=args.n)
    report = run_two_stage(config, sampler, args.resample_every, seeds=seeds, schedule=schedule, pretrain=pretrain)
    _emit(report.to_json(), args.output)
    csv_path = args.csv
    if csv_path is None and args.output not in (None, "-"):
        csv_path = str(Path(args.output).with_suffix(".csv"))
    if csv_path:
        _emit(report.to_csv(), csv_path)
    return EXIT_OK


def cmd_bns_toy(args) -> int:
    rng = np.random.default_rng(derive_seed(args.seed, "bns-toy-data"))
    angles = np.linspace(0, 2 * np.pi, args.classes, endpoint=False)
    centres = np.zeros((args.classes, args.dim))
    centres[:, 0] = np.cos(angles)
    centres[:, 1 % args.dim] += np.sin(angles)
    y = np.repeat(np.arange(args.classes), args.per_class)
    X = centres[y] + args.spread * rng.standard_normal((y.size, args.dim))
    config = BnsConfig(tau=args.tau, m=args.m, n=args.n)
    result = train_toy_embeddings(X, y, config, steps=args.steps, lr=args.lr, seed=args.seed, noise=args.noise)
    _emit(result.to_csv(), args.output)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def globals_(default_seed, default_output):
        g = _Parser(add_help=False)
        g.add_argument("--seed", type=int, default=default_seed, help="root seed (default 42)")
        g.add_argument("--output", "--out", dest="output", default=default_output, help="output path (default stdout)")
        return g

    # flags may come before or after the subcommand; the sub-level copy must
    # not overwrite a value given at the top level
    common = globals_(argparse.SUPPRESS, argparse.SUPPRESS)
    parser = _Parser(prog="tailsampler", description=__doc__, parents=[globals_(42, None)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def manifest_args(p, required=True):
        p.add_argument("--input", required=required, help="manifest (CSV or JSONL)")
        p.add_argument("--format", choices=["csv", "jsonl"], default=None)

    variants = [Variant.PAPER_ARGMAX.value, Variant.PROBABILISTIC.value]

    p = sub.add_parser("sample", parents=[common], help="balanced per-class resampling")
    manifest_args(p)
    p.add_argument("--k", type=int, default=None, help="per-class cardinality (default 10 x smallest class)")
    p.add_argument("--variant", choices=variants + [Variant.EXACT_KDPP_ORACLE.value], default=variants[0])
    p.add_argument("--no-topup", action="store_true", help="keep the truncated eigenvector walk as is")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dpp-sample", parents=[common], help="one draw from the unconstrained DPP")
    manifest_args(p)
    p.add_argument("--class", dest="class_label", type=int, default=None, help="restrict to one class")
    p.add_argument("--variant", choices=variants, default=variants[0])
    p.set_defaults(func=cmd_dpp_sample)

    p = sub.add_parser("dpp-verify", parents=[common], help="Monte-Carlo marginals vs diag(K)")
    manifest_args(p, required=False)
    p.add_argument("--class", dest="class_label", type=int, default=None)
    p.add_argument("--n", type=int, default=12, help="ground-set size when no manifest is given")
    p.add_argument("--draws", type=int, default=200_000)
    p.add_argument("--variant", choices=variants, default=Variant.PROBABILISTIC.value)
    p.set_defaults(func=cmd_dpp_verify)

    p = sub.add_parser("verify", parents=[common], help="run property suites")
    p.add_argument("--suite", choices=list(SUITES) + ["all"], default="all")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--matrix", default=None, help="manifest whose kernel is checked; prints a JSON report")
    p.add_argument("--format", choices=["csv", "jsonl"], default=None)
    p.add_argument("--class", dest="class_label", type=int, default=None)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", parents=[common], help="synthetic two-stage long-tail run")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--n1", type=int, default=500)
    p.add_argument("--if", dest="imbalance", type=float, default=100.0)
    p.add_argument("--dim", type=int, default=None, help="feature dimension (default: number of classes)")
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--test-per-class", type=int, default=100)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--variant", choices=variants, default=variants[0])
    p.add_argument("--resample-every", type=int, default=10)
    p.add_argument("--warmup-epochs", type=int, default=200)
    p.add_argument("--stage2-epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--csv", default=None, help="per-seed CSV (default: next to --output)")
    p.add_argument("--bns-pretrain", action="store_true", help="embed features with BNS toy training first")
    p.add_argument("--m", type=int, default=6, help="extra positives for --bns-pretrain (capped at smallest class - 1)")
    p.add_argument("--n", type=int, default=5, help="negatives for --bns-pretrain")
    p.add_argument("--tau", type=float, default=0.3, help="temperature for --bns-pretrain")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bns-toy", parents=[common], help="toy embedding training with the BNS loss")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--spread", type=float, default=0.6)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--noise", type=float, default=0.05)
    p.set_defaults(func=cmd_bns_toy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"tailsampler: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TailSamplerError as exc:
        print(f"tailsampler: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"tailsampler: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
