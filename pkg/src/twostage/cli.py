"""Command-line entry point: ``twostage simulate|corpus|test|advise|synth-corpus``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import corpus, mcsim, randgen, stattests
from ._io import atomic_write_text
from .errors import DataError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3

FOOTNOTE8_DISCLAIMER = (
    "note: footnote8 mode applies an illustrative cut-off (|skewness| < 4.8/sqrt(n) or n <= 12) "
    "that its own author calls arbitrary; do not treat it as a validated rule."
)
GUIDELINES_DISCLAIMER = (
    "note: the symmetry, tail and outlier thresholds are choices of this tool; "
    "the underlying guidelines give no numeric values."
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


def _default_seed() -> int:
    env = os.environ.get("TWOSTAGE_SEED")
    if env is None:
        return 42
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"TWOSTAGE_SEED must be an integer, got {env!r}") from None


def read_values(path: str) -> np.ndarray:
    """One number per line; blank lines and ``#`` comments are ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        token = line.split("#", 1)[0].strip()
        if not token:
            continue
        try:
            v = float(token)
        except ValueError:
            raise DataError(f"{path} line {lineno}: not a number: {token!r}") from None
        if not np.isfinite(v):
            raise DataError(f"{path} line {lineno}: non-finite value {token!r}")
        values.append(v)
    if not values:
        raise DataError(f"{path}: no values")
    return np.asarray(values)


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ commands

def cmd_simulate(args) -> int:
    dists = [randgen.get_spec(d.strip()) for d in args.dists.split(",") if d.strip()]
    if args.reps < 1:
        raise UsageError(f"--reps must be positive, got {args.reps}")
    if args.threads < 1:
        raise UsageError(f"--threads must be positive, got {args.threads}")
    config = mcsim.SimConfig(
        distributions=tuple(dists),
        sizes_per_group=tuple(_int_list(args.sizes)),
        replications=args.reps,
        shift_in_sd=args.shift,
        alpha=args.alpha,
        normality_alpha=args.normality_alpha,
        master_seed=args.seed,
    )
    report = mcsim.run_table1(config, threads=args.threads)
    _emit(mcsim.report_render(report, args.format), args.out)
    logging.getLogger(__name__).info("simulation took %.1f s", report.elapsed_seconds)
    return EXIT_OK


def _print_summary(summary: corpus.CorpusSummary) -> None:
    print(f"variables screened: {summary.total_variables} (skipped: {summary.skipped})")
    print(f"rejections at p < {summary.alpha:g}:")
    for label, count in summary.bin_counts.items():
        prop = summary.reject_proportion_by_bin[label]
        shown = "-" if prop is None else f"{prop:.1%}"
        print(f"  {label:<10} {summary.bin_rejections[label]:>5} / {count:<5} {shown}")
    over50 = summary.reject_proportion_n_gt_50
    print(f"  {'n>50':<10} {'-' if over50 is None else f'{over50:.1%}'}")
    print(f"variables with n > 250: {summary.count_n_gt_250}, passing normality: "
          f"{summary.count_n_gt_250_passing}")
    if summary.min_distinct is not None:
        print(f"small-count filter: fewer than {summary.min_distinct} distinct values dropped")


def cmd_corpus(args) -> int:
    manifest = corpus.load_manifest(args.manifest)
    issues: list[str] = []
    variables = corpus.extract_variables(manifest, issues)
    records, summary = corpus.screen_corpus(variables, args.alpha, min_distinct=manifest.min_distinct)
    if args.records:
        atomic_write_text(args.records, corpus.records_csv(records))
    if args.svg:
        corpus.scatter_svg(records, args.svg, args.alpha)
    if args.summary:
        _print_summary(summary)
    elif not args.records:
        sys.stdout.write(corpus.records_csv(records))
    return EXIT_OK


def _outcome_lines(label: str, o: stattests.TestOutcome) -> list[str]:
    lines = [f"[{label}]", f"method: {o.method.value}", f"statistic: {o.statistic!r}",
             f"p_value: {o.p_value!r}", f"exact: {str(o.exact).lower()}", f"n1: {o.n1}", f"n2: {o.n2}"]
    if o.df is not None:
        lines.append(f"df: {o.df:g}")
    if o.branch_taken is not None:
        lines.append(f"branch_taken: {o.branch_taken.value}")
        lines.append(f"gate_p_value: {o.gate.p_value!r}")
    return lines


def cmd_test(args) -> int:
    x = read_values(args.x)
    y = read_values(args.y)
    alpha = args.normality_alpha
    runners = {
        "t": lambda: stattests.t_test_two_sample(x, y),
        "wilcoxon": lambda: stattests.wilcoxon_rank_sum(x, y),
        "combined": lambda: stattests.combined_test(x, y, alpha),
        "shapiro": lambda: stattests.shapiro_wilk(stattests.pooled_residuals(x, y)),
    }
    if args.method == "all":
        results = stattests.run_all(x, y, alpha)
    else:
        results = {args.method: runners[args.method]()}
    if args.json:
        print(json.dumps({k: v.to_dict() for k, v in results.items()}, indent=2))
    else:
        blocks = ["\n".join(_outcome_lines(k, v)) for k, v in results.items()]
        print("\n\n".join(blocks))
    return EXIT_OK


def cmd_advise(args) -> int:
    x = read_values(args.x)
    y = read_values(args.y)
    thresholds = stattests.AdviceThresholds(
        symmetric=args.symmetric_threshold, tail=args.tail_threshold, outlier_k=args.outlier_k)
    rep = stattests.advise(x, y, args.mode, thresholds)
    disclaimer = FOOTNOTE8_DISCLAIMER if rep.mode is stattests.AdviceMode.FOOTNOTE8 else GUIDELINES_DISCLAIMER
    if args.json:
        d = rep.to_dict()
        d["disclaimer"] = disclaimer
        print(json.dumps(d, indent=2))
        return EXIT_OK
    fmt = lambda vals: ", ".join("n/a" if v is None else f"{v:.4f}" for v in vals)  # noqa: E731
    print(f"recommendation: {rep.recommendation.value}")
    print(f"rule_fired: {rep.rule_fired}")
    print(f"mode: {rep.mode.value}")
    print(f"n_min: {rep.n_min}")
    print(f"skewness_per_group: {fmt(rep.skewness_per_group)}")
    print(f"excess_kurtosis_per_group: {fmt(rep.kurtosis_per_group)}")
    print(f"outlier_count: {rep.outlier_count}")
    if rep.pooled_skewness is not None:
        print(f"pooled_residual_skewness: {rep.pooled_skewness:.4f}")
    print(disclaimer)
    return EXIT_OK


def cmd_synth_corpus(args) -> int:
    path = corpus.write_synthetic_corpus(args.out, _int_list(args.sizes), args.per_size, args.seed)
    print(path)
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twostage", description="Two-sample testing with and without a normality gate.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte Carlo type-I error and power table")
    s.add_argument("--reps", type=int, default=mcsim.DEFAULT_REPS)
    s.add_argument("--seed", type=int, default=None, help="master seed (default: $TWOSTAGE_SEED or 42)")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--normality-alpha", type=float, default=0.05)
    s.add_argument("--shift", type=float, default=0.5, help="location shift in true SDs")
    s.add_argument("--sizes", default=",".join(map(str, mcsim.DEFAULT_SIZES)))
    s.add_argument("--dists", default=",".join(randgen.CANONICAL))
    s.add_argument("--format", choices=("md", "csv", "json"), default="md")
    s.add_argument("--out", default=None)
    s.add_argument("--threads", type=int, default=1, help="worker processes; output does not depend on it")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("corpus", help="Shapiro-Wilk screening of a dataset corpus")
    c.add_argument("--manifest", required=True)
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--records", default=None, help="write records CSV here")
    c.add_argument("--svg", default=None, help="write the p-value vs n scatter here")
    c.add_argument("--summary", action="store_true", help="print rejection proportions per size bin")
    c.set_defaults(func=cmd_corpus)

    t = sub.add_parser("test", help="run two-sample tests on two data files")
    t.add_argument("--x", required=True)
    t.add_argument("--y", required=True)
    t.add_argument("--method", choices=("t", "wilcoxon", "combined", "shapiro", "all"), default="all")
    t.add_argument("--normality-alpha", type=float, default=0.05)
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=cmd_test)

    a = sub.add_parser("advise", help="parametric or nonparametric?")
    a.add_argument("--x", required=True)
    a.add_argument("--y", required=True)
    a.add_argument("--mode", choices=("guidelines", "footnote8"), default="guidelines")
    defaults = stattests.AdviceThresholds()
    a.add_argument("--symmetric-threshold", type=float, default=defaults.symmetric)
    a.add_argument("--tail-threshold", type=float, default=defaults.tail)
    a.add_argument("--outlier-k", type=float, default=defaults.outlier_k)
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_advise)

    g = sub.add_parser("synth-corpus", help="write a synthetic Gamma(2,1) corpus and manifest")
    g.add_argument("--out", required=True)
    g.add_argument("--sizes", default=",".join(map(str, corpus.SYNTHETIC_SIZES)))
    g.add_argument("--per-size", type=int, default=50)
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(func=cmd_synth_corpus)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        if getattr(args, "seed", "absent") is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
