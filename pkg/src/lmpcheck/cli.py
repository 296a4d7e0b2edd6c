"""Command-line front end.

Exit codes (frozen):
    0   success / SAT
    1   UNSAT
    2   program raised a Python (interpreter) error
    3   program raised a robot execution error
    64  usage error (bad flags, missing input files)
    65  data error (malformed world, trace, check, task or config)
    69  generator unavailable
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import rtl
from .corpus import BUILTIN_CORPUS, CORPUS_SCHEMA_VERSION, TaskLoadError, load_corpus
from .evaluator import ENGINE_VERSION, lint_corpus, run_eval, write_report
from .gateway import ConfigError, GenerationConfig, GenerationError, load_config, make_generator
from .lang import DEFAULT_BUDGET, SourceProgram
from .resampler import DEFAULT_LIMITS, DEFAULT_RUNS, resample_sweep
from .simulator import PythonError, RobotError, TraceFormatError, dump_trace, load_trace, simulate
from .world import WorldLoadError, load_world_file

EX_OK, EX_UNSAT, EX_PYTHON, EX_ROBOT = 0, 1, 2, 3
EX_USAGE, EX_DATAERR, EX_UNAVAILABLE = 64, 65, 69


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EX_USAGE)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None


def _limits(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"limits must be comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("limits must be positive")
    return vals


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def version_text() -> str:
    return (f"lmpcheck {ENGINE_VERSION} (corpus schema {CORPUS_SCHEMA_VERSION}, "
            f"rtl grammar {rtl.GRAMMAR_VERSION})")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lmpcheck", description="Evaluate robot programs in a symbolic simulator.")
    p.add_argument("--version", action="version", version=version_text())
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one program in one world")
    s.add_argument("program")
    s.add_argument("world")
    s.add_argument("--budget", type=_positive_int, default=DEFAULT_BUDGET)
    s.add_argument("--trace-out", metavar="PATH")

    c = sub.add_parser("check", help="check a saved trace against an RTL check")
    c.add_argument("trace")
    c.add_argument("check")

    for name, hlp in (("eval", "generate, simulate and score a corpus"),
                      ("resample", "rejection-sampling sweep over retry limits")):
        e = sub.add_parser(name, help=hlp)
        e.add_argument("corpus", nargs="?", default=str(BUILTIN_CORPUS))
        e.add_argument("--generator", metavar="CONFIG", help="generator config (default: synthetic)")
        e.add_argument("--seed", type=_seed, required=True)
        e.add_argument("--report-dir", required=True)
        e.add_argument("--jobs", type=_positive_int, default=1)
        e.add_argument("--budget", type=_positive_int, default=DEFAULT_BUDGET)
        if name == "eval":
            e.add_argument("--samples", type=_positive_int)
            e.add_argument("--open-world-only", action="store_true")
        else:
            e.add_argument("--samples", type=_positive_int, default=1)
            e.add_argument("--limits", type=_limits, default=list(DEFAULT_LIMITS))
            e.add_argument("--runs", type=_positive_int, default=DEFAULT_RUNS)

    l = sub.add_parser("lint", help="verify reference solutions and mutant classifications")
    l.add_argument("corpus", nargs="?", default=str(BUILTIN_CORPUS))
    return p


def cmd_simulate(args: argparse.Namespace) -> int:
    text = _read(args.program)
    if not Path(args.world).is_file():
        raise UsageError(f"cannot read {args.world}: no such file")
    world = load_world_file(args.world)
    res = simulate(SourceProgram(text, args.program), world, args.budget)
    if args.trace_out:
        Path(args.trace_out).write_text(dump_trace(res.trace, res.outcome), encoding="utf-8")
    print(res.outcome)
    if isinstance(res.outcome, PythonError):
        print(res.outcome.error, file=sys.stderr)
        return EX_PYTHON
    if isinstance(res.outcome, RobotError):
        print(res.outcome.kind, file=sys.stderr)
        return EX_ROBOT
    return EX_OK


def cmd_check(args: argparse.Namespace) -> int:
    trace = load_trace(_read(args.trace))
    chk = rtl.parse_rtl(_read(args.check))
    res = rtl.check(trace, chk)
    print(res.verdict)
    for label in res.failed_labels:
        print(label)
    return EX_OK if res.sat else EX_UNSAT


def _setup(args: argparse.Namespace):
    tasks = load_corpus(args.corpus)
    cfg = load_config(args.generator) if args.generator else GenerationConfig(backend="synthetic")
    return tasks, cfg, make_generator(cfg, tasks)


def cmd_eval(args: argparse.Namespace) -> int:
    tasks, cfg, gen = _setup(args)
    samples = args.samples or cfg.samples_per_prompt
    run = run_eval(tasks, gen, samples, args.seed, args.jobs, args.budget, args.open_world_only)
    write_report(run.report, args.report_dir)
    r = run.report
    mean = sum((s.pass_at_1 for s in r.scores), 0) / len(r.scores) if r.scores else 0
    print(f"{len(r.scores)} prompts, {samples} samples each, mean pass@1 {float(mean):.4f}")
    return EX_OK


def cmd_resample(args: argparse.Namespace) -> int:
    tasks, cfg, gen = _setup(args)
    sweep = resample_sweep(gen, tasks, args.limits, args.runs, args.seed, args.samples, args.jobs, args.budget)
    sweep.write(args.report_dir)
    for lim in sweep.limits:
        print(f"limit {lim}: executable fraction {float(sweep.executable_fraction(lim)):.4f}")
    return EX_OK


def cmd_lint(args: argparse.Namespace) -> int:
    tasks = load_corpus(args.corpus)
    problems = lint_corpus(tasks)
    for p in problems:
        print(p)
    if not problems:
        print(f"{len(tasks)} tasks ok")
    return EX_DATAERR if problems else EX_OK


COMMANDS = {"simulate": cmd_simulate, "check": cmd_check, "eval": cmd_eval,
            "resample": cmd_resample, "lint": cmd_lint}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"lmpcheck: {e}", file=sys.stderr)
        return EX_USAGE
    except (WorldLoadError, TraceFormatError, rtl.RtlSyntaxError, TaskLoadError, ConfigError) as e:
        print(f"lmpcheck: {e}", file=sys.stderr)
        return EX_DATAERR
    except GenerationError as e:
        print(f"lmpcheck: {e}", file=sys.stderr)
        return EX_UNAVAILABLE


if __name__ == "__main__":
    sys.exit(main())
