"""End-to-end evaluation: simulate, check, classify failures, score, aggregate."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import rtl
from .corpus import CORPUS_SCHEMA_VERSION, NoOpenWorldClauses, TaskDefinition, open_world_subset
from .gateway import GeneratorPort, PromptRef
from .lang import DEFAULT_BUDGET, SourceProgram
from .simulator import PythonError, RobotError, simulate

ENGINE_VERSION = "0.1.0"
CATEGORIES = ("PythonError", "RobotError", "TaskCompletion")


@dataclass(frozen=True, order=True)
class FailureRecord:
    task: str
    prompt: int
    sample: int
    case: int
    category: str
    kinds: tuple[str, ...]

    def __post_init__(self) -> None:
        assert self.category in CATEGORIES, self.category
        assert self.kinds, "a failure names at least one kind"

    @property
    def descriptor(self) -> str:
        return f"{self.category}:{'+'.join(self.kinds)}"


@dataclass(frozen=True)
class CaseVerdict:
    case: int
    outcome: str
    check: str | None  # "SAT" | "UNSAT", None when the run did not finish
    passed: bool


@dataclass(frozen=True)
class SampleResult:
    verdicts: tuple[CaseVerdict, ...]
    failures: tuple[FailureRecord, ...]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def evaluate_sample(
    program: SourceProgram | str,
    task: TaskDefinition,
    prompt: int = 0,
    sample: int = 0,
    budget: int = DEFAULT_BUDGET,
) -> SampleResult:
    """Run ``program`` on every world case of ``task``; each failing case yields one record.

    A Python error outranks a robot error, which outranks a failed check.
    """
    verdicts = []
    failures = []
    for k, case in enumerate(task.cases):
        res = simulate(program, case.world, budget)
        outcome = res.outcome
        if isinstance(outcome, (PythonError, RobotError)):
            cat = "PythonError" if isinstance(outcome, PythonError) else "RobotError"
            verdicts.append(CaseVerdict(k, str(outcome), None, False))
            failures.append(FailureRecord(task.name, prompt, sample, k, cat, (outcome.kind,)))
            continue
        cr = rtl.check(res.trace, case.check)
        verdicts.append(CaseVerdict(k, str(outcome), cr.verdict, cr.sat))
        if not cr.sat:
            failures.append(FailureRecord(task.name, prompt, sample, k, "TaskCompletion", cr.failed_labels))
    return SampleResult(tuple(verdicts), tuple(failures))


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased pass@k estimate ``1 - C(n-c, k) / C(n, k)``.

    Uses the product form ``prod_{i=n-c+1}^{n} (1 - k/i)`` in exact rationals.
    """
    for name, v in (("n", n), ("c", c), ("k", k)):
        if not isinstance(v, int) or isinstance(v, bool):
            raise ValueError(f"pass_at_k: {name} must be an int, got {v!r}")
    if not 0 <= c <= n:
        raise ValueError(f"pass_at_k: need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"pass_at_k: need 1 <= k <= n, got k={k}, n={n}")
    if n - c < k:
        return 1.0
    miss = Fraction(1)
    for i in range(n - c + 1, n + 1):
        miss *= Fraction(i - k, i)
    return float(1 - miss)


@dataclass(frozen=True, order=True)
class PromptScore:
    task: str
    prompt: int
    n: int
    c: int

    def __post_init__(self) -> None:
        if not 0 <= self.c <= self.n or self.n < 1:
            raise ValueError(f"invalid score n={self.n}, c={self.c}")

    @property
    def prompt_id(self) -> str:
        return f"{self.task}/p{self.prompt}"

    @property
    def pass_at_1(self) -> Fraction:
        return Fraction(self.c, self.n)


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class Report:
    cdf: list[tuple[Fraction, Fraction]]
    per_task: dict[str, tuple[Fraction, Fraction, Fraction]]
    categories: dict[str, int]
    python_kinds: dict[str, int]
    robot_kinds: dict[str, int]
    completion_labels: dict[str, int]
    zero_pass_fraction: Fraction
    scores: list[PromptScore] = field(default_factory=list)
    failures: list[FailureRecord] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)


def cdf_points(values: Sequence[Fraction], ns: Iterable[int]) -> list[tuple[Fraction, Fraction]]:
    """Fraction of values >= t for every threshold t = i/n."""
    thresholds = {Fraction(0), Fraction(1)}
    for n in ns:
        thresholds.update(Fraction(i, n) for i in range(n + 1))
    total = len(values)
    out = []
    for t in sorted(thresholds):
        hit = sum(1 for v in values if v >= t)
        out.append((t, Fraction(hit, total) if total else Fraction(0)))
    return out


def _count(items: Iterable[str]) -> dict[str, int]:
    out: dict[str, int] = {}
    for it in items:
        out[it] = out.get(it, 0) + 1
    return dict(sorted(out.items()))


def aggregate(
    scores: Sequence[PromptScore],
    failures: Sequence[FailureRecord] = (),
    metadata: dict[str, Any] | None = None,
) -> Report:
    scores = sorted(scores)
    failures = sorted(failures)
    values = [s.pass_at_1 for s in scores]
    by_task: dict[str, list[Fraction]] = {}
    for s in scores:
        by_task.setdefault(s.task, []).append(s.pass_at_1)
    per_task = {
        t: (sum(v, Fraction(0)) / len(v), min(v), max(v)) for t, v in sorted(by_task.items())
    }
    zero = Fraction(sum(1 for s in scores if s.c == 0), len(scores)) if scores else Fraction(0)
    return Report(
        cdf=cdf_points(values, {s.n for s in scores}),
        per_task=per_task,
        categories={c: sum(1 for f in failures if f.category == c) for c in CATEGORIES},
        python_kinds=_count(f.kinds[0] for f in failures if f.category == "PythonError"),
        robot_kinds=_count(f.kinds[0] for f in failures if f.category == "RobotError"),
        completion_labels=_count(k for f in failures if f.category == "TaskCompletion" for k in f.kinds),
        zero_pass_fraction=zero,
        scores=list(scores),
        failures=list(failures),
        metadata=dict(metadata or {}),
    )


def fmt(x: Fraction | float) -> str:
    return f"{float(x):.4f}"


def _csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def report_files(report: Report) -> dict[str, str]:
    """Render every report file as text, keyed by file name."""
    doc = {
        "metadata": report.metadata,
        "prompts": len(report.scores),
        "zero_pass_fraction": fmt(report.zero_pass_fraction),
        "cdf": [{"threshold": fmt(t), "fraction": fmt(f)} for t, f in report.cdf],
        "per_task": {t: {"mean": fmt(m), "min": fmt(lo), "max": fmt(hi)}
                     for t, (m, lo, hi) in report.per_task.items()},
        "failure_categories": report.categories,
        "python_error_kinds": report.python_kinds,
        "robot_error_kinds": report.robot_kinds,
        "completion_categories": report.completion_labels,
    }
    return {
        "report.json": json.dumps(doc, indent=2, sort_keys=True) + "\n",
        "cdf.csv": _csv(["threshold", "fraction_at_or_above"], [(fmt(t), fmt(f)) for t, f in report.cdf]),
        "per_task.csv": _csv(["task", "mean_pass_at_1", "min_pass_at_1", "max_pass_at_1"],
                             [(t, fmt(m), fmt(lo), fmt(hi)) for t, (m, lo, hi) in report.per_task.items()]),
        "prompt_scores.csv": _csv(["prompt_id", "n", "c", "pass_at_1"],
                                  [(s.prompt_id, s.n, s.c, fmt(s.pass_at_1)) for s in report.scores]),
        "failures.csv": _csv(["task", "prompt", "sample", "case", "category", "kinds"],
                             [(f.task, f.prompt, f.sample, f.case, f.category, "+".join(f.kinds))
                              for f in report.failures]),
    }


def write_report(report: Report, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in report_files(report).items():
        path = directory / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class EvalRun:
    report: Report
    results: dict[tuple[str, int, int], SampleResult]


def select_open_world(tasks: Sequence[TaskDefinition]) -> list[TaskDefinition]:
    """Open-world ablation: keep tagged tasks, reduced to their open-world clauses."""
    out = []
    for t in tasks:
        try:
            out.append(open_world_subset(t))
        except NoOpenWorldClauses:
            continue
    return out


def run_eval(
    tasks: Sequence[TaskDefinition],
    generator: GeneratorPort,
    samples: int,
    seed: Any,
    jobs: int = 1,
    budget: int = DEFAULT_BUDGET,
    open_world_only: bool = False,
    extra_metadata: dict[str, Any] | None = None,
) -> EvalRun:
    """Generate ``samples`` programs per prompt, evaluate each, and aggregate.

    Units run on ``jobs`` threads; results are folded in sorted order so the
    report does not depend on scheduling.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if open_world_only:
        tasks = select_open_world(tasks)
    units = [
        (t, PromptRef(t.name, i, text, s, samples, seed))
        for t in tasks
        for i, text in enumerate(t.prompts)
        for s in range(samples)
    ]

    def work(unit: tuple[TaskDefinition, PromptRef]) -> tuple[tuple[str, int, int], SampleResult]:
        task, ref = unit
        prog = generator.next_candidate(ref, 1)
        return (task.name, ref.index, ref.sample), evaluate_sample(prog, task, ref.index, ref.sample, budget)

    if jobs == 1:
        done = [work(u) for u in units]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(work, units))
    results = dict(sorted(done, key=lambda kv: kv[0]))

    scores = []
    for t in tasks:
        for i in range(len(t.prompts)):
            c = sum(1 for s in range(samples) if results[(t.name, i, s)].passed)
            scores.append(PromptScore(t.name, i, samples, c))
    failures = [f for r in results.values() for f in r.failures]
    meta = {
        "engine_version": ENGINE_VERSION,
        "corpus_schema": CORPUS_SCHEMA_VERSION,
        "rtl_grammar": rtl.GRAMMAR_VERSION,
        "generator": getattr(generator, "backend_id", type(generator).__name__),
        "seed": str(seed),
        "samples": samples,
        "tasks": [t.name for t in tasks],
        "budget": budget,
        "open_world_only": open_world_only,
    }
    prefix = getattr(generator, "prefix", None)
    if prefix is not None:
        meta["prompt_prefix"] = {"version": prefix.version, "sha256": prefix.sha256}
    meta.update(extra_metadata or {})
    return EvalRun(aggregate(scores, failures, meta), results)


# ---------------------------------------------------------------------------
# corpus lint


def lint_corpus(tasks: Sequence[TaskDefinition], budget: int = DEFAULT_BUDGET) -> list[str]:
    """Check that solutions pass and every mutant fails exactly as declared.

    A mutant must fail at least one case, and every failing case must carry
    one of the mutant's expected descriptors.
    """
    problems = []
    for t in tasks:
        if not t.solutions:
            problems.append(f"{t.name}: no reference solution")
        for sol in t.solutions:
            r = evaluate_sample(sol, t, budget=budget)
            if not r.passed:
                got = ", ".join(f.descriptor for f in r.failures)
                problems.append(f"{t.name}: solution {sol.origin} fails: {got}")
        for m in t.mutants:
            r = evaluate_sample(m.program, t, budget=budget)
            if r.passed:
                problems.append(f"{t.name}: mutant {m.program.origin} passes every case")
            for f in r.failures:
                if f.descriptor not in m.expected:
                    problems.append(
                        f"{t.name}: mutant {m.program.origin} case {f.case}: got {f.descriptor}, "
                        f"expected {' or '.join(m.expected)}"
                    )
    return problems
