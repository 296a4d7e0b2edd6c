"""Rejection sampling: regenerate until a candidate survives stochastic simulation."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .corpus import TaskDefinition
from .evaluator import (
    ENGINE_VERSION,
    PromptScore,
    SampleResult,
    _csv,
    cdf_points,
    evaluate_sample,
    fmt,
)
from .gateway import GenerationError, GeneratorPort, PromptRef
from .lang import DEFAULT_BUDGET, SourceProgram
from .simulator import simulate_stochastic
from .world import StochasticWorldSpec

DEFAULT_RUNS = 5
DEFAULT_LIMITS = (2, 4, 8, 100)


@dataclass(frozen=True)
class AttemptSummary:
    attempt: int
    program: SourceProgram | None
    failure: str | None  # None when every run was clean


@dataclass(frozen=True)
class ResampleOutcome:
    accepted: SourceProgram | None
    attempts_used: int
    attempts: tuple[AttemptSummary, ...]

    @property
    def last_candidate(self) -> SourceProgram | None:
        """The program a deployment would end up with: the accepted one, else the last generated."""
        for a in reversed(self.attempts):
            if a.program is not None:
                return a.program
        return None

    def at_limit(self, limit: int) -> "ResampleOutcome":
        """The outcome a run with ``max_retries=limit`` would have produced.

        Valid because attempts are sequential and each attempt's seeds depend
        only on (seed, attempt, run).
        """
        if limit < 1:
            raise ValueError("limit must be >= 1")
        kept = self.attempts[:limit]
        accepted = self.accepted if self.attempts_used <= limit else None
        return ResampleOutcome(accepted, len(kept), kept)


def run_seed(seed: Any, attempt: int, run: int) -> str:
    return f"{seed}/{attempt}/{run}"


def screen(program: SourceProgram, spec: StochasticWorldSpec, seed: Any, attempt: int,
           runs: int, budget: int = DEFAULT_BUDGET) -> str | None:
    """First failure across ``runs`` stochastic executions, or None if all are clean."""
    for r in range(runs):
        res = simulate_stochastic(program, spec, run_seed(seed, attempt, r), budget)
        if not res.ok:
            return f"run {r}: {res.outcome}"
    return None


def rejection_sample(
    gen: GeneratorPort,
    prompt: PromptRef,
    spec: StochasticWorldSpec,
    max_retries: int,
    runs: int = DEFAULT_RUNS,
    seed: Any = 0,
    budget: int = DEFAULT_BUDGET,
) -> ResampleOutcome:
    """Ask ``gen`` for candidates until one runs cleanly in every stochastic run.

    Task checks are not consulted; only Python and robot execution errors
    reject a candidate.  A generator failure counts as a failed attempt.
    """
    if max_retries < 1:
        raise ValueError("max_retries must be >= 1")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    attempts = []
    for attempt in range(1, max_retries + 1):
        try:
            prog = gen.next_candidate(prompt, attempt)
        except GenerationError as e:
            attempts.append(AttemptSummary(attempt, None, f"GenerationError: {e}"))
            continue
        failure = screen(prog, spec, seed, attempt, runs, budget)
        attempts.append(AttemptSummary(attempt, prog, failure))
        if failure is None:
            return ResampleOutcome(prog, attempt, tuple(attempts))
    return ResampleOutcome(None, max_retries, tuple(attempts))


# ---------------------------------------------------------------------------
# sweep over retry limits


@dataclass(frozen=True)
class SweepRow:
    limit: int
    task: str
    prompt: int
    attempts_used: int
    accepted: int
    passed: int
    n: int

    @property
    def prompt_id(self) -> str:
        return f"{self.task}/p{self.prompt}"

    @property
    def post_filter_pass(self) -> Fraction:
        return Fraction(self.passed, self.n)


@dataclass
class SweepReport:
    limits: tuple[int, ...]
    rows: list[SweepRow]
    metadata: dict[str, Any]

    def executable_fraction(self, limit: int) -> Fraction:
        rows = [r for r in self.rows if r.limit == limit]
        total = sum(r.n for r in rows)
        return Fraction(sum(r.accepted for r in rows), total) if total else Fraction(0)

    def scores(self, limit: int) -> list[PromptScore]:
        return [PromptScore(r.task, r.prompt, r.n, r.passed) for r in self.rows if r.limit == limit]

    def files(self) -> dict[str, str]:
        csv_text = _csv(
            ["limit", "prompt_id", "attempts_used", "accepted", "post_filter_pass"],
            [(r.limit, r.prompt_id, r.attempts_used, r.accepted, fmt(r.post_filter_pass)) for r in self.rows],
        )
        per_limit = {}
        for lim in self.limits:
            vals = [s.pass_at_1 for s in self.scores(lim)]
            ns = {s.n for s in self.scores(lim)}
            per_limit[str(lim)] = {
                "executable_fraction": fmt(self.executable_fraction(lim)),
                "mean_post_filter_pass": fmt(sum(vals, Fraction(0)) / len(vals)) if vals else fmt(0),
                "post_filter_cdf": [{"threshold": fmt(t), "fraction": fmt(f)} for t, f in cdf_points(vals, ns)],
            }
        doc = {"metadata": self.metadata, "limits": per_limit}
        return {"sweep.csv": csv_text, "sweep.json": json.dumps(doc, indent=2, sort_keys=True) + "\n"}

    def write(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = []
        for name, text in self.files().items():
            (directory / name).write_text(text, encoding="utf-8")
            out.append(directory / name)
        return out


def task_spec(task: TaskDefinition) -> StochasticWorldSpec:
    """The permanent map a deployed robot would know: the first case's rooms and start."""
    return StochasticWorldSpec.from_world(task.cases[0].world)


def resample_sweep(
    gen: GeneratorPort,
    tasks: Sequence[TaskDefinition],
    limits: Sequence[int] = DEFAULT_LIMITS,
    runs: int = DEFAULT_RUNS,
    seed: Any = 0,
    samples: int = 1,
    jobs: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> SweepReport:
    """Rejection-sample every (prompt, sample) once at the largest limit, then read
    off each smaller limit with ``ResampleOutcome.at_limit``.

    A non-accepted unit is scored with its last generated candidate, so limit 1
    reproduces the unfiltered baseline.
    """
    limits = tuple(sorted(set(limits)))
    if not limits or limits[0] < 1:
        raise ValueError("limits must be positive")
    if runs < 1 or samples < 1 or jobs < 1:
        raise ValueError("runs, samples and jobs must be >= 1")
    top = limits[-1]
    units = [
        (t, PromptRef(t.name, i, text, s, samples, seed))
        for t in tasks
        for i, text in enumerate(t.prompts)
        for s in range(samples)
    ]

    def work(unit: tuple[TaskDefinition, PromptRef]) -> ResampleOutcome:
        task, ref = unit
        return rejection_sample(gen, ref, task_spec(task), top, runs, seed, budget)

    if jobs == 1:
        outcomes = [work(u) for u in units]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, units))

    cache: dict[tuple[str, str], SampleResult] = {}

    def passes(task: TaskDefinition, prog: SourceProgram | None) -> bool:
        if prog is None:
            return False
        key = (task.name, prog.text)
        if key not in cache:
            cache[key] = evaluate_sample(prog, task, budget=budget)
        return cache[key].passed

    agg: dict[tuple[int, str, int], list[int]] = {}
    order: list[tuple[int, str, int]] = []
    for (task, ref), out in zip(units, outcomes):
        for lim in limits:
            o = out.at_limit(lim)
            key = (lim, task.name, ref.index)
            if key not in agg:
                agg[key] = [0, 0, 0, 0]
                order.append(key)
            a = agg[key]
            a[0] += o.attempts_used
            a[1] += o.accepted is not None
            a[2] += passes(task, o.last_candidate)
            a[3] += 1
    rows = [SweepRow(lim, t, p, *agg[(lim, t, p)]) for (lim, t, p) in sorted(order)]
    meta = {
        "engine_version": ENGINE_VERSION,
        "generator": getattr(gen, "backend_id", type(gen).__name__),
        "seed": str(seed),
        "runs": runs,
        "samples": samples,
        "limits": list(limits),
        "tasks": [t.name for t in tasks],
    }
    return SweepReport(limits, rows, meta)


def reverify(outcome: ResampleOutcome, spec: StochasticWorldSpec, seed: Any, runs: int,
             budget: int = DEFAULT_BUDGET) -> bool:
    """Re-run an accepted program on its acceptance seeds; True if still clean."""
    if outcome.accepted is None:
        return False
    return screen(outcome.accepted, spec, seed, outcome.attempts_used, runs, budget) is None


__all__ = [
    "AttemptSummary", "ResampleOutcome", "SweepReport", "SweepRow", "rejection_sample",
    "resample_sweep", "reverify", "screen", "task_spec", "run_seed",
]
