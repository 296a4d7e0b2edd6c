"""Evaluate robot programs: simulate them against symbolic worlds, check the
traces with temporal logic, classify failures and score pass@k."""

from .corpus import TaskDefinition, WorldCase, load_corpus, load_task, open_world_subset
from .evaluator import (
    FailureRecord,
    PromptScore,
    Report,
    aggregate,
    evaluate_sample,
    lint_corpus,
    pass_at_k,
    run_eval,
    write_report,
)
from .gateway import (
    CorpusGenerator,
    GenerationConfig,
    PromptRef,
    ScriptedGenerator,
    SyntheticGenerator,
    build_prompt,
    generate,
)
from .lang import InterpreterError, SourceProgram, extract_program, parse
from .resampler import rejection_sample, resample_sweep
from .rtl import check, eval_ltl, lower_rtl, parse_formula, parse_rtl
from .simulator import simulate, simulate_stochastic
from .world import StochasticWorldSpec, WorldState, load_world

__version__ = "0.1.0"
