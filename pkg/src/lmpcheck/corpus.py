"""Benchmark task definitions: prompts, world cases with checks, reference and mutant programs."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import rtl
from .lang import ERROR_KINDS, SourceProgram
from .simulator import ROBOT_ERROR_KINDS
from .world import WorldLoadError, WorldState, load_world_file, world_from_dict

CORPUS_SCHEMA_VERSION = 1
PROMPTS_PER_TASK = 5
TAGS = frozenset({"open_world_knowledge", "arithmetic", "control_flow", "exhaustive_search", "come_back"})
BUILTIN_CORPUS = Path(__file__).with_name("corpus")


class TaskLoadError(ValueError):
    pass


class NoOpenWorldClauses(ValueError):
    pass


@dataclass(frozen=True)
class WorldCase:
    world: WorldState
    check: rtl.RtlCheck
    open_world_labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class Mutant:
    program: SourceProgram
    expected: tuple[str, ...]


@dataclass(frozen=True)
class TaskDefinition:
    name: str
    prompts: tuple[str, ...]
    cases: tuple[WorldCase, ...]
    tags: frozenset[str] = frozenset()
    solutions: tuple[SourceProgram, ...] = ()
    mutants: tuple[Mutant, ...] = ()
    source: Path | None = field(default=None, compare=False)

    def prompt_id(self, index: int) -> str:
        return f"{self.name}/p{index}"


_DESCRIPTOR = re.compile(r"(PythonError|RobotError|TaskCompletion):([A-Za-z+]+)")


def parse_descriptor(text: str) -> str:
    """Validate a failure descriptor such as ``RobotError:GoToInvalidLocation``."""
    m = _DESCRIPTOR.fullmatch(text.strip())
    if not m:
        raise ValueError(f"malformed failure descriptor {text!r}")
    cat, kinds = m.groups()
    valid = {"PythonError": ERROR_KINDS, "RobotError": ROBOT_ERROR_KINDS,
             "TaskCompletion": rtl.COMPLETION_CATEGORIES}[cat]
    parts = kinds.split("+")
    if cat != "TaskCompletion" and len(parts) != 1:
        raise ValueError(f"{cat} descriptors name exactly one kind: {text!r}")
    for k in parts:
        if k not in valid:
            raise ValueError(f"unknown {cat} kind {k!r}")
    return f"{cat}:{kinds}"


def _read_program(base: Path, ref: str, where: str) -> SourceProgram:
    path = base / ref
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise TaskLoadError(f"{where}: cannot read program {ref!r}: {e.strerror}") from None
    return SourceProgram(text=text, origin=str(ref))


_LITERAL = re.compile(r"[A-Za-z0-9 '_-]+")


def _literal_room_refs(f: rtl.Formula) -> list[str]:
    """Room names that a check spells out literally (go_to targets and loc patterns)."""
    out: list[str] = []
    if isinstance(f, rtl.Atom):
        pats = [f.location] if f.location else []
        if f.skill == "GoTo" and f.args and f.args[0]:
            pats.append(f.args[0])
        out.extend(p for p in pats if _LITERAL.fullmatch(p))
        return out
    for child in vars(f).values():
        if isinstance(child, tuple):
            for c in child:
                out.extend(_literal_room_refs(c))
        elif not isinstance(child, (str, bool)) and child is not None:
            out.extend(_literal_room_refs(child))
    return out


def task_from_dict(doc: Mapping[str, Any], base: Path = Path(".")) -> TaskDefinition:
    if not isinstance(doc, Mapping):
        raise TaskLoadError("task document must be a mapping")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise TaskLoadError("name: missing or not a string")
    where = f"task {name!r}"
    if doc.get("schema", CORPUS_SCHEMA_VERSION) != CORPUS_SCHEMA_VERSION:
        raise TaskLoadError(f"{where}: unsupported schema {doc.get('schema')!r}")

    prompts = doc.get("prompts")
    if not isinstance(prompts, list) or not all(isinstance(p, str) and p.strip() for p in prompts):
        raise TaskLoadError(f"{where}: prompts must be a list of non-empty strings")
    if len(prompts) != PROMPTS_PER_TASK:
        raise TaskLoadError(f"{where}: expected {PROMPTS_PER_TASK} prompts, got {len(prompts)}")
    if len({p.strip() for p in prompts}) != len(prompts):
        raise TaskLoadError(f"{where}: duplicate prompt texts")

    tags = doc.get("tags") or []
    unknown = sorted(set(tags) - TAGS)
    if unknown:
        raise TaskLoadError(f"{where}: unknown tag {unknown[0]!r}")

    raw_cases = doc.get("cases")
    if not isinstance(raw_cases, list) or not raw_cases:
        raise TaskLoadError(f"{where}: cases must be a non-empty list")
    cases = []
    for k, c in enumerate(raw_cases):
        cw = f"{where} case {k}"
        if not isinstance(c, Mapping):
            raise TaskLoadError(f"{cw}: expected a mapping")
        try:
            w = c.get("world")
            world = load_world_file(base / w) if isinstance(w, str) else world_from_dict(w)
        except (WorldLoadError, OSError) as e:
            raise TaskLoadError(f"{cw}: world: {e}") from None
        try:
            check = rtl.parse_rtl(str(c.get("check", "")))
        except (rtl.RtlSyntaxError, ValueError) as e:
            raise TaskLoadError(f"{cw}: check: {e}") from None
        for clause in check.clauses:
            for d in clause.disjuncts:
                for room in _literal_room_refs(d):
                    if room not in world.rooms:
                        raise TaskLoadError(f"{cw}: check refers to unknown room {room!r}")
        ow = tuple(c.get("open_world_labels") or ())
        labels = {cl.label for cl in check.clauses}
        for lab in ow:
            if lab not in labels:
                raise TaskLoadError(f"{cw}: open_world_labels names {lab!r} which labels no clause")
        cases.append(WorldCase(world, check, ow))

    solutions = tuple(_read_program(base, ref, where) for ref in doc.get("solutions") or [])
    mutants = []
    for m in doc.get("mutants") or []:
        expected = m.get("expected")
        expected = [expected] if isinstance(expected, str) else list(expected or [])
        try:
            exp = tuple(parse_descriptor(e) for e in expected)
        except ValueError as e:
            raise TaskLoadError(f"{where}: mutant {m.get('program')!r}: {e}") from None
        if not exp:
            raise TaskLoadError(f"{where}: mutant {m.get('program')!r} has no expected failure")
        mutants.append(Mutant(_read_program(base, m["program"], where), exp))

    return TaskDefinition(
        name=name,
        prompts=tuple(prompts),
        cases=tuple(cases),
        tags=frozenset(tags),
        solutions=solutions,
        mutants=tuple(mutants),
    )


def load_task(document: str | Path | Mapping[str, Any], base: Path | None = None) -> TaskDefinition:
    """Load a task from a YAML file path, YAML text, or decoded mapping."""
    if isinstance(document, Path):
        base = base or document.parent
        try:
            text = document.read_text(encoding="utf-8")
        except OSError as e:
            raise TaskLoadError(f"cannot read {document}: {e.strerror}") from None
        task = task_from_dict(yaml.safe_load(text), base)
        return replace(task, source=document)
    if isinstance(document, str):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as e:
            raise TaskLoadError(f"malformed task document: {e}") from None
    return task_from_dict(document, base or Path("."))


def load_corpus(directory: str | Path = BUILTIN_CORPUS) -> list[TaskDefinition]:
    """Every ``*.yaml`` task in ``directory`` (not recursive), sorted by task name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise TaskLoadError(f"corpus directory not found: {directory}")
    tasks = [load_task(p) for p in sorted(directory.glob("*.yaml"))]
    if not tasks:
        raise TaskLoadError(f"no task files in {directory}")
    names = [t.name for t in tasks]
    if len(set(names)) != len(names):
        raise TaskLoadError("duplicate task names in corpus")
    return sorted(tasks, key=lambda t: t.name)


def open_world_subset(task: TaskDefinition) -> TaskDefinition:
    """Reduce every check to its open-world-knowledge clauses.

    Cases without open-world clauses are dropped.
    """
    if "open_world_knowledge" not in task.tags:
        raise NoOpenWorldClauses(f"task {task.name!r} is not tagged open_world_knowledge")
    cases = tuple(
        replace(c, check=rtl.subset(c.check, c.open_world_labels))
        for c in task.cases
        if c.open_world_labels
    )
    if not cases:
        raise NoOpenWorldClauses(f"task {task.name!r} flags no open-world clauses")
    return replace(task, cases=cases)
