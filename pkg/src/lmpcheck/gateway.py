"""Program generation backends and prompt assembly.

Every backend implements ``next_candidate(prompt, attempt)``.  The HTTP client
speaks a completions-style protocol (prompt in, list of text choices out) with
an adapter for chat-shaped endpoints.  The corpus, synthetic and scripted
backends are offline and deterministic.
"""

from __future__ import annotations

import hashlib
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

import httpx
import yaml

from .lang import DEFAULT_STOP_SEQUENCES, ExtractionEmpty, SourceProgram, extract_program

API_KEY_ENV = "GATEWAY_API_KEY"
BACKENDS = ("http", "corpus", "synthetic", "scripted")
GENERATION_CUE = "def task():\n"


class GenerationError(Exception):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempt{'s' if attempts != 1 else ''})")
        self.attempts = attempts


class GenerationUnavailable(GenerationError):
    """The endpoint could not be reached or kept failing after all retries."""


class ProtocolError(GenerationError):
    """The endpoint answered with something we cannot use."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PromptRef:
    """One generation request: which prompt, and which of its samples."""

    task: str
    index: int
    text: str
    sample: int = 0
    n_samples: int = 1
    seed: Any = 0

    @property
    def prompt_id(self) -> str:
        return f"{self.task}/p{self.index}"


class GeneratorPort(Protocol):
    backend_id: str

    def next_candidate(self, prompt: PromptRef, attempt: int) -> SourceProgram: ...


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GenerationConfig:
    backend: str = "synthetic"
    endpoint: str = ""
    model: str = ""
    api_style: str = "completions"  # or "chat"
    temperature: float = 0.2
    top_p: float = 0.95
    max_tokens: int = 512
    stop_sequences: tuple[str, ...] = DEFAULT_STOP_SEQUENCES
    samples_per_prompt: int = 50
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5
    max_in_flight: int = 4
    corpus_path: str = ""
    script: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend: expected one of {', '.join(BACKENDS)}, got {self.backend!r}")
        if self.api_style not in ("completions", "chat"):
            raise ConfigError(f"api_style: expected completions or chat, got {self.api_style!r}")
        if not self.temperature >= 0:
            raise ConfigError("temperature: must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ConfigError("top_p: must be in (0, 1]")
        if self.samples_per_prompt < 1:
            raise ConfigError("samples_per_prompt: must be >= 1")
        if self.max_tokens < 1 or self.retries < 0 or self.backoff < 0 or self.max_in_flight < 1:
            raise ConfigError("max_tokens, retries, backoff and max_in_flight must be positive")
        if self.backend == "http" and not self.endpoint:
            raise ConfigError("endpoint: required for the http backend")
        if self.backend == "corpus" and not self.corpus_path:
            raise ConfigError("corpus_path: required for the corpus backend")
        if self.backend == "scripted" and not self.script:
            raise ConfigError("script: required for the scripted backend")


# whole-word suffix match so "max_tokens" is not mistaken for a credential
_SECRET_KEY = re.compile(r"(?i)(^|[_-])(api[_-]?key|token|secret|password|authorization)$")


def _find_secret(doc: Any) -> str | None:
    if isinstance(doc, Mapping):
        for k, v in doc.items():
            if _SECRET_KEY.search(str(k)):
                return str(k)
            found = _find_secret(v)
            if found:
                return found
    elif isinstance(doc, list):
        for v in doc:
            found = _find_secret(v)
            if found:
                return found
    return None


def config_from_dict(doc: Mapping[str, Any], base: Path = Path(".")) -> GenerationConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("generator config must be a mapping")
    secret = _find_secret(doc)
    if secret:
        raise ConfigError(f"{secret}: secrets belong in the {API_KEY_ENV} environment variable, not in config files")
    known = set(GenerationConfig.__dataclass_fields__)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown config key")
    kw = dict(doc)
    if "stop_sequences" in kw:
        kw["stop_sequences"] = tuple(kw["stop_sequences"])
    # relative paths are resolved against the config file's directory
    if kw.get("corpus_path"):
        kw["corpus_path"] = str(base / kw["corpus_path"])
    if "script" in kw:
        kw["script"] = tuple(str(base / p) for p in kw["script"])
    try:
        return GenerationConfig(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str | Path) -> GenerationConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config {path}: {e}") from None
    return config_from_dict(doc or {}, path.parent)


# ---------------------------------------------------------------------------
# prompt prefix


@dataclass(frozen=True)
class SkillDoc:
    signature: str
    doc: str


DEFAULT_SKILLS = (
    SkillDoc("go_to(location: str) -> None", "Go to a room. The location must be one of the rooms in the building."),
    SkillDoc("get_current_location() -> str", "Return the name of the room the robot is in."),
    SkillDoc("get_all_rooms() -> list[str]", "Return the names of every room in the building."),
    SkillDoc("is_in_room(object: str) -> bool", "Return True if the object is in the robot's current room."),
    SkillDoc("say(message: str) -> None", "Say the message out loud."),
    SkillDoc(
        "ask(person: str, question: str, options: list[str]) -> str",
        "Ask the person in the current room a multiple-choice question and return the option they chose.",
    ),
    SkillDoc("pick(object: str) -> None", "Pick up the object in the current room. The robot holds one object at a time."),
    SkillDoc("place(object: str) -> None", "Put down the object the robot is holding in the current room."),
)

DEFAULT_EXAMPLES = (
    (
        "Go to every office and say good morning to anyone who is there.",
        'def task():\n'
        '    start = get_current_location()\n'
        '    for room in get_all_rooms():\n'
        '        if "office" in room:\n'
        '            go_to(room)\n'
        '            if is_in_room("person"):\n'
        '                say("Good morning!")\n'
        '    go_to(start)\n',
    ),
    (
        "Ask Tom in the lab whether he wants coffee or tea, then come back and tell me.",
        'def task():\n'
        '    start = get_current_location()\n'
        '    go_to("lab")\n'
        '    drink = ask("Tom", "Would you like coffee or tea?", ["coffee", "tea"])\n'
        '    go_to(start)\n'
        '    say("Tom would like " + drink)\n',
    ),
)


@dataclass(frozen=True)
class PromptPrefix:
    version: str
    skills: tuple[SkillDoc, ...]
    examples: tuple[tuple[str, str], ...]  # (task text, program)

    def __post_init__(self) -> None:
        if len(self.skills) != 8:
            raise ValueError(f"a prompt prefix documents all 8 skills, got {len(self.skills)}")
        if not self.examples:
            raise ValueError("a prompt prefix needs at least one example program")

    def text(self) -> str:
        parts = [f"# Robot skills (prompt prefix {self.version})", ""]
        for s in self.skills:
            parts.append(f"def {s.signature}:")
            parts.append(f'    """{s.doc}"""')
            parts.append("")
        for task_text, program in self.examples:
            parts.append(f"# Task: {task_text}")
            parts.append(program.rstrip("\n"))
            parts.append("")
        return "\n".join(parts) + "\n"

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()


DEFAULT_PREFIX = PromptPrefix("v1", DEFAULT_SKILLS, DEFAULT_EXAMPLES)


def build_prompt(task_text: str, prefix: PromptPrefix = DEFAULT_PREFIX) -> str:
    task_line = " ".join(task_text.split())
    return f"{prefix.text()}# Task: {task_line}\n{GENERATION_CUE}"


# ---------------------------------------------------------------------------
# HTTP client


def _extract(text: str, cfg: GenerationConfig, origin: str, prepend_cue: bool) -> SourceProgram:
    if prepend_cue:
        text = GENERATION_CUE + text
    try:
        return extract_program(text, cfg.stop_sequences, origin)
    except ExtractionEmpty:
        # an empty program fails downstream as a syntax error
        return SourceProgram(text="", origin=origin)


class HttpClient:
    """Completions-style client; reentrant, with a bound on requests in flight."""

    def __init__(self, cfg: GenerationConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.cfg = cfg
        self._sem = threading.BoundedSemaphore(cfg.max_in_flight)
        self._sleep = sleep
        headers = {}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(transport=transport, timeout=cfg.timeout, headers=headers)

    def _payload(self, prompt: str, n: int) -> dict[str, Any]:
        cfg = self.cfg
        body: dict[str, Any] = {
            "temperature": cfg.temperature,
            "top_p": cfg.top_p,
            "max_tokens": cfg.max_tokens,
            "stop": list(cfg.stop_sequences),
            "n": n,
        }
        if cfg.model:
            body["model"] = cfg.model
        if cfg.api_style == "chat":
            body["messages"] = [{"role": "user", "content": prompt}]
        else:
            body["prompt"] = prompt
        return body

    def _choices(self, data: Any, attempts: int) -> list[str]:
        try:
            choices = data["choices"]
            if self.cfg.api_style == "chat":
                texts = [c["message"]["content"] for c in choices]
            else:
                texts = [c["text"] for c in choices]
        except (KeyError, TypeError, IndexError):
            raise ProtocolError("response has no usable choices", attempts) from None
        if not all(isinstance(t, str) for t in texts):
            raise ProtocolError("choice text is not a string", attempts)
        return texts

    def complete(self, prompt: str, n: int) -> list[str]:
        """Raw completion texts, retrying transport failures and 5xx/429 answers."""
        cfg = self.cfg
        attempts = 0
        last = ""
        while attempts <= cfg.retries:
            attempts += 1
            try:
                with self._sem:
                    resp = self._client.post(cfg.endpoint, json=self._payload(prompt, n))
            except httpx.TransportError as e:
                last = f"{type(e).__name__}: {e}"
            else:
                if resp.status_code < 400:
                    try:
                        data = resp.json()
                    except ValueError:
                        raise ProtocolError("response body is not JSON", attempts) from None
                    texts = self._choices(data, attempts)
                    if len(texts) != n:
                        raise ProtocolError(f"expected {n} choices, got {len(texts)}", attempts)
                    return texts
                if resp.status_code != 429 and resp.status_code < 500:
                    raise ProtocolError(f"HTTP {resp.status_code}", attempts)
                last = f"HTTP {resp.status_code}"
            if attempts <= cfg.retries:
                self._sleep(cfg.backoff * 2 ** (attempts - 1))
        raise GenerationUnavailable(f"generation failed: {last}", attempts)

    def close(self) -> None:
        self._client.close()


def generate(prompt: str, cfg: GenerationConfig, n: int, prompt_id: str = "",
             transport: httpx.BaseTransport | None = None,
             client: HttpClient | None = None) -> list[SourceProgram]:
    """Request ``n`` completions for ``prompt`` and extract a program from each."""
    own = client is None
    client = client or HttpClient(cfg, transport)
    try:
        texts = client.complete(prompt, n)
    finally:
        if own:
            client.close()
    cue = cfg.api_style == "completions"
    return [_extract(t, cfg, f"{prompt_id}#{i}@http", cue) for i, t in enumerate(texts)]


class HttpGenerator:
    """Requests all samples of a prompt in one call per attempt and hands them out."""

    backend_id = "http"

    def __init__(self, cfg: GenerationConfig, prefix: PromptPrefix = DEFAULT_PREFIX,
                 transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        self.prefix = prefix
        self.client = HttpClient(cfg, transport)
        self._cache: dict[tuple[str, int], list[SourceProgram]] = {}
        self._lock = threading.Lock()
        self._locks: dict[tuple[str, int], threading.Lock] = {}

    def next_candidate(self, prompt: PromptRef, attempt: int) -> SourceProgram:
        key = (prompt.prompt_id, attempt)
        with self._lock:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._cache:
                text = build_prompt(prompt.text, self.prefix)
                self._cache[key] = generate(text, self.cfg, prompt.n_samples, prompt.prompt_id,
                                            client=self.client)
        prog = self._cache[key][prompt.sample]
        return SourceProgram(prog.text, f"{prompt.prompt_id}#{prompt.sample}@http")


# ---------------------------------------------------------------------------
# offline backends


def _numeric_key(p: Path) -> tuple[int, str]:
    return (int(p.stem), p.name) if p.stem.isdigit() else (1 << 62, p.name)


class CorpusGenerator:
    """Reads raw completions from ``<root>/<task>/p<i>/<j>.lmp``.

    Candidate number ``sample + (attempt - 1) * n_samples`` is used, wrapping
    around when a prompt has fewer files.
    """

    backend_id = "corpus"

    def __init__(self, root: str | Path, stop_sequences: Sequence[str] = DEFAULT_STOP_SEQUENCES):
        self.root = Path(root)
        self.stop_sequences = tuple(stop_sequences)
        if not self.root.is_dir():
            raise GenerationUnavailable(f"completion corpus not found: {self.root}", 1)
        self._files: dict[str, list[Path]] = {}
        self._lock = threading.Lock()

    def files(self, prompt_id: str) -> list[Path]:
        with self._lock:
            if prompt_id not in self._files:
                d = self.root / prompt_id
                self._files[prompt_id] = sorted(d.glob("*.lmp"), key=_numeric_key) if d.is_dir() else []
            return self._files[prompt_id]

    def programs(self, prompt_id: str) -> list[SourceProgram]:
        return [self._load(prompt_id, p) for p in self.files(prompt_id)]

    def _load(self, prompt_id: str, path: Path) -> SourceProgram:
        origin = f"{prompt_id}#{path.stem}@corpus"
        text = path.read_text(encoding="utf-8")
        try:
            return extract_program(text, self.stop_sequences, origin)
        except ExtractionEmpty:
            return SourceProgram("", origin)

    def next_candidate(self, prompt: PromptRef, attempt: int) -> SourceProgram:
        files = self.files(prompt.prompt_id)
        if not files:
            raise GenerationUnavailable(f"no completions for {prompt.prompt_id} in {self.root}", attempt)
        idx = (prompt.sample + (attempt - 1) * prompt.n_samples) % len(files)
        return self._load(prompt.prompt_id, files[idx])


class SyntheticGenerator:
    """Draws from each task's reference solutions and mutants with a seeded stream."""

    backend_id = "synthetic"

    def __init__(self, tasks: Sequence[Any]):
        self.pools: dict[str, list[SourceProgram]] = {}
        for t in tasks:
            pool = list(t.solutions) + [m.program for m in t.mutants]
            if pool:
                self.pools[t.name] = pool

    def next_candidate(self, prompt: PromptRef, attempt: int) -> SourceProgram:
        pool = self.pools.get(prompt.task)
        if not pool:
            raise GenerationUnavailable(f"task {prompt.task!r} has no programs to draw from", attempt)
        rng = random.Random(f"{prompt.seed}/{prompt.prompt_id}/{prompt.sample}/{attempt}")
        prog = pool[rng.randrange(len(pool))]
        return SourceProgram(prog.text, f"{prompt.prompt_id}#{prompt.sample}@synthetic:{prog.origin}")


ScriptItem = SourceProgram | str | Exception | Callable[[], SourceProgram]


class ScriptedGenerator:
    """Test double: attempt ``a`` gets item ``min(a, len) - 1`` of the script.

    An item may be a program, program text, an exception to raise, or a
    callable.  ``scripts`` may instead map prompt ids to their own lists.
    """

    backend_id = "scripted"

    def __init__(self, script: Sequence[ScriptItem] | Mapping[str, Sequence[ScriptItem]]):
        if isinstance(script, Mapping):
            self.scripts = {k: list(v) for k, v in script.items()}
            self.default: list[ScriptItem] = []
        else:
            self.scripts = {}
            self.default = list(script)
        self.calls: list[tuple[str, int, int]] = []
        self._lock = threading.Lock()

    def next_candidate(self, prompt: PromptRef, attempt: int) -> SourceProgram:
        with self._lock:
            self.calls.append((prompt.prompt_id, prompt.sample, attempt))
        items = self.scripts.get(prompt.prompt_id) or self.scripts.get(prompt.task) or self.default
        if not items:
            raise GenerationUnavailable(f"script has nothing for {prompt.prompt_id}", attempt)
        item = items[min(attempt, len(items)) - 1]
        if isinstance(item, Exception):
            raise item
        if callable(item):
            item = item()
        if isinstance(item, str):
            item = SourceProgram(item)
        return SourceProgram(item.text, f"{prompt.prompt_id}#{prompt.sample}@scripted:{attempt}")


def make_generator(cfg: GenerationConfig, tasks: Sequence[Any] = (),
                   prefix: PromptPrefix = DEFAULT_PREFIX) -> GeneratorPort:
    if cfg.backend == "http":
        return HttpGenerator(cfg, prefix)
    if cfg.backend == "corpus":
        return CorpusGenerator(cfg.corpus_path, cfg.stop_sequences)
    if cfg.backend == "synthetic":
        return SyntheticGenerator(tasks)
    items = []
    for p in cfg.script:
        try:
            items.append(SourceProgram(Path(p).read_text(encoding="utf-8"), origin=p))
        except OSError as e:
            raise ConfigError(f"script: cannot read {p}: {e.strerror}") from None
    return ScriptedGenerator(items)
