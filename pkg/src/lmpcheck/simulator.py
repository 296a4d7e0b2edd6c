"""Symbolic execution of robot programs against a world state."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any, Union

from . import lang
from .lang import InterpreterError, SourceProgram
from .world import RobotState, StochasticWorldSpec, WorldState, respond

SKILLS = ("GoTo", "GetCurrentLocation", "GetAllRooms", "IsInRoom", "Say", "Ask", "Pick", "Place")

ROBOT_ERROR_KINDS = (
    "GoToInvalidLocation",
    "PlaceNoObject",
    "PickWhileHolding",
    "AskNoPerson",
    "PickInvalidObject",
    "AskInvalidOptions",
)
# alternative spelling of AskInvalidOptions
ROBOT_ERROR_ALIASES = {"AskEmptyOptions": "AskInvalidOptions"}

TRACE_FORMAT_VERSION = 1


class RobotExecutionError(Exception):
    """The program asked the robot to do something infeasible."""

    def __init__(self, kind: str, detail: Any, index: int):
        kind = ROBOT_ERROR_ALIASES.get(kind, kind)
        assert kind in ROBOT_ERROR_KINDS, kind
        super().__init__(f"{kind}: {detail!r}")
        self.kind = kind
        self.detail = detail
        self.index = index


@dataclass(frozen=True)
class TraceElement:
    index: int
    skill: str
    args: tuple[Any, ...]
    result: Any
    location: str


@dataclass
class Trace:
    world: WorldState | StochasticWorldSpec
    elements: list[TraceElement] = field(default_factory=list)
    terminal_robot: RobotState | None = None

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def rooms(self) -> tuple[str, ...]:
        return self.world.rooms


@dataclass(frozen=True)
class Success:
    def __str__(self) -> str:
        return "Success"


@dataclass(frozen=True)
class PythonError:
    error: InterpreterError

    @property
    def kind(self) -> str:
        return self.error.kind

    def __str__(self) -> str:
        return f"PythonError({self.kind})"


@dataclass(frozen=True)
class RobotError:
    error: RobotExecutionError

    @property
    def kind(self) -> str:
        return self.error.kind

    def __str__(self) -> str:
        return f"RobotError({self.kind})"


Outcome = Union[Success, PythonError, RobotError]


@dataclass
class SimulationResult:
    trace: Trace
    outcome: Outcome

    @property
    def ok(self) -> bool:
        return isinstance(self.outcome, Success)


def _require_text(value: Any, what: str) -> str:
    if not isinstance(value, str):
        raise InterpreterError("Type", f"{what} must be str, not {type(value).__name__}")
    return value


class SkillHost:
    """Deterministic implementation of the eight skills over a mutable world copy.

    When ``rng_seed`` is given the host runs in stochastic mode: perception and
    human answers are drawn from a pseudorandom stream keyed by (seed, call
    index), anyone may be asked anywhere, and object presence is not enforced
    on pick because movable objects are unknown.
    """

    def __init__(self, world: WorldState | StochasticWorldSpec, rng_seed: Any = None):
        self.world = world
        self.robot = RobotState(location=world.robot_start)
        self.trace = Trace(world=world, terminal_robot=self.robot)
        self.stochastic = rng_seed is not None
        self.seed = rng_seed
        self.calls = 0
        if isinstance(world, WorldState):
            self.located = {o: set(rs) for o, rs in world.object_locations.items()}
            self.pickable = set(world.pickable)
        else:
            self.located = {}
            self.pickable = set()

    def _draw(self) -> random.Random:
        rng = random.Random(f"{self.seed!r}:{self.calls}")
        return rng

    def _record(self, skill: str, args: tuple[Any, ...], result: Any, location: str) -> Any:
        self.trace.elements.append(
            TraceElement(len(self.trace.elements), skill, args, result, location)
        )
        return result

    def _fail(self, kind: str, detail: Any) -> RobotExecutionError:
        return RobotExecutionError(kind, detail, len(self.trace.elements))

    def _tick(self) -> None:
        self.calls += 1

    def go_to(self, location: Any) -> None:
        self._tick()
        location = _require_text(location, "go_to location")
        if location not in self.world.rooms:
            raise self._fail("GoToInvalidLocation", location)
        self.robot.location = location
        self._record("GoTo", (location,), None, location)

    def get_current_location(self) -> str:
        self._tick()
        loc = self.robot.location
        return self._record("GetCurrentLocation", (), loc, loc)

    def get_all_rooms(self) -> list[str]:
        self._tick()
        rooms = list(self.world.rooms)
        return self._record("GetAllRooms", (), rooms, self.robot.location)[:]

    def is_in_room(self, obj: Any) -> bool:
        self._tick()
        obj = _require_text(obj, "is_in_room object")
        if self.stochastic:
            found = self._draw().random() < 0.5
        else:
            found = self.robot.location in self.located.get(obj, ())
        return self._record("IsInRoom", (obj,), found, self.robot.location)

    def say(self, message: Any) -> None:
        self._tick()
        message = _require_text(message, "say message")
        self._record("Say", (message,), None, self.robot.location)

    def ask(self, person: Any, question: Any, options: Any) -> str:
        self._tick()
        person = _require_text(person, "ask person")
        question = _require_text(question, "ask question")
        if not isinstance(options, (list, tuple)) or not all(isinstance(o, str) for o in options):
            raise InterpreterError("Type", "ask options must be a list of str")
        options = list(options)
        here = self.robot.location
        if self.stochastic:
            if not options:
                raise self._fail("AskInvalidOptions", options)
            answer = options[self._draw().randrange(len(options))]
        else:
            present = self.world.persons_at(here)
            if not present:
                raise self._fail("AskNoPerson", person)
            if not options:
                raise self._fail("AskInvalidOptions", options)
            who = person if person in present else present[0]
            answer = respond(self.world.persons[who], question, options)
        return self._record("Ask", (person, question, options), answer, here)

    def pick(self, obj: Any) -> None:
        self._tick()
        obj = _require_text(obj, "pick object")
        here = self.robot.location
        if self.robot.held is not None:
            raise self._fail("PickWhileHolding", obj)
        if not self.stochastic:
            if (obj, here) not in self.pickable:
                raise self._fail("PickInvalidObject", obj)
            self.pickable.discard((obj, here))
            self.located[obj].discard(here)
        self.robot.held = obj
        self._record("Pick", (obj,), None, here)

    def place(self, obj: Any) -> None:
        self._tick()
        obj = _require_text(obj, "place object")
        here = self.robot.location
        if self.robot.held is None:
            raise self._fail("PlaceNoObject", obj)
        if obj != self.robot.held:
            raise InterpreterError("Value", f"robot is holding {self.robot.held!r}, not {obj!r}")
        self.robot.held = None
        if not self.stochastic:
            self.located.setdefault(obj, set()).add(here)
            self.pickable.add((obj, here))
        self._record("Place", (obj,), None, here)


def _run(program: SourceProgram | str, host: SkillHost, budget: int) -> SimulationResult:
    try:
        tree = lang.parse(program)
        lang.execute(tree, host, budget)
    except InterpreterError as e:
        return SimulationResult(host.trace, PythonError(e))
    except RobotExecutionError as e:
        return SimulationResult(host.trace, RobotError(e))
    return SimulationResult(host.trace, Success())


def simulate(
    program: SourceProgram | str, world: WorldState, budget: int = lang.DEFAULT_BUDGET
) -> SimulationResult:
    """Run ``program`` in ``world``; failures are reported in the outcome, never raised."""
    return _run(program, SkillHost(world), budget)


def simulate_stochastic(
    program: SourceProgram | str,
    spec: StochasticWorldSpec,
    seed: Any,
    budget: int = lang.DEFAULT_BUDGET,
) -> SimulationResult:
    if isinstance(spec, WorldState):
        spec = StochasticWorldSpec.from_world(spec)
    return _run(program, SkillHost(spec, rng_seed=seed), budget)


def replay(world: WorldState, elements: list[TraceElement]) -> RobotState:
    """Re-apply recorded skill calls from ``world`` and return the final robot state."""
    host = SkillHost(world)
    for el in elements:
        method = {
            "GoTo": host.go_to, "GetCurrentLocation": host.get_current_location,
            "GetAllRooms": host.get_all_rooms, "IsInRoom": host.is_in_room,
            "Say": host.say, "Pick": host.pick, "Place": host.place,
        }.get(el.skill)
        if el.skill == "Ask":
            # answers come from the recorded result; asking never moves the robot
            host._record("Ask", el.args, el.result, host.robot.location)
        else:
            method(*el.args)  # type: ignore[misc]
    return host.robot


# ---------------------------------------------------------------------------
# serialization


def _json(value: Any) -> str:
    if isinstance(value, tuple):
        value = list(value)
    return json.dumps(value, ensure_ascii=False, separators=(",", ":"))


def dump_trace(trace: Trace, outcome: Outcome | None = None) -> str:
    """Line-oriented trace format: a header, then one tab-separated element per line."""
    w = trace.world
    lines = [
        f"# trace v{TRACE_FORMAT_VERSION}",
        f"# world {getattr(w, 'name', 'stochastic')}",
        f"# rooms {_json(list(w.rooms))}",
        f"# start {w.robot_start}",
    ]
    if outcome is not None:
        lines.append(f"# outcome {outcome}")
    for el in trace.elements:
        lines.append("\t".join([str(el.index), el.skill, _json(list(el.args)), _json(el.result), el.location]))
    return "\n".join(lines) + "\n"


class TraceFormatError(ValueError):
    pass


def load_trace(text: str) -> Trace:
    header: dict[str, str] = {}
    elements: list[TraceElement] = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("# "):
            key, _, value = line[2:].partition(" ")
            header[key] = value
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise TraceFormatError(f"line {n}: expected 5 tab-separated fields, got {len(parts)}")
        idx, skill, args, result, location = parts
        try:
            el = TraceElement(int(idx), skill, tuple(json.loads(args)), json.loads(result), location)
        except ValueError as e:
            raise TraceFormatError(f"line {n}: {e}") from None
        if el.index != len(elements) or skill not in SKILLS:
            raise TraceFormatError(f"line {n}: bad index or skill")
        elements.append(el)
    if "rooms" not in header:
        raise TraceFormatError("missing '# rooms' header")
    rooms = tuple(json.loads(header["rooms"]))
    start = header.get("start") or rooms[0]
    spec = StochasticWorldSpec(rooms=rooms, robot_start=start)
    return Trace(world=spec, elements=elements, terminal_robot=None)
