"""Symbolic world states: rooms, perceivable and pickable objects, responsive people."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

WORLD_SCHEMA_VERSION = 1


class WorldLoadError(ValueError):
    """A world document violates the schema or a world invariant."""


@dataclass(frozen=True)
class ResponseRule:
    question: str
    choice: str


@dataclass(frozen=True)
class PersonSpec:
    location: str
    response_rules: tuple[ResponseRule, ...]


@dataclass(frozen=True)
class WorldState:
    rooms: tuple[str, ...]
    object_locations: Mapping[str, frozenset[str]]
    pickable: frozenset[tuple[str, str]]
    persons: Mapping[str, PersonSpec]
    robot_start: str
    name: str = "world"

    def __post_init__(self) -> None:
        _validate(self)

    def persons_at(self, room: str) -> list[str]:
        return [name for name, p in self.persons.items() if p.location == room]


@dataclass
class RobotState:
    location: str
    held: str | None = None


def respond(person: PersonSpec, question: str, options: list[str]) -> str:
    """Pick the answer ``person`` gives to a multiple-choice question.

    Patterns are anchored.  The first rule whose question pattern matches
    selects the answer: the first option its choice pattern matches.  With no matching rule or option
    the first option is returned.
    """
    for rule in person.response_rules:
        if re.fullmatch(rule.question, question, re.DOTALL):
            for opt in options:
                if re.fullmatch(rule.choice, opt):
                    return opt
            break
    return options[0]


def _validate(w: WorldState) -> None:
    if not w.rooms:
        raise WorldLoadError("rooms: must be non-empty")
    if len(set(w.rooms)) != len(w.rooms):
        raise WorldLoadError("rooms: duplicate room names")
    for r in w.rooms:
        if not r or r != r.strip() or any(c in r for c in "\t\n\r"):
            raise WorldLoadError(f"rooms: invalid room name {r!r}")
    rooms = set(w.rooms)
    if w.robot_start not in rooms:
        raise WorldLoadError("robot_start not in rooms")
    for obj, locs in w.object_locations.items():
        bad = sorted(locs - rooms)
        if bad:
            raise WorldLoadError(f"objects[{obj}].rooms: unknown room {bad[0]!r}")
    for obj, room in sorted(w.pickable):
        if room not in w.object_locations.get(obj, frozenset()):
            raise WorldLoadError(
                f"objects[{obj}].pickable: {room!r} is not a room where {obj!r} is located"
            )
    for pname, p in w.persons.items():
        if p.location not in rooms:
            raise WorldLoadError(f"persons[{pname}].location: unknown room {p.location!r}")
        if not p.response_rules:
            raise WorldLoadError(f"persons[{pname}].rules: must be non-empty")
        for rule in p.response_rules:
            for pat in (rule.question, rule.choice):
                try:
                    re.compile(pat)
                except re.error as e:
                    raise WorldLoadError(f"persons[{pname}].rules: bad regex {pat!r}: {e}") from None


def _req(doc: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in doc:
        raise WorldLoadError(f"{where}{key}: missing required field")
    return doc[key]


def _name(value: Any, where: str) -> str:
    if not isinstance(value, str):
        raise WorldLoadError(f"{where}: expected a string, got {type(value).__name__}")
    return value.strip()


def world_from_dict(doc: Mapping[str, Any]) -> WorldState:
    if not isinstance(doc, Mapping):
        raise WorldLoadError("world document must be a mapping")
    if doc.get("schema") != WORLD_SCHEMA_VERSION:
        raise WorldLoadError(f"schema: expected {WORLD_SCHEMA_VERSION}, got {doc.get('schema')!r}")
    raw_rooms = _req(doc, "rooms", "")
    if not isinstance(raw_rooms, list):
        raise WorldLoadError("rooms: expected a list")
    rooms = tuple(_name(r, f"rooms[{i}]") for i, r in enumerate(raw_rooms))
    start = _name(_req(doc, "robot_start", ""), "robot_start")

    locations: dict[str, frozenset[str]] = {}
    pickable: set[tuple[str, str]] = set()
    for i, o in enumerate(doc.get("objects") or []):
        where = f"objects[{i}]."
        if not isinstance(o, Mapping):
            raise WorldLoadError(f"objects[{i}]: expected a mapping")
        oname = _name(_req(o, "name", where), where + "name")
        if oname in locations:
            raise WorldLoadError(f"{where}name: duplicate object {oname!r}")
        orooms = _req(o, "rooms", where)
        if not isinstance(orooms, list):
            raise WorldLoadError(f"{where}rooms: expected a list")
        located = frozenset(_name(r, f"{where}rooms") for r in orooms)
        locations[oname] = located
        pk = o.get("pickable", False)
        if isinstance(pk, bool):
            pick_rooms = located if pk else frozenset()
        elif isinstance(pk, list):
            pick_rooms = frozenset(_name(r, f"{where}pickable") for r in pk)
        elif isinstance(pk, Mapping):
            pick_rooms = frozenset(_name(r, f"{where}pickable") for r, v in pk.items() if v)
        else:
            raise WorldLoadError(f"{where}pickable: expected bool, list or mapping")
        pickable.update((oname, r) for r in pick_rooms)

    persons: dict[str, PersonSpec] = {}
    for i, p in enumerate(doc.get("persons") or []):
        where = f"persons[{i}]."
        if not isinstance(p, Mapping):
            raise WorldLoadError(f"persons[{i}]: expected a mapping")
        pname = _name(_req(p, "name", where), where + "name")
        if pname in persons:
            raise WorldLoadError(f"{where}name: duplicate person {pname!r}")
        rules = []
        raw_rules = _req(p, "rules", where)
        if not isinstance(raw_rules, list):
            raise WorldLoadError(f"{where}rules: expected a list")
        for j, r in enumerate(raw_rules):
            if not isinstance(r, Mapping):
                raise WorldLoadError(f"{where}rules[{j}]: expected a mapping")
            rules.append(ResponseRule(
                question=_name(_req(r, "question", f"{where}rules[{j}]."), f"{where}rules[{j}].question"),
                choice=_name(_req(r, "choice", f"{where}rules[{j}]."), f"{where}rules[{j}].choice"),
            ))
        persons[pname] = PersonSpec(
            location=_name(_req(p, "location", where), where + "location"),
            response_rules=tuple(rules),
        )
    return WorldState(
        rooms=rooms,
        object_locations=locations,
        pickable=frozenset(pickable),
        persons=persons,
        robot_start=start,
        name=str(doc.get("name", "world")),
    )


def world_to_dict(w: WorldState) -> dict[str, Any]:
    objects = []
    for oname in sorted(w.object_locations):
        located = w.object_locations[oname]
        objects.append({
            "name": oname,
            "rooms": [r for r in w.rooms if r in located],
            "pickable": [r for r in w.rooms if (oname, r) in w.pickable],
        })
    persons = [
        {
            "name": pname,
            "location": p.location,
            "rules": [{"question": r.question, "choice": r.choice} for r in p.response_rules],
        }
        for pname, p in w.persons.items()
    ]
    return {
        "schema": WORLD_SCHEMA_VERSION,
        "name": w.name,
        "rooms": list(w.rooms),
        "robot_start": w.robot_start,
        "objects": objects,
        "persons": persons,
    }


def load_world(document: str | Mapping[str, Any]) -> WorldState:
    """Parse a YAML (or JSON) world document, or an already-decoded mapping."""
    if isinstance(document, str):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as e:
            raise WorldLoadError(f"malformed world document: {e}") from None
    return world_from_dict(document)


def load_world_file(path: str | Path) -> WorldState:
    return load_world(Path(path).read_text(encoding="utf-8"))


def dump_world(w: WorldState) -> str:
    return yaml.safe_dump(world_to_dict(w), sort_keys=False, allow_unicode=True)


@dataclass(frozen=True)
class StochasticWorldSpec:
    """Permanent part of a world: the room map and where the robot starts."""

    rooms: tuple[str, ...]
    robot_start: str = field(default="")

    def __post_init__(self) -> None:
        if not self.rooms:
            raise WorldLoadError("rooms: must be non-empty")
        if not self.robot_start:
            object.__setattr__(self, "robot_start", self.rooms[0])
        if self.robot_start not in self.rooms:
            raise WorldLoadError("robot_start not in rooms")

    @classmethod
    def from_world(cls, w: WorldState) -> "StochasticWorldSpec":
        return cls(rooms=w.rooms, robot_start=w.robot_start)
