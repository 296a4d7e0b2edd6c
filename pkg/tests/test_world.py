import pytest
from hypothesis import given, settings, strategies as st

from lmpcheck.world import (
    PersonSpec,
    ResponseRule,
    StochasticWorldSpec,
    WorldLoadError,
    WorldState,
    dump_world,
    load_world,
    respond,
)


def test_minimal_world():
    w = load_world("schema: 1\nrooms: [office, lobby]\nrobot_start: office\n")
    assert w.rooms == ("office", "lobby")
    assert w.robot_start == "office"


def test_start_must_be_a_room():
    with pytest.raises(WorldLoadError, match="robot_start not in rooms"):
        load_world("schema: 1\nrooms: [office]\nrobot_start: atlantis\n")


def test_pickable_must_be_located():
    doc = """
schema: 1
rooms: [office, lab]
robot_start: office
objects:
  - {name: marker, rooms: [office], pickable: [lab]}
"""
    with pytest.raises(WorldLoadError, match=r"objects\[marker\]\.pickable"):
        load_world(doc)


@pytest.mark.parametrize("doc, field", [
    ("rooms: [a]\nrobot_start: a\n", "schema"),
    ("schema: 1\nrobot_start: a\n", "rooms"),
    ("schema: 1\nrooms: [a, a]\nrobot_start: a\n", "rooms"),
    ("schema: 1\nrooms: [a]\nrobot_start: a\npersons: [{name: P, location: b, rules: [{question: x, choice: y}]}]\n",
     "persons"),
    ("schema: 1\nrooms: [a]\nrobot_start: a\npersons: [{name: P, location: a, rules: []}]\n", "rules"),
    ("schema: 1\nrooms: [a]\nrobot_start: a\nobjects: [{name: o, rooms: [zz]}]\n", "objects"),
])
def test_schema_errors_name_the_field(doc, field):
    with pytest.raises(WorldLoadError, match=field):
        load_world(doc)


def test_names_are_trimmed_and_case_sensitive():
    w = load_world("schema: 1\nrooms: ['  Lab ', lab]\nrobot_start: ' lab'\n")
    assert w.rooms == ("Lab", "lab")
    assert w.robot_start == "lab"


def _person(*rules):
    return PersonSpec("office", tuple(ResponseRule(q, c) for q, c in rules))


def test_respond_rule_match():
    assert respond(_person((".*lunch.*", "yes")), "Do you want lunch?", ["yes", "no"]) == "yes"


def test_respond_fallback_first_option():
    assert respond(_person(("coffee", "b")), "tea?", ["a", "b"]) == "a"


def test_respond_alternation_first_matching_option():
    assert respond(_person((".*", "cheddar|swiss")), "which?", ["sourdough", "cheddar"]) == "cheddar"


def test_respond_first_matching_rule_wins():
    p = _person((".*lunch.*", "no"), (".*", "yes"))
    assert respond(p, "lunch?", ["yes", "no"]) == "no"
    assert respond(p, "dinner?", ["yes", "no"]) == "yes"


def test_respond_patterns_are_anchored():
    p = _person(("lunch", "yes"))
    assert respond(p, "want lunch", ["no", "yes"]) == "no"


def test_stochastic_spec_defaults_to_first_room():
    assert StochasticWorldSpec(("a", "b")).robot_start == "a"
    with pytest.raises(WorldLoadError):
        StochasticWorldSpec(())


name = st.text("abcdefghijklmnopqrstuvwxyz '-", min_size=1, max_size=12).map(str.strip).filter(bool)


@st.composite
def worlds(draw):
    rooms = draw(st.lists(name, min_size=1, max_size=5, unique=True))
    objects = draw(st.dictionaries(name, st.frozensets(st.sampled_from(rooms)), max_size=4))
    pickable = frozenset(
        (o, r) for o, rs in objects.items() for r in sorted(rs) if draw(st.booleans())
    )
    persons = draw(st.dictionaries(
        name,
        st.builds(
            PersonSpec,
            st.sampled_from(rooms),
            st.lists(st.builds(ResponseRule, st.sampled_from([".*", "lunch.*", "(?i)yes"]),
                               st.sampled_from([".*", "no", "a|b"])), min_size=1, max_size=3).map(tuple),
        ),
        max_size=3,
    ))
    return WorldState(tuple(rooms), objects, pickable, persons, draw(st.sampled_from(rooms)),
                      draw(name))


@settings(max_examples=150, deadline=None)
@given(worlds())
def test_round_trip(w):
    assert load_world(dump_world(w)) == w


@settings(max_examples=50, deadline=None)
@given(worlds(), st.text(max_size=10), st.lists(st.text(min_size=1, max_size=5), min_size=1, max_size=4))
def test_respond_deterministic_and_returns_an_option(w, q, options):
    for p in w.persons.values():
        a = respond(p, q, options)
        assert a == respond(p, q, options)
        assert a in options
