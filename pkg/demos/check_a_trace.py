"""Simulate one program, then check its trace against hand-written RTL.

    python3 demos/check_a_trace.py
"""

from lmpcheck import check, load_corpus, parse_rtl, simulate
from lmpcheck.lang import SourceProgram

world = next(t for t in load_corpus() if t.name == "say_hello_lobby").cases[0].world
program = SourceProgram(
    "def task():\n"
    "    for room in get_all_rooms():\n"
    "        if 'kitchen' in room:\n"
    "            go_to(room)\n"
    "    go_to('lobby')\n"
    "    say('Hello!')\n",
    "demo",
)
res = simulate(program, world)
print(f"outcome: {res.outcome}, {len(res.trace)} trace elements")

spec = parse_rtl(
    "SayAtLocation: F say(/Hello!/, loc~/lobby/);\n"
    "Location: never(go_to(/kitchen/));\n"
    "InitialTerminal: at_end(loc(/lobby/))\n"
)
result = check(res.trace, spec)
print(f"verdict: {result.verdict}")
for label in result.failed_labels:
    print(f"  failed: {label}")
