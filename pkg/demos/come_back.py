"""Walk through the "come back and tell me" task.

Three candidate programs for the same request run in the same world. One
returns to where it started, one forgets to, and one returns to a room that
does not exist. The demo prints each trace and how it was classified.

    python3 demos/come_back.py
"""

from lmpcheck import evaluate_sample, load_corpus, simulate

task = next(t for t in load_corpus() if t.name == "come_back_tell")
case = task.cases[0]
candidates = [("reference", task.solutions[0])] + [
    (m.program.origin.rsplit("/", 1)[1], m.program) for m in task.mutants
]

print(f"Prompt: {task.prompts[0]}\n")
for label, prog in candidates:
    res = simulate(prog, case.world)
    verdict = evaluate_sample(prog, task)
    print(f"== {label}")
    print(prog.text.rstrip())
    print("-- trace")
    for e in res.trace.elements:
        print(f"  [{e.index}] {e.skill}{e.args} -> {e.result!r} @ {e.location}")
    print(f"-- outcome: {res.outcome}")
    if verdict.passed:
        print("-- passes every world case")
    else:
        print("-- failures: " + ", ".join(sorted({f.descriptor for f in verdict.failures})))
    print()
