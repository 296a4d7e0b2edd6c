"""Rejection sampling against the offline synthetic generator.

The generator returns a mix of correct programs and known-bad mutants.
Candidates that crash in randomly drawn worlds are discarded and regenerated,
up to a retry limit. The demo shows that crash-free output rises with the limit
and task success does not always rise with it, because some candidates
run cleanly but still do the wrong thing.

    python3 demos/filter_sweep.py
"""

from lmpcheck import SyntheticGenerator, load_corpus, resample_sweep

tasks = load_corpus()
sweep = resample_sweep(SyntheticGenerator(tasks), tasks, limits=[1, 2, 4, 8], runs=5, seed=7, samples=4)

print(f"{'limit':>5}  {'crash-free':>10}  {'mean pass':>9}")
for lim in sweep.limits:
    scores = sweep.scores(lim)
    mean = sum(float(s.pass_at_1) for s in scores) / len(scores)
    print(f"{lim:>5}  {float(sweep.executable_fraction(lim)):>10.3f}  {mean:>9.3f}")
