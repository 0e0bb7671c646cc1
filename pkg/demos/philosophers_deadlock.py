"""Three dining philosophers sharing one lock service.

The naive protocol lets every philosopher grab its left chopstick first, which
can wedge the table; the turn-based protocol serialises access and always
finishes.  Both are checked at the type level and confirmed by running them.

    python demos/philosophers_deadlock.py
"""
from __future__ import annotations

from mpstbang import parse_file, run_program, typecheck_program
from mpstbang.cli import corpus_dir
from mpstbang.interp import blocked_threads
from mpstbang.printer import show_process

naive = parse_file(str(corpus_dir() / "philosophers_naive.mpst"))
turns = parse_file(str(corpus_dir() / "philosophers_turns.mpst"))

print("== naive philosophers, deadlock-freedom")
v = typecheck_program(naive, "deadlock-free")
(_, _, pv) = v.properties[0]
print(f"  verdict: {v.status} ({pv.states} reachable contexts explored)")
print("  the types get stuck after:")
for act in pv.trace:
    print(f"    {act}")

print("\n== the same deadlock at run time")
for seed in range(50):
    r = run_program(naive, "random", seed=seed)
    if r.blocked:
        print(f"  seed {seed} blocks after {len(r.trace)} steps; waiting threads:")
        for t in blocked_threads(r.final):
            print(f"    {show_process(t)[:100]}")
        break
else:
    print("  no blocking run among the first 50 seeds")

print("\n== turn-based philosophers, termination")
v = typecheck_program(turns, "terminating")
print(f"  verdict: {v.status} ({v.properties[0][2].states} reachable contexts)")
r = run_program(turns, "exhaustive")
print(f"  exhaustive run: {len(r.terminals)} terminal configurations, none blocked: {not r.blocked}")
