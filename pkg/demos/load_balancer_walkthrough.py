"""Walk through the load balancer: typecheck it, watch its types reduce, then run it.

    python demos/load_balancer_walkthrough.py
"""
from __future__ import annotations

from mpstbang import assoc, parse_file, run_program, typecheck_program
from mpstbang.cli import corpus_dir
from mpstbang.printer import show_process
from mpstbang.tsem import com_steps

prog = parse_file(str(corpus_dir() / "load_balancer.mpst"))
protocol = prog.protocols["LoadBalancer"]

print("== protocol")
for role, t in protocol.entries:
    print(f"  {role}: {t}")

print("\n== typechecking under the safety property")
v = typecheck_program(prog, "safety")
print(f"  verdict: {v.status}")
for session, name, pv in v.properties:
    print(f"  session {session} : {name} has {pv.states} reachable contexts, all safe")

print("\n== one path through the type-level transition system")
g = assoc("s", protocol)
print(f"  {g}")
while True:
    steps = com_steps(g)
    if not steps:
        break
    act, g = steps[0]
    print(f"  --[{act}]-->")
    print(f"  {g}")
print("  only the replicated server and workers remain, waiting for the next client")

print("\n== a seeded run of the program")
r = run_program(prog, "random", seed=1)
for line in r.trace_text().splitlines():
    print(f"  {line}")
print("  final threads:")
for t in r.final.threads:
    print(f"    {show_process(t)}")
