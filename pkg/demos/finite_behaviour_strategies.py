"""When is a protocol's behavioural set finite?

Exploring contexts settles it for small protocols, but replication can pump
copies forever.  The syntactic strategies (trivially finite, loop free) answer
without exploring, and report the cyclic replicated communication paths that
cause the blow-up.  The auction shows the converse does not hold: it has
CRCPs, yet its behavioural set is finite.

    python demos/finite_behaviour_strategies.py
"""
from __future__ import annotations

from mpstbang import analyse, assoc, compute_beh, parse_file
from mpstbang.cli import corpus_dir
from mpstbang.strategy import MODES

for name in ("beh_two_states", "beh_infinite", "beh_infinite_loop", "approx_false_negative", "auction"):
    prog = parse_file(str(corpus_dir() / f"{name}.mpst"))
    pname, protocol = next(iter(prog.protocols.items()))
    print(f"== {pname} ({name}.mpst)")
    beh = compute_beh(assoc("s", protocol), budget=200)
    if beh.finite:
        print(f"  explored: finite, {len(beh.states)} contexts")
    else:
        print(f"  explored: gave up ({beh.reason}) after {beh.explored} contexts")
    for mode in MODES:
        report = analyse(protocol, mode)
        print(f"  {mode:>21}: tf {report.tf.status}, lf {report.lf.status}")
    for c in analyse(protocol).lf.crcps:
        print(f"  CRCP: {c}")
    print()
