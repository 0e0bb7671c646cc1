"""Behavioural sets of typing contexts and the properties checked over them.

`compute_beh` explores the communication graph of a context breadth first.
Graph nodes are contexts modulo unfolding; the behavioural set itself holds
each reached context together with its full unfolding.  A run that reaches
the state budget with work left reports an infinite set.

Label inclusion between a sender and a receiver aimed at each other is only
demanded when both endpoints have a single active component.  When either
endpoint runs several components in parallel, a sender may legitimately
wait for a receiver that first has to finish a conversation with a sibling
component (a lock held by another copy, say), so only payload compatibility
on shared labels is required there.
"""
from __future__ import annotations

import os
from collections import Counter, deque
from dataclasses import dataclass, field

import networkx as nx

from .context import Context
from .subtype import unfold_star
from .syntax import Branch, End, Endpoint, Select, type_key
from .tsem import com_steps, match_payloads, points_at, state_key, unfold_context

DEFAULT_BUDGET = 10_000
BUDGET_ENV = "MPSTBANG_BUDGET"
PROPERTIES = ("safety", "deadlock-free", "terminating")


def default_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    return int(raw) if raw else DEFAULT_BUDGET


@dataclass
class Finite:
    root: str
    nodes: dict                        # state id -> unfolded context
    edges: list                        # (state id, Com, state id)
    states: list                       # the behavioural set: reached contexts and unfoldings
    parent: dict = field(repr=False, default_factory=dict)

    finite = True

    def trace_to(self, key: str) -> list:
        path = []
        while key in self.parent:
            key, act = self.parent[key]
            path.append(act)
        return path[::-1]


@dataclass
class Infinite:
    reason: str
    budget: int
    explored: int
    witness: "object | None" = None

    finite = False


@dataclass
class PropertyVerdict:
    holds: "bool | None"               # None: unknown, the behavioural set is infinite
    property: str
    condition: "str | None" = None
    message: str = ""
    state: "Context | None" = None
    trace: list = field(default_factory=list)
    states: int = 0

    @property
    def verdict(self) -> str:
        return {True: "ok", False: "fail", None: "unknown"}[self.holds]


_beh_cache: dict = {}


def _signature(g: Context) -> Counter:
    """Multiset of (endpoint, component) of an unfolded context."""
    return Counter((c, type_key(t)) for c, u in g.chans for t in u.components)


def _pumps(sig: Counter, size: int, anc_sig: Counter, anc_size: int) -> bool:
    return size > anc_size and all(sig[k] >= n for k, n in anc_sig.items())


def compute_beh(g: Context, budget: "int | None" = None, pumping: bool = False) -> "Finite | Infinite":
    """Breadth-first exploration of the communication graph of `g`.

    With `pumping`, exploration also stops as soon as a state strictly covers
    one of its ancestors.  Communication only ever involves the two
    components it consumes, so extra components never disable a step and
    the path between the two states can be replayed forever: the set is
    certainly infinite.
    """
    budget = budget or default_budget()
    ck = (g.key(), budget, pumping)
    if ck in _beh_cache:
        return _beh_cache[ck]
    root = state_key(g)
    reps = {root: g}
    nodes = {root: unfold_context(g)}
    sigs = {root: _signature(nodes[root])} if pumping else {}
    parent: dict = {}
    edges = []
    frontier = deque([root])
    result = None
    while frontier and result is None:
        key = frontier.popleft()
        for act, nxt in com_steps(reps[key]):
            nk = state_key(nxt)
            edges.append((key, act, nk))
            if nk in reps:
                continue
            if len(reps) >= budget:
                result = Infinite("budget", budget, len(reps))
                break
            reps[nk] = nxt
            nodes[nk] = unfold_context(nxt)
            parent[nk] = (key, act)
            frontier.append(nk)
            if pumping:
                sig = sigs[nk] = _signature(nodes[nk])
                size = sum(sig.values())
                anc = key
                while True:
                    anc_sig = sigs[anc]
                    if _pumps(sig, size, anc_sig, sum(anc_sig.values())):
                        result = Infinite("pumping", budget, len(reps), (nodes[anc], nodes[nk]))
                        break
                    if anc not in parent:
                        break
                    anc = parent[anc][0]
                if result is not None:
                    break
    if result is None:
        states = {}
        for k, h in reps.items():
            states.setdefault(h.key(), h)
            states.setdefault(nodes[k].key(), nodes[k])
        result = Finite(root, nodes, edges, list(states.values()), parent)
    _beh_cache[ck] = result
    return result


def _infinite_message(beh: Infinite) -> str:
    if beh.reason == "pumping":
        return (f"behavioural set is infinite: after {beh.explored} states a reachable context "
                "strictly covers one of its predecessors")
    return f"behavioural set exceeds {beh.budget} states"


# ---------------------------------------------------------------- safety


def _is_idle(t) -> bool:
    u = unfold_star(t)
    return isinstance(u, End) or isinstance(u, Branch) and u.replicated


def state_violations(g: Context) -> list[tuple[str, str]]:
    """Pointwise safety conditions on one (unfolded) context."""
    out = []
    free = g.frv()
    if free:
        out.append(("S-α", "free role variables " + ", ".join(sorted("@" + v for v in free))))
    by_endpoint: dict = {}
    for c, u in g.chans:
        if isinstance(c, Endpoint):
            by_endpoint[c] = [unfold_star(t) for t in dict.fromkeys(u.components)]
    for e, comps in by_endpoint.items():
        for i, t in enumerate(comps):
            if not isinstance(t, Select):
                continue
            targets: dict = {}
            for o in t.options:
                if not o.to.var:
                    targets.setdefault(o.to.name, []).append(o)
            for q, opts in targets.items():
                qe = Endpoint(e.session, q)
                rcomps = by_endpoint.get(qe, [])
                strict = len(comps) == 1 and len(rcomps) == 1
                for j, b in enumerate(rcomps):
                    if qe == e and j == i:
                        continue
                    if not isinstance(b, Branch) or not points_at(b, e.role):
                        continue
                    rule = "S-!⊕&" if b.replicated else "S-⊕&"
                    missing = [o.label for o in opts if b.case(o.label) is None]
                    if strict and missing:
                        out.append((rule, f"{e} sends {', '.join(missing)} to {q}, which only accepts "
                                          f"{', '.join(b.labels())} from {e.role}"))
                    for o in opts:
                        case = b.case(o.label)
                        if case is not None and match_payloads(o.payloads, case.payloads) is None:
                            out.append((rule, f"payloads of {o.label} from {e} to {q} do not match"))
    return out


def _fail(prop, beh, key, rule, msg) -> PropertyVerdict:
    return PropertyVerdict(False, prop, rule, msg, beh.nodes[key], beh.trace_to(key), len(beh.states))


def check_safety(g: Context, budget: "int | None" = None) -> PropertyVerdict:
    beh = compute_beh(g, budget, pumping=True)
    if not beh.finite:
        return PropertyVerdict(None, "safety", None, _infinite_message(beh), states=beh.explored)
    for key, h in beh.nodes.items():
        bad = state_violations(h)
        if bad:
            rule, msg = bad[0]
            return _fail("safety", beh, key, rule, msg)
    return PropertyVerdict(True, "safety", states=len(beh.states))


def stuck_states(beh: Finite) -> list[str]:
    has_out = {src for src, _, _ in beh.edges}
    out = []
    for key, h in beh.nodes.items():
        if key in has_out:
            continue
        if all(_is_idle(t) for _, u in h.chans for t in u.components):
            continue
        out.append(key)
    return out


def check_deadlock_free(g: Context, budget: "int | None" = None) -> PropertyVerdict:
    v = check_safety(g, budget)
    if v.holds is not True:
        v.property = "deadlock-free"
        return v
    beh = compute_beh(g, budget, pumping=True)
    stuck = stuck_states(beh)
    if stuck:
        return _fail("deadlock-free", beh, stuck[0], "stuck",
                     "reachable state cannot communicate and is not finished")
    return PropertyVerdict(True, "deadlock-free", states=len(beh.states))


def graph_of(beh: Finite) -> nx.MultiDiGraph:
    gr = nx.MultiDiGraph()
    gr.add_nodes_from(beh.nodes)
    for src, act, dst in beh.edges:
        gr.add_edge(src, dst, action=act)
    return gr


def check_terminating(g: Context, budget: "int | None" = None) -> PropertyVerdict:
    v = check_deadlock_free(g, budget)
    if v.holds is not True:
        v.property = "terminating"
        return v
    beh = compute_beh(g, budget, pumping=True)
    gr = graph_of(beh)
    try:
        cycle = nx.find_cycle(gr, source=beh.root)
    except nx.NetworkXNoCycle:
        return PropertyVerdict(True, "terminating", states=len(beh.states))
    acts = " ; ".join(str(gr.edges[u, v, k]["action"]) for u, v, k in cycle)
    return _fail("terminating", beh, cycle[0][0], "cycle", f"reachable cycle: {acts}")


CHECKERS = {
    "safety": check_safety,
    "deadlock-free": check_deadlock_free,
    "terminating": check_terminating,
}


_verdict_cache: dict = {}


def check_property(g: Context, prop: str = "safety", budget: "int | None" = None) -> PropertyVerdict:
    if prop not in CHECKERS:
        raise ValueError(f"unknown property {prop!r}; choose one of {', '.join(PROPERTIES)}")
    budget = budget or default_budget()
    key = (g.key(), prop, budget)
    if key not in _verdict_cache:
        _verdict_cache[key] = CHECKERS[prop](g, budget)
    return _verdict_cache[key]


def dump_graph(beh: Finite) -> str:
    """Edge list `id --label--> id` followed by a state table."""
    ids = {k: f"S{i}" for i, k in enumerate(beh.nodes)}
    lines = [f"{ids[a]} --{act}--> {ids[b]}" for a, act, b in beh.edges]
    lines.append("")
    lines += [f"{ids[k]} = {h}" for k, h in beh.nodes.items()]
    return "\n".join(lines)
