"""Labelled transitions of typing contexts.

A context is viewed as a bag of components: each endpoint entry contributes
one component per parallel type.  Outputs and inputs fire on a single
component; a communication pairs an output with an input at the addressed
endpoint.  Firing a replicated branch leaves the branch in place and adds
the instantiated continuation beside it.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .context import Context
from .subtype import is_subtype, unfold_star
from .syntax import Branch, Endpoint, Ground, Role, Select, runtime, subst_roles


@dataclass(frozen=True)
class Out:
    session: str
    frm: str
    to: Role
    label: str
    payloads: tuple

    def __str__(self):
        return f"{self.session}: {self.frm} ! {self.to} {self.label}"


@dataclass(frozen=True)
class In:
    session: str
    at: str
    frm: Role
    label: str
    payloads: tuple

    def __str__(self):
        return f"{self.session}: {self.at} ? {self.frm} {self.label}"


@dataclass(frozen=True)
class Com:
    session: str
    frm: str
    to: str
    label: str

    def __str__(self):
        return f"{self.session}: {self.frm} -> {self.to} : {self.label}"


def components(g: Context, distinct: bool = False):
    """(endpoint, index, component, unfolded component) for every component.

    With `distinct`, repeated copies of a component at one endpoint are
    listed once: they have the same transitions.
    """
    out = []
    for c, u in g.chans:
        if isinstance(c, Endpoint):
            seen = set()
            for i, t in enumerate(u.components):
                if distinct:
                    if t in seen:
                        continue
                    seen.add(t)
                out.append((c, i, t, unfold_star(t)))
    return out


def _replace(g: Context, e: Endpoint, edits: dict, extra=()) -> Context:
    """Replace components of `e` by index (None drops it) and append `extra`."""
    comps = list(g.get(e).components)
    new = [edits.get(i, t) for i, t in enumerate(comps)]
    return g.with_chan(e, runtime(*[t for t in new if t is not None], *extra))


def local_steps(g: Context) -> list[tuple[object, Context]]:
    out = []
    seen = set()
    for e, i, t, u in components(g, distinct=True):
        if isinstance(u, Select):
            for o in u.options:
                act = Out(e.session, e.role, o.to, o.label, o.payloads)
                nxt = _replace(g, e, {i: o.cont})
                _push(out, seen, act, nxt)
        elif isinstance(u, Branch):
            for c in u.cases:
                act = In(e.session, e.role, u.frm, c.label, c.payloads)
                if u.replicated:
                    nxt = _replace(g, e, {}, [c.cont])
                else:
                    nxt = _replace(g, e, {i: c.cont})
                _push(out, seen, act, nxt)
    return out


def _push(out, seen, act, nxt):
    key = (act, nxt.key())
    if key not in seen:
        seen.add(key)
        out.append((act, nxt))


def points_at(b: Branch, sender: str) -> bool:
    """Can branch `b` receive from role `sender`?"""
    if b.replicated and b.binds:
        return True
    return b.frm == Role(sender)


def match_payloads(sent: tuple, expected: tuple) -> "dict | None":
    """Role substitution for a communication, or None when payloads clash."""
    if len(sent) != len(expected):
        return None
    m = {}
    for ps, pr in zip(sent, expected):
        if isinstance(pr, Role):
            if not isinstance(ps, Role):
                return None
            if pr.var:
                m[pr.name] = ps
            elif ps != pr:
                return None
        elif isinstance(pr, Ground) or isinstance(ps, Ground):
            if ps != pr:
                return None
        elif isinstance(ps, Role) or not is_subtype(ps, pr):
            return None
    return m


def com_steps(g: Context) -> list[tuple[Com, Context]]:
    out = []
    seen = set()
    comps = components(g, distinct=True)
    by_endpoint: dict = {}
    for e, i, t, u in comps:
        by_endpoint.setdefault(e, []).append((i, t, u))
    for e, i, t, u in comps:
        if not isinstance(u, Select):
            continue
        for o in u.options:
            if o.to.var:
                continue
            q = Endpoint(e.session, o.to.name)
            for j, rt, ru in by_endpoint.get(q, ()):
                if q == e and j == i:
                    continue
                if not isinstance(ru, Branch) or not points_at(ru, e.role):
                    continue
                case = ru.case(o.label)
                if case is None:
                    continue
                m = match_payloads(o.payloads, case.payloads)
                if m is None:
                    continue
                if ru.binds:
                    m[ru.frm.name] = Role(e.role)
                cont = subst_roles(case.cont, m)
                act = Com(e.session, e.role, q.role, o.label)
                if q == e:
                    edits = {i: o.cont}
                    if not ru.replicated:
                        edits[j] = cont
                    nxt = _replace(g, e, edits, [cont] if ru.replicated else [])
                else:
                    nxt = _replace(g, e, {i: o.cont})
                    if ru.replicated:
                        nxt = _replace(nxt, q, {}, [cont])
                    else:
                        nxt = _replace(nxt, q, {j: cont})
                _push(out, seen, act, nxt)
    return out


def reduces(g: Context) -> bool:
    return bool(com_steps(g))


def unfold_context(g: Context) -> Context:
    return Context(tuple((c, unfold_star(u)) for c, u in g.chans), g.roles, g.grounds)


def state_key(g: Context) -> str:
    """Identity of a state modulo unfolding and congruence of parallel types."""
    return unfold_context(g).key()


def reduce_star(g: Context, bound: int) -> tuple[list[Context], bool]:
    """Contexts reachable in at most `bound` communication rounds.

    Returns the reachable contexts (one per state identity) and whether the
    frontier was still nonempty at the cutoff.
    """
    seen = {state_key(g): g}
    frontier = deque([g])
    for _ in range(bound):
        nxt = deque()
        for h in frontier:
            for _, k in com_steps(h):
                key = state_key(k)
                if key not in seen:
                    seen[key] = k
                    nxt.append(k)
        frontier = nxt
        if not frontier:
            break
    return list(seen.values()), bool(frontier)


def trace_lines(actions) -> str:
    return "\n".join(str(a) for a in actions)
