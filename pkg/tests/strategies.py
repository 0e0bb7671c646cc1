"""Hypothesis generators for types, contexts, protocols and programs.

Name pools are kept disjoint (roles p q r, role variables a b, recursion
variables t u, channel variables x y z) so that printed text reparses to
the same term.
"""
from __future__ import annotations

from hypothesis import strategies as st

from mpstbang.context import Context, assoc
from mpstbang.parser import Program
from mpstbang.syntax import (
    END, Branch, Call, Case, Def, End, Endpoint, Ground, Inact, Option, Par, Protocol, RecBind,
    RecVar, Recv, RecvCase, Restrict, Role, Select, Send, SendChoice, Var, lit,
)

ROLES = ("p", "q", "r")
ROLE_VARS = ("a", "b")
REC_VARS = ("t", "u")
LABELS = ("m", "n", "k")
CHAN_VARS = ("x", "y", "z")
GROUNDS = tuple(Ground(g) for g in ("int", "str", "bool"))


@st.composite
def session_types(draw, depth: int = 3, roles: frozenset = frozenset(), recs: frozenset = frozenset(),
                  guarded: frozenset = frozenset(), open_vars: frozenset = frozenset(),
                  payloads: bool = True, targets: tuple = ROLES):
    """A well-formed session type.

    `roles` are role variables in scope, `recs` recursion variables in
    scope of which `guarded` sit behind a prefix, `open_vars` role
    variables allowed free.
    """
    kinds = ["end"]
    usable = sorted(guarded)
    if usable:
        kinds.append("var")
    if depth > 0:
        kinds += ["branch", "select", "select", "rec"]
    kind = draw(st.sampled_from(kinds))
    if kind == "end":
        return END
    if kind == "var":
        return RecVar(draw(st.sampled_from(usable)))
    if kind == "rec":
        free = [v for v in REC_VARS if v not in recs]
        if not free:
            return END
        v = draw(st.sampled_from(free))
        return RecBind(v, draw(session_types(depth - 1, roles, recs | {v}, guarded, open_vars, payloads, targets)))
    in_scope = sorted(roles | open_vars)
    nested = dict(depth=depth - 1, recs=recs, guarded=recs, open_vars=open_vars, payloads=payloads,
                  targets=targets)
    if kind == "branch":
        replicated = draw(st.booleans())
        if replicated and draw(st.booleans()):
            frm = Role(draw(st.sampled_from(ROLE_VARS)), True)
        elif in_scope and draw(st.booleans()):
            frm = Role(draw(st.sampled_from(in_scope)), True)
        else:
            frm = Role(draw(st.sampled_from(targets)))
        binds = replicated and frm.var and frm.name not in roles | open_vars
        inner = roles | {frm.name} if binds else roles
        labels = draw(st.lists(st.sampled_from(LABELS), min_size=1, max_size=2, unique=True))
        cases = []
        for label in labels:
            pays = draw(_payload_types(inner, recs, open_vars, binding=True, allowed=payloads))
            bound = {p.name for p in pays if isinstance(p, Role) and p.var}
            cont = draw(session_types(roles=inner | bound, **nested))
            cases.append(Case(label, pays, cont))
        return Branch(frm, tuple(cases), replicated, binds)
    opts = []
    keys = draw(st.lists(st.tuples(st.sampled_from(_target_pool(in_scope, targets)), st.sampled_from(LABELS)),
                         min_size=1, max_size=2, unique=True))
    for to, label in keys:
        pays = draw(_payload_types(roles, recs, open_vars, binding=False, allowed=payloads))
        opts.append(Option(to, label, pays, draw(session_types(roles=roles, **nested))))
    return Select(tuple(opts))


def _target_pool(in_scope, targets) -> list:
    return [Role(r) for r in targets] + [Role(v, True) for v in in_scope]


@st.composite
def _payload_types(draw, roles, recs, open_vars, binding: bool, allowed: bool):
    if not allowed:
        return ()
    n = draw(st.integers(0, 2))
    out = []
    for _ in range(n):
        kind = draw(st.sampled_from(["ground", "role", "rolevar", "session"]))
        if kind == "ground":
            out.append(draw(st.sampled_from(GROUNDS)))
        elif kind == "role":
            out.append(Role(draw(st.sampled_from(ROLES))))
        elif kind == "rolevar":
            pool = ROLE_VARS if binding else sorted(roles | open_vars)
            if not pool:
                out.append(draw(st.sampled_from(GROUNDS)))
                continue
            v = Role(draw(st.sampled_from(pool)), True)
            if binding and v in out:
                continue
            out.append(v)
        else:
            out.append(draw(session_types(1, roles, recs, recs, open_vars, payloads=False)))
    return tuple(out)


def closed_types(depth: int = 3):
    return session_types(depth)


def open_types(depth: int = 3):
    """Types whose selections may target the free role variable @a."""
    return session_types(depth, open_vars=frozenset({"a"}))


@st.composite
def protocols(draw, depth: int = 3, max_roles: int = 3):
    n = draw(st.integers(1, max_roles))
    names = ROLES[:n]
    entries = tuple((r, draw(session_types(depth, targets=names))) for r in names)
    return Protocol(entries)


@st.composite
def runtime_components(draw, depth: int = 2):
    return tuple(draw(st.lists(closed_types(depth), min_size=0, max_size=3)))


@st.composite
def contexts(draw, depth: int = 2):
    """Typing contexts with endpoint and variable entries and role variables."""
    keys = draw(st.lists(st.sampled_from([Endpoint("s", r) for r in ROLES] + [Var(x) for x in CHAN_VARS]),
                         min_size=0, max_size=3, unique=True))
    chans = []
    for k in keys:
        comps = draw(runtime_components(depth))
        chans.append((k, comps if comps else (END,)))
    roles = draw(st.sets(st.sampled_from(ROLE_VARS)))
    return Context.make([(k, _rt(c)) for k, c in chans], roles)


def _rt(comps):
    from mpstbang.syntax import runtime

    return runtime(*comps)


@st.composite
def protocol_contexts(draw, depth: int = 3):
    return assoc("s", draw(protocols(depth)))


# ---------------------------------------------------------------- programs


def _chan_pool(vs):
    return [Endpoint("s", r) for r in ROLES] + [Var(x) for x in sorted(vs)]


@st.composite
def _values(draw, vs, rs):
    kind = draw(st.sampled_from(["int", "str", "bool", "chan", "role", "rolevar"]))
    if kind == "int":
        return lit(draw(st.integers(0, 10 ** 6)))
    if kind == "str":
        return lit(draw(st.text(alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)), max_size=6)))
    if kind == "bool":
        return lit(draw(st.booleans()))
    if kind == "chan":
        return draw(st.sampled_from(_chan_pool(vs)))
    if kind == "rolevar" and rs:
        return Role(draw(st.sampled_from(sorted(rs))), True)
    return Role(draw(st.sampled_from(ROLES)))


@st.composite
def _peer(draw, rs):
    pool = [Role(r) for r in ROLES] + [Role(v, True) for v in sorted(rs)]
    return draw(st.sampled_from(pool))


@st.composite
def _send(draw, vs, rs, depth, defs):
    subj = draw(st.sampled_from(_chan_pool(vs)))
    to = draw(_peer(rs))
    label = draw(st.sampled_from(LABELS))
    vals = tuple(draw(st.lists(_values(vs, rs), max_size=2)))
    cont = draw(processes(depth - 1, vs, rs, defs, top=False))
    return Send(subj, to, label, vals, cont)


@st.composite
def processes(draw, depth: int = 3, vs: frozenset = frozenset(), rs: frozenset = frozenset(),
              defs: frozenset = frozenset(), top: bool = True, protos: tuple = ()):
    kinds = ["inact"]
    if defs:
        kinds.append("call")
    if depth > 0:
        kinds += ["send", "sum", "recv", "recv", "par", "def"]
        if protos:
            kinds.append("new")
    kind = draw(st.sampled_from(kinds))
    if kind == "inact":
        return Inact()
    if kind == "call":
        name = draw(st.sampled_from(sorted(defs)))
        args = tuple(draw(st.lists(st.sampled_from(_chan_pool(vs)), max_size=2)))
        return Call(name, args)
    if kind == "send":
        return SendChoice((draw(_send(vs, rs, depth, defs)),))
    if kind == "sum":
        sends = draw(st.lists(_send(vs, rs, depth, defs), min_size=2, max_size=3))
        return SendChoice(tuple(sends))
    if kind == "par":
        return Par(draw(processes(depth - 1, vs, rs, defs, protos=protos)),
                   draw(processes(depth - 1, vs, rs, defs, protos=protos)))
    if kind == "new":
        name, proto = draw(st.sampled_from(protos))
        return Restrict(draw(st.sampled_from(["s", "s2"])), proto,
                        draw(processes(depth - 1, vs, rs, defs, protos=protos)), name)
    if kind == "def":
        name = draw(st.sampled_from(["X", "Y"]))
        params = draw(st.lists(st.sampled_from(CHAN_VARS), max_size=2, unique=True))
        ptypes = tuple((x, draw(session_types(1, rs, payloads=False))) for x in params)
        body = draw(processes(depth - 1, vs | set(params), rs, defs | {name}, protos=protos))
        scope = draw(processes(depth - 1, vs, rs, defs | {name}, protos=protos))
        return Def(name, ptypes, body, scope)
    replicated = draw(st.booleans())
    subj = draw(st.sampled_from(_chan_pool(vs)))
    frm = draw(_peer(rs | set(ROLE_VARS) if replicated else rs))
    binds = replicated and frm.var and frm.name not in rs
    inner = rs | {frm.name} if binds else rs
    labels = draw(st.lists(st.sampled_from(LABELS), min_size=1, max_size=2, unique=True))
    cases = []
    for label in labels:
        binders = draw(st.lists(st.sampled_from([Var(x) for x in CHAN_VARS] + [Role(v, True) for v in ROLE_VARS]),
                                max_size=2, unique=True))
        bv = {b.name for b in binders if isinstance(b, Var)}
        br = {b.name for b in binders if isinstance(b, Role)}
        cases.append(RecvCase(label, tuple(binders),
                              draw(processes(depth - 1, vs | bv, inner | br, defs, protos=protos))))
    return Recv(subj, frm, tuple(cases), replicated, binds)


@st.composite
def programs(draw):
    decls = draw(st.lists(protocols(2), max_size=2))
    named = tuple((f"P{i}", proto) for i, proto in enumerate(decls))
    main = draw(processes(3, protos=named))
    return Program(dict(named), main)


@st.composite
def communicating_protocols(draw, max_steps: int = 4):
    """Protocols projected from a random sequence of interactions, so that
    most sends meet a matching receive.  Replicated receivers, role and
    session payloads, recursion and the odd label mismatch are mixed in."""
    n = draw(st.integers(2, 3))
    names = ROLES[:n]
    steps = []
    for _ in range(draw(st.integers(1, max_steps))):
        a, b = draw(st.permutations(names))[:2]
        steps.append((a, b, draw(st.sampled_from(LABELS)), draw(st.sampled_from(["plain", "plain", "replicated"])),
                      draw(st.lists(st.sampled_from(["int", "role", "session"]), max_size=2))))
    looping = draw(st.booleans())
    types = {r: RecVar("t") if looping else END for r in names}
    for a, b, label, kind, pays in reversed(steps):
        sent, expected = [], []
        for k in pays:
            if k == "int":
                sent.append(Ground("int"))
                expected.append(Ground("int"))
            elif k == "role":
                sent.append(Role(draw(st.sampled_from(names))))
                expected.append(Role("b", True))
            else:
                payload = draw(session_types(1, payloads=False, targets=names))
                sent.append(payload)
                expected.append(payload if draw(st.booleans()) else draw(session_types(1, payloads=False,
                                                                                       targets=names)))
        recv_label = label if draw(st.integers(0, 9)) else draw(st.sampled_from(LABELS))
        opts = [Option(Role(b), label, tuple(sent), types[a])]
        cases = [Case(recv_label, tuple(expected), types[b])]
        other = [l for l in LABELS if l not in (label, recv_label)]
        if other and draw(st.booleans()):
            # a second choice both sides agree on
            opts.append(Option(Role(b), other[0], (), types[a]))
            cases.append(Case(other[0], (), types[b]))
        types[a] = Select(tuple(opts))
        if kind == "replicated":
            types[b] = Branch(Role("a", True), tuple(cases), True, True)
        else:
            types[b] = Branch(Role(a), tuple(cases))
    if looping:
        types = {r: RecBind("t", t) if not isinstance(t, RecVar) else END for r, t in types.items()}
    return Protocol(tuple((r, types[r]) for r in names))
