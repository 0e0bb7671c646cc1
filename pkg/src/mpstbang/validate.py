"""Well-formedness checks for protocols and processes.

Types must have guarded, bound recursion variables, distinct labels and no
free role variables (at protocol level).  Processes must only use endpoints
of roles their session protocol declares, call declared definitions with the
right arity, and mention no free channel variables.
"""
from __future__ import annotations

from .diagnostics import Diagnostic
from .syntax import (
    Branch, Call, Def, End, Endpoint, Ground, Inact, Par, Protocol, RecBind, RecVar, Recv,
    Restrict, Role, Runtime, Select, SendChoice, Var, frv,
)


def validate(term, pos=None) -> list[Diagnostic]:
    """Diagnostics for a protocol, a session type or a closed process."""
    if isinstance(term, Protocol):
        return validate_protocol(term)
    if isinstance(term, (Inact, Par, Restrict, SendChoice, Recv, Def, Call)):
        return validate_process(term)
    return validate_type(term, pos)


def validate_type(t, pos=None, where: str = "") -> list[Diagnostic]:
    out: list[Diagnostic] = []
    pre = f"{where}: " if where else ""

    def go(t, bound: frozenset, unguarded: frozenset):
        if isinstance(t, (End, Role, Ground)):
            return
        if isinstance(t, Runtime):
            out.append(Diagnostic(f"{pre}parallel type inside a protocol", pos, "wf"))
            for c in t.components:
                go(c, bound, unguarded)
            return
        if isinstance(t, RecVar):
            if t.name not in bound:
                out.append(Diagnostic(f"{pre}free recursion variable {t.name}", pos, "wf"))
            elif t.name in unguarded:
                out.append(Diagnostic(f"{pre}unguarded recursion variable {t.name}", pos, "wf"))
            return
        if isinstance(t, RecBind):
            go(t.body, bound | {t.var}, unguarded | {t.var})
            return
        if isinstance(t, Branch):
            labels = [c.label for c in t.cases]
            if not labels:
                out.append(Diagnostic(f"{pre}branch without labels", pos, "wf"))
            for dup in sorted({l for l in labels if labels.count(l) > 1}):
                out.append(Diagnostic(f"{pre}duplicate branch label {dup}", pos, "wf"))
            for c in t.cases:
                for p in c.payloads:
                    go(p, bound, frozenset())
                go(c.cont, bound, frozenset())
            return
        if isinstance(t, Select):
            keys = [(o.to, o.label) for o in t.options]
            if not keys:
                out.append(Diagnostic(f"{pre}selection without options", pos, "wf"))
            for dup in sorted({k for k in keys if keys.count(k) > 1}, key=str):
                out.append(Diagnostic(f"{pre}duplicate selection label {dup[1]} to {dup[0]}", pos, "wf"))
            for o in t.options:
                for p in o.payloads:
                    go(p, bound, frozenset())
                go(o.cont, bound, frozenset())
            return
        raise TypeError(f"not a type: {t!r}")

    go(t, frozenset(), frozenset())
    return out


def validate_protocol(p: Protocol) -> list[Diagnostic]:
    out = []
    roles = [r for r, _ in p.entries]
    for dup in sorted({r for r in roles if roles.count(r) > 1}):
        out.append(Diagnostic(f"role {dup} declared twice", p.pos, "wf"))
    for r, t in p.entries:
        out += validate_type(t, p.pos, f"role {r}")
        free = frv(t)
        if free:
            out.append(Diagnostic(f"role {r}: free role variable {', '.join('@' + v for v in sorted(free))}",
                                  p.pos, "wf"))
    return out


def validate_process(p, defs: dict | None = None, sessions: dict | None = None,
                     chans: frozenset = frozenset(), checked: set | None = None) -> list[Diagnostic]:
    """`checked` holds protocols already validated elsewhere (by identity)."""
    out: list[Diagnostic] = []
    seen_protocols: set = set(checked or ())

    def chan(c, pos, sessions, chans):
        if isinstance(c, Var) and c.name not in chans:
            out.append(Diagnostic(f"free channel variable {c.name}", pos, "wf"))
        if isinstance(c, Endpoint):
            proto = sessions.get(c.session)
            if proto is None:
                out.append(Diagnostic(f"session {c.session} is not restricted", pos, "wf"))
            elif c.role not in proto:
                out.append(Diagnostic(f"role {c.role} is not part of the protocol of session {c.session}",
                                      pos, "wf"))

    def go(p, defs, sessions, chans, grounds):
        if isinstance(p, Inact):
            return
        if isinstance(p, Par):
            go(p.left, defs, sessions, chans, grounds)
            go(p.right, defs, sessions, chans, grounds)
            return
        if isinstance(p, Restrict):
            if id(p.protocol) not in seen_protocols:
                seen_protocols.add(id(p.protocol))
                out.extend(Diagnostic(d.message, d.pos or p.pos, d.rule) for d in validate_protocol(p.protocol))
            go(p.body, defs, {**sessions, p.session: p.protocol}, chans, grounds)
            return
        if isinstance(p, SendChoice):
            for s in p.sends:
                chan(s.subject, s.pos or p.pos, sessions, chans)
                for v in s.payloads:
                    if isinstance(v, Endpoint):
                        chan(v, s.pos or p.pos, sessions, chans)
                    elif isinstance(v, Var) and v.name not in chans and v.name not in grounds:
                        out.append(Diagnostic(f"free variable {v.name}", s.pos or p.pos, "wf"))
                go(s.cont, defs, sessions, chans, grounds)
            return
        if isinstance(p, Recv):
            chan(p.subject, p.pos, sessions, chans)
            labels = [c.label for c in p.cases]
            for dup in sorted({l for l in labels if labels.count(l) > 1}):
                out.append(Diagnostic(f"duplicate receive label {dup}", p.pos, "wf"))
            for c in p.cases:
                names = {b.name for b in c.binders if isinstance(b, Var)}
                go(c.cont, defs, sessions, chans | names, grounds | names)
            return
        if isinstance(p, Def):
            for x, t in p.params:
                out.extend(Diagnostic(d.message, p.pos, d.rule)
                           for d in validate_type(t, p.pos, f"parameter {x} of {p.name}"))
            inner = {**defs, p.name: len(p.params)}
            params = frozenset(x for x, _ in p.params)
            go(p.body, inner, sessions, params, frozenset())
            go(p.scope, inner, sessions, chans, grounds)
            return
        if isinstance(p, Call):
            if p.name not in defs:
                out.append(Diagnostic(f"call to undeclared process {p.name}", p.pos, "wf"))
            elif defs[p.name] != len(p.args):
                out.append(Diagnostic(f"{p.name} expects {defs[p.name]} arguments, got {len(p.args)}",
                                      p.pos, "wf"))
            for a in p.args:
                chan(a, p.pos, sessions, chans)
            return
        raise TypeError(f"not a process: {p!r}")

    go(p, dict(defs or {}), dict(sessions or {}), chans, frozenset())
    return out


def validate_program(prog) -> list[Diagnostic]:
    out = []
    for name, proto in prog.protocols.items():
        out.extend(Diagnostic(f"protocol {name}, {d.message}", d.pos, d.rule) for d in validate_protocol(proto))
    return out + validate_process(prog.main, checked={id(p) for p in prog.protocols.values()})
