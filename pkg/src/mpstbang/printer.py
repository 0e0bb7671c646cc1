"""Concrete syntax output.  `parse(show(t)) == t` for well-scoped terms."""
from __future__ import annotations

from functools import lru_cache

from .syntax import (
    Branch, Call, Case, Def, End, Endpoint, Ground, Inact, Lit, Option, Par, Protocol,
    RecBind, Recv, RecVar, Restrict, Role, Runtime, Select, Send, SendChoice, Var,
)


def show(t) -> str:
    if isinstance(t, (End, RecBind, RecVar, Branch, Select)):
        return show_type(t)
    if isinstance(t, Runtime):
        return " || ".join(show_type(c) for c in t.components) or "end"
    if isinstance(t, Protocol):
        return show_protocol(t)
    if isinstance(t, (Role, Ground, Lit, Var, Endpoint)):
        return str(t)
    if isinstance(t, Case):
        return _case(t)
    if isinstance(t, Option):
        return _option(t)
    if hasattr(t, "main"):
        return show_program(t)
    return show_process(t)


@lru_cache(maxsize=1 << 16)
def show_type(t) -> str:
    if isinstance(t, End):
        return "end"
    if isinstance(t, RecVar):
        return t.name
    if isinstance(t, RecBind):
        return f"rec {t.var} . {show_type(t.body)}"
    if isinstance(t, Branch):
        bang = "!" if t.replicated else ""
        return f"{bang}{t.frm} & {{{', '.join(_case(c) for c in t.cases)}}}"
    if isinstance(t, Select):
        if len(t.options) == 1:
            o = t.options[0]
            return f"{o.to} ! {o.label}{_payloads(o.payloads)} . {show_type(o.cont)}"
        return "+ {" + ", ".join(_option(o) for o in t.options) + "}"
    raise TypeError(f"not a session type: {t!r}")


def _payload(p) -> str:
    if isinstance(p, (Role, Ground)):
        return str(p)
    return show_type(p)


def _payloads(ps) -> str:
    return "(" + ", ".join(_payload(p) for p in ps) + ")"


def _case(c: Case) -> str:
    return f"{c.label}{_payloads(c.payloads)} . {show_type(c.cont)}"


def _option(o: Option) -> str:
    return f"{o.to} {o.label}{_payloads(o.payloads)} . {show_type(o.cont)}"


def show_protocol(p: Protocol) -> str:
    return "{" + ", ".join(f"{r}: {show_type(t)}" for r, t in p.entries) + "}"


def _subject(c, to: Role) -> str:
    return f"{c}[{to}]"


def _ends_open(p) -> bool:
    """Does the printed form end in a process that would swallow a trailing `|`?"""
    if isinstance(p, (Par, Def)):
        return True
    if isinstance(p, Restrict):
        return not isinstance(p.body, Par) and _ends_open(p.body)
    if isinstance(p, SendChoice) and len(p.sends) == 1:
        cont = p.sends[0].cont
        return not isinstance(cont, Par) and _ends_open(cont)
    return False


def _tight(p) -> str:
    """Render in a position that only admits a single prefix form."""
    if isinstance(p, Par):
        return f"({show_process(p)})"
    return show_process(p)


def _send(s: Send) -> str:
    vals = ", ".join(str(v) for v in s.payloads)
    return f"{_subject(s.subject, s.to)}!{s.label}<{vals}>.{_tight(s.cont)}"


@lru_cache(maxsize=1 << 16)
def show_process(p) -> str:
    if isinstance(p, Inact):
        return "0"
    if isinstance(p, Par):
        left = show_process(p.left)
        if _ends_open(p.left):
            left = f"({left})"
        return f"{left} | {show_process(p.right)}"
    if isinstance(p, Restrict):
        proto = p.name if p.name else show_protocol(p.protocol)
        return f"new {p.session} : {proto} . {_tight(p.body)}"
    if isinstance(p, SendChoice):
        if len(p.sends) == 1:
            return _send(p.sends[0])
        return "sum {" + ", ".join(_send(s) for s in p.sends) + "}"
    if isinstance(p, Recv):
        bang = "!" if p.replicated else ""
        cases = ", ".join(
            f"{c.label}({', '.join(str(b) for b in c.binders)}).{show_process(c.cont)}" for c in p.cases)
        return f"{bang}{_subject(p.subject, p.frm)}?{{{cases}}}"
    if isinstance(p, Def):
        params = ", ".join(f"{x} : {show_type(t)}" for x, t in p.params)
        return f"def {p.name}({params}) = {show_process(p.body)} in {show_process(p.scope)}"
    if isinstance(p, Call):
        return f"{p.name}<{', '.join(str(a) for a in p.args)}>"
    raise TypeError(f"not a process: {p!r}")


def show_program(prog) -> str:
    lines = []
    for name, proto in prog.protocols.items():
        body = ",\n  ".join(f"{r}: {show_type(t)}" for r, t in proto.entries)
        lines.append(f"protocol {name} {{\n  {body}\n}}")
    lines.append(f"main {show_process(prog.main)}")
    return "\n\n".join(lines) + "\n"
