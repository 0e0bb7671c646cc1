"""Recursive-descent parser for `.mpst` files.

Role variables carry the `@` sigil.  A bare identifier used as a value is a
channel variable when a binder for it is in scope and a role name otherwise.
A replicated receive (type or process) on a role variable that is already in
scope matches that role instead of binding a new one.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .diagnostics import Diagnostic, ParseError
from .syntax import (
    GROUND_TYPES, Branch, Call, Case, Def, END, Endpoint, Ground, Inact, Option, Par, Protocol,
    RecBind, Recv, RecvCase, RecVar, Restrict, Role, Runtime, Select, Send, SendChoice, Var, lit, runtime,
)

KEYWORDS = {"end", "rec", "main", "protocol", "new", "sum", "def", "in", "true", "false"}

_TOKEN = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<int>-?\d+)
  | (?P<id>[^\W\d]\w*'*)
  | (?P<op>\|\||[{}()\[\]<>,.:|!?&+@=])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    pos: tuple[int, int]


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ParseError([Diagnostic(f"unexpected character {text[i]!r}", (line, col))])
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            out.append(Token(kind, chunk, (line, col)))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        i = m.end()
    out.append(Token("eof", "", (line, col)))
    return out


@dataclass
class Program:
    protocols: dict = field(default_factory=dict)
    main: object = field(default_factory=Inact)

    def __eq__(self, other):
        return (isinstance(other, Program) and self.main == other.main
                and dict(self.protocols) == dict(other.protocols))

    def __str__(self):
        from .printer import show_program

        return show_program(self)


class _Fail(Exception):
    pass


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.errors: list[Diagnostic] = []
        self.protocols: dict[str, Protocol] = {}

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "id")

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        self.errors.append(Diagnostic(msg, tok.pos))
        raise _Fail()

    def expect(self, text: str) -> Token:
        if not self.at(text):
            got = self.tok.text or "end of input"
            self.error(f"expected '{text}' but found '{got}'")
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind != "id" or t.text in KEYWORDS:
            self.error(f"expected {what} but found '{t.text or 'end of input'}'")
        self.i += 1
        return t.text

    def role_ref(self) -> Role:
        if self.accept("@"):
            return Role(self.ident("role variable"), True)
        return Role(self.ident("role"))

    def sync(self, stops: set[str]):
        while self.tok.kind != "eof" and self.tok.text not in stops:
            self.i += 1

    # -- programs
    def program(self) -> Program:
        prog = Program()
        while self.at("protocol"):
            try:
                name, proto = self.proto_decl()
                if name in prog.protocols:
                    self.errors.append(Diagnostic(f"protocol {name} declared twice", proto.pos))
                prog.protocols[name] = proto
                self.protocols[name] = proto
            except _Fail:
                if len(self.errors) >= 10:
                    break
                self.i += 1
                self.sync({"protocol", "main"})
        if len(self.errors) < 10:
            try:
                self.expect("main")
                prog.main = self.process(frozenset(), frozenset())
                if self.tok.kind != "eof":
                    self.error(f"unexpected '{self.tok.text}' after main process")
            except _Fail:
                pass
        if self.errors:
            raise ParseError(self.errors[:10])
        return prog

    def proto_decl(self) -> tuple[str, Protocol]:
        start = self.expect("protocol")
        name = self.ident("protocol name")
        return name, self.proto_body(start.pos)

    def proto_body(self, pos) -> Protocol:
        self.expect("{")
        entries = [self.role_ty()]
        while self.accept(","):
            entries.append(self.role_ty())
        self.expect("}")
        seen = set()
        for r, _ in entries:
            if r in seen:
                self.error(f"role {r} declared twice in protocol")
            seen.add(r)
        return Protocol(tuple(entries), pos=pos)

    def role_ty(self):
        r = self.ident("role")
        self.expect(":")
        return r, self.stype(frozenset(), frozenset())

    # -- types
    def stype(self, recs: frozenset, roles: frozenset):
        t = self.tok
        if self.accept("end"):
            return END
        if self.accept("rec"):
            v = self.ident("recursion variable")
            self.expect(".")
            return RecBind(v, self.stype(recs | {v}, roles))
        if self.accept("!"):
            frm = self.role_ref()
            self.expect("&")
            return self.branch_rest(frm, True, recs, roles)
        if self.accept("+"):
            self.expect("{")
            opts = [self.select_opt(recs, roles)]
            while self.accept(","):
                opts.append(self.select_opt(recs, roles))
            self.expect("}")
            self._distinct([(o.to, o.label) for o in opts], "selection label", t)
            return Select(tuple(opts))
        if t.kind == "op" and t.text == "@" or t.kind == "id" and t.text not in KEYWORDS:
            nxt = self.peek(2 if t.text == "@" else 1)
            if nxt.text == "&" or nxt.text == "!":
                frm = self.role_ref()
                if self.accept("&"):
                    return self.branch_rest(frm, False, recs, roles)
                self.expect("!")
                label = self.ident("label")
                pays = self.payload_types(recs, roles, binding=False)
                self.expect(".")
                return Select((Option(frm, label, pays, self.stype(recs, roles)),))
            if t.text != "@":
                self.i += 1
                return RecVar(t.text)
        self.error(f"expected a session type but found '{t.text or 'end of input'}'")

    def branch_rest(self, frm: Role, replicated: bool, recs, roles):
        start = self.tok
        binds = replicated and frm.var and frm.name not in roles
        inner = roles | {frm.name} if binds else roles
        if self.accept("{"):
            cases = [self.branch_case(recs, inner)]
            while self.accept(","):
                cases.append(self.branch_case(recs, inner))
            self.expect("}")
        else:
            cases = [self.branch_case(recs, inner)]
        self._distinct([c.label for c in cases], "branch label", start)
        return Branch(frm, tuple(cases), replicated, binds)

    def branch_case(self, recs, roles) -> Case:
        label = self.ident("label")
        pays = self.payload_types(recs, roles, binding=True)
        self.expect(".")
        bound = {p.name for p in pays if isinstance(p, Role) and p.var}
        return Case(label, pays, self.stype(recs, roles | bound))

    def select_opt(self, recs, roles) -> Option:
        to = self.role_ref()
        label = self.ident("label")
        pays = self.payload_types(recs, roles, binding=False)
        self.expect(".")
        return Option(to, label, pays, self.stype(recs, roles))

    def payload_types(self, recs, roles, binding: bool) -> tuple:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.payload_type(recs, roles))
            while self.accept(","):
                out.append(self.payload_type(recs, roles))
        self.expect(")")
        return tuple(out)

    def payload_type(self, recs, roles):
        t = self.tok
        if t.kind == "id" and t.text in GROUND_TYPES:
            self.i += 1
            return Ground(t.text)
        if t.text == "@":
            if self.peek(2).text in ("&", "!"):
                return self.stype(recs, roles)
            return self.role_ref()
        if t.kind == "id" and t.text not in KEYWORDS and self.peek().text not in ("&", "!") and t.text not in recs:
            self.i += 1
            return Role(t.text)
        return self.stype(recs, roles)

    def _distinct(self, keys, what, tok):
        seen = set()
        for k in keys:
            if k in seen:
                label = k[1] if isinstance(k, tuple) else k
                self.error(f"duplicate {what} {label}", tok)
            seen.add(k)

    # -- processes
    def process(self, vs: frozenset, rs: frozenset):
        start = self.tok
        left = self.proc1(vs, rs)
        if self.accept("|"):
            return Par(left, self.process(vs, rs), pos=start.pos)
        return left

    def proc1(self, vs, rs):
        t = self.tok
        if t.kind == "int" and t.text == "0":
            self.i += 1
            return Inact(pos=t.pos)
        if self.accept("("):
            p = self.process(vs, rs)
            self.expect(")")
            return p
        if self.accept("new"):
            s = self.ident("session name")
            self.expect(":")
            if self.at("{"):
                proto, name = self.proto_body(self.tok.pos), None
            else:
                ref = self.tok
                name = self.ident("protocol name")
                if name not in self.protocols:
                    self.error(f"unknown protocol {name}", ref)
                proto = self.protocols[name]
            self.expect(".")
            return Restrict(s, proto, self.proc1(vs, rs), name, pos=t.pos)
        if self.accept("sum"):
            self.expect("{")
            sends = [self.send(vs, rs)]
            while self.accept(","):
                sends.append(self.send(vs, rs))
            self.expect("}")
            return SendChoice(tuple(sends), pos=t.pos)
        if self.accept("!"):
            return self.recv(vs, rs, replicated=True, start=t)
        if self.accept("def"):
            name = self.ident("process name")
            self.expect("(")
            params = []
            if not self.at(")"):
                params.append(self.param(rs))
                while self.accept(","):
                    params.append(self.param(rs))
            self.expect(")")
            self.expect("=")
            body = self.process(vs | {x for x, _ in params}, rs)
            self.expect("in")
            scope = self.process(vs, rs)
            return Def(name, tuple(params), body, scope, pos=t.pos)
        if t.kind == "id" and t.text not in KEYWORDS:
            if self.peek().text == "<":
                name = self.ident()
                self.expect("<")
                args = []
                if not self.at(">"):
                    args.append(self.chan())
                    while self.accept(","):
                        args.append(self.chan())
                self.expect(">")
                return Call(name, tuple(args), pos=t.pos)
            if self.peek().text == "[":
                save = self.i
                self.subject_and_peer()
                is_recv = self.at("?")
                self.i = save
                if is_recv:
                    return self.recv(vs, rs, replicated=False, start=t)
                return SendChoice((self.send(vs, rs),), pos=t.pos)
        self.error(f"expected a process but found '{t.text or 'end of input'}'")

    def param(self, rs):
        x = self.ident("parameter")
        self.expect(":")
        return x, self.stype(frozenset(), rs)

    def chan(self):
        name = self.ident("channel")
        if self.accept("["):
            r = self.ident("role")
            self.expect("]")
            return Endpoint(name, r)
        return Var(name)

    def subject_and_peer(self):
        name = self.ident("channel")
        self.expect("[")
        first = self.role_ref()
        self.expect("]")
        if self.accept("["):
            peer = self.role_ref()
            self.expect("]")
            if first.var:
                self.error("endpoint role must be a role name, not a variable")
            return Endpoint(name, first.name), peer
        return Var(name), first

    def send(self, vs, rs) -> Send:
        t = self.tok
        subj, to = self.subject_and_peer()
        self.expect("!")
        label = self.ident("label")
        self.expect("<")
        vals = []
        if not self.at(">"):
            vals.append(self.value(vs))
            while self.accept(","):
                vals.append(self.value(vs))
        self.expect(">")
        self.expect(".")
        return Send(subj, to, label, tuple(vals), self.proc1(vs, rs), pos=t.pos)

    def value(self, vs):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return lit(int(t.text))
        if t.kind == "str":
            self.i += 1
            return lit(json.loads(t.text))
        if self.accept("true"):
            return lit(True)
        if self.accept("false"):
            return lit(False)
        if self.accept("@"):
            return Role(self.ident("role variable"), True)
        name = self.ident("value")
        if self.accept("["):
            r = self.ident("role")
            self.expect("]")
            return Endpoint(name, r)
        return Var(name) if name in vs else Role(name)

    def recv(self, vs, rs, replicated: bool, start: Token) -> Recv:
        subj, frm = self.subject_and_peer()
        self.expect("?")
        binds = replicated and frm.var and frm.name not in rs
        inner = rs | {frm.name} if binds else rs
        self.expect("{")
        cases = [self.recv_case(vs, inner)]
        while self.accept(","):
            cases.append(self.recv_case(vs, inner))
        self.expect("}")
        self._distinct([c.label for c in cases], "receive label", start)
        return Recv(subj, frm, tuple(cases), replicated, binds, pos=start.pos)

    def recv_case(self, vs, rs) -> RecvCase:
        label = self.ident("label")
        self.expect("(")
        binders = []
        if not self.at(")"):
            binders.append(self.binder())
            while self.accept(","):
                binders.append(self.binder())
        self.expect(")")
        self.expect(".")
        bv = {b.name for b in binders if isinstance(b, Var)}
        br = {b.name for b in binders if isinstance(b, Role)}
        return RecvCase(label, tuple(binders), self.process(vs | bv, rs | br))

    def binder(self):
        if self.accept("@"):
            return Role(self.ident("role variable"), True)
        return Var(self.ident("binder"))

    # -- contexts (test and tooling convenience)
    def context_entries(self):
        self.expect("{")
        chans, roles = [], []
        if not self.at("}"):
            self.context_entry(chans, roles)
            while self.accept(","):
                self.context_entry(chans, roles)
        self.expect("}")
        return chans, roles

    def context_entry(self, chans, roles):
        if self.accept("@"):
            roles.append(self.ident("role variable"))
            return
        c = self.chan()
        self.expect(":")
        parts = [self.stype(frozenset(), frozenset())]
        while self.accept("||"):
            parts.append(self.stype(frozenset(), frozenset()))
        chans.append((c, runtime(*parts)))

    def finish(self, value):
        if self.tok.kind != "eof":
            self.errors.append(Diagnostic(f"unexpected '{self.tok.text}'", self.tok.pos))
        if self.errors:
            raise ParseError(self.errors)
        return value


def _run(text: str, fn):
    p = Parser(text)
    try:
        value = fn(p)
    except _Fail:
        raise ParseError(p.errors) from None
    return p.finish(value)


def parse(text: str) -> Program:
    """Parse a whole `.mpst` program."""
    p = Parser(text)
    return p.program()


def parse_file(path: str) -> Program:
    with open(path, encoding="utf-8") as f:
        return parse(f.read())


def parse_type(text: str, roles: frozenset = frozenset()):
    return _run(text, lambda p: p.stype(frozenset(), frozenset(roles)))


def parse_runtime(text: str) -> Runtime:
    def go(p):
        parts = [p.stype(frozenset(), frozenset())]
        while p.accept("||"):
            parts.append(p.stype(frozenset(), frozenset()))
        return runtime(*parts)
    return _run(text, go)


def parse_protocol(text: str) -> Protocol:
    return _run(text, lambda p: p.proto_body(p.tok.pos))


def parse_process(text: str, protocols: dict | None = None, variables=frozenset(), roles=frozenset()):
    def go(p):
        p.protocols = dict(protocols or {})
        return p.process(frozenset(variables), frozenset(roles))
    return _run(text, go)


def parse_context(text: str):
    """Parse `{s[p]: S || S', x: S, @a}` into a typing context."""
    from .context import Context

    chans, roles = _run(text, lambda p: p.context_entries())
    return Context.make(chans, roles)
