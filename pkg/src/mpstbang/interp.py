"""Operational semantics of processes.

A running program is kept as a `Config` in normal form: every definition and
restriction hoisted outermost, parallel compositions flattened, inert
threads dropped and the remaining threads sorted by their printed form.
The printed form of a normalized config is its identity during search.

Communication only fires from a committed send (a sum of one summand).  A
sum of several summands first resolves by its own R-+ step.
"""
from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from .context import Context, assoc
from .diagnostics import Diagnostic
from .printer import show_process, show_protocol, show_type
from .subtype import unfold_star
from .syntax import (
    Call, Def, End, Endpoint, Inact, Par, Restrict, Recv, Role, SendChoice, Var, children,
    free_channels, free_names, par, rename_call, rename_session, subst_proc,
)
from .tsem import Com, com_steps, reduce_star, state_key
from .typecheck import Checker

DEFAULT_MAX_STEPS = 10_000
SCHEDULERS = ("exhaustive", "random", "interactive")


# ---------------------------------------------------------------- configurations


@dataclass(frozen=True)
class Session:
    name: str
    protocol: object
    label: "str | None" = None       # declared protocol name, when there is one

    def show(self) -> str:
        return self.label or show_protocol(self.protocol)


@dataclass(frozen=True)
class Config:
    defs: tuple = ()                 # (name, params, body), sorted by name
    sessions: tuple = ()             # Session, sorted by name
    threads: tuple = ()              # sequential processes, sorted by printed form

    def key(self) -> str:
        return show_config(self)

    def __str__(self):
        return show_config(self)

    def theta(self) -> dict:
        return {name: params for name, params, _ in self.defs}

    def definition(self, name: str):
        for n, params, body in self.defs:
            if n == name:
                return params, body
        return None

    def context(self) -> Context:
        """Initial typing context of the restricted sessions."""
        g = Context()
        for s in self.sessions:
            g = g + assoc(s.name, s.protocol)
        return g

    def to_process(self):
        body = par(*self.threads)
        for s in reversed(self.sessions):
            body = Restrict(s.name, s.protocol, body, s.label)
        for name, params, d in reversed(self.defs):
            body = Def(name, params, d, body)
        return body


def show_config(c: Config) -> str:
    parts = [f"def {n}({', '.join(f'{x} : {show_type(t)}' for x, t in ps)}) = {show_process(b)} in"
             for n, ps, b in c.defs]
    parts += [f"new {s.name} : {s.show()} ." for s in c.sessions]
    threads = " | ".join(_shown(t) for t in c.threads) or "0"
    if c.sessions or c.defs:
        threads = f"({threads})"
    return " ".join(parts + [threads])


def _shown(t) -> str:
    text = show_process(t)
    return f"({text})" if isinstance(t, Def) else text


class ClosedError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(d.message for d in diagnostics))


@lru_cache(maxsize=None)
def _session_names(p) -> frozenset:
    """Session names occurring in a process, free or bound."""
    out = {c.session for c in free_channels(p) if isinstance(c, Endpoint)}
    if isinstance(p, Restrict):
        out.add(p.session)
    for ch in children(p):
        out |= _session_names(ch)
    return frozenset(out)


def _pick_name(base: str, taken: set) -> str:
    if base not in taken:
        return base
    k = 1
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


def _def_name(base: str, params: tuple, body) -> str:
    """Stable name for a definition that clashes with a different one of the
    same name: the suffix depends only on the definition's text, so the name
    does not depend on the order in which copies were instantiated."""
    text = ", ".join(f"{x} : {show_type(t)}" for x, t in params) + " = " + show_process(body)
    return f"{base}_{hashlib.sha1(text.encode()).hexdigest()[:6]}"


def _absorb(defs: dict, sessions: dict, threads: list, procs: list) -> None:
    """Hoist definitions and restrictions out of `procs` into the config parts."""
    taken = None
    work = deque(procs)
    while work:
        p = work.popleft()
        if isinstance(p, Inact):
            continue
        if isinstance(p, Par):
            work.appendleft(p.right)
            work.appendleft(p.left)
        elif isinstance(p, Restrict):
            s, body = p.session, p.body
            if s in sessions:
                if taken is None:
                    taken = set(sessions).union(*(_session_names(q) for q in list(procs) + threads))
                new = _pick_name(s, taken)
                body, s = rename_session(body, s, new), new
            if taken is not None:
                taken.add(s)
            sessions[s] = Session(s, p.protocol, p.name)
            work.appendleft(body)
        elif isinstance(p, Def):
            name, body, scope = p.name, p.body, p.scope
            have = defs.get(name)
            if have is not None and have != (p.params, body):
                new = _def_name(name, p.params, body)
                body, scope = rename_call(body, name, new), rename_call(scope, name, new)
                name = new
            defs[name] = (p.params, body)
            work.appendleft(scope)
        else:
            threads.append(p)


@lru_cache(maxsize=None)
def _calls(p) -> frozenset:
    out = {p.name} if isinstance(p, Call) else set()
    for ch in children(p):
        out |= _calls(ch)
    return frozenset(out)


def _build(defs: dict, sessions: dict, threads: list) -> Config:
    """Assemble a config, dropping definitions no thread can reach and
    sessions no thread mentions."""
    live: set = set()
    work = [n for t in threads for n in _calls(t)]
    while work:
        n = work.pop()
        if n in live or n not in defs:
            continue
        live.add(n)
        work.extend(_calls(defs[n][1]))
    used = frozenset().union(*(_session_names(t) for t in threads))
    return Config(
        tuple((n, ps, b) for n, (ps, b) in sorted(defs.items()) if n in live),
        tuple(sessions[s] for s in sorted(sessions) if s in used),
        tuple(sorted(threads, key=show_process)),
    )


def normalize(p) -> Config:
    """Normal form of a closed process."""
    vs, _, rs = free_names(p)
    if vs or rs:
        names = sorted(vs) + sorted("@" + r for r in rs)
        raise ClosedError([Diagnostic(f"process has free variables {', '.join(names)}", None, "wf")])
    defs: dict = {}
    sessions: dict = {}
    threads: list = []
    _absorb(defs, sessions, threads, [p])
    return _build(defs, sessions, threads)


def _respawn(c: Config, drop: tuple, new: list) -> Config:
    """Config with the threads at indices `drop` removed and `new` absorbed."""
    defs = {n: (ps, b) for n, ps, b in c.defs}
    sessions = {s.name: s for s in c.sessions}
    threads = [t for i, t in enumerate(c.threads) if i not in drop]
    _absorb(defs, sessions, threads, new)
    return _build(defs, sessions, threads)


# ---------------------------------------------------------------- steps


@dataclass(frozen=True)
class Step:
    rule: str                        # R-C, R-!C1, R-!C2, R-+, R-X
    session: str = ""
    frm: str = ""
    to: str = ""
    label: str = ""
    subst: tuple = ()                # (value text, binder text) in application order
    choice: int = -1                 # summand index for R-+

    def com(self) -> "Com | None":
        if self.rule in ("R-C", "R-!C1", "R-!C2"):
            return Com(self.session, self.frm, self.to, self.label)
        return None

    def __str__(self):
        if self.rule == "R-X":
            return f"R-X {self.label}"
        subs = "".join(f"{{{v}/{b}}}" for v, b in self.subst)
        text = f"{self.rule} {self.session} {self.frm}->{self.to} {self.label}"
        if self.rule == "R-+":
            text += f" #{self.choice}"
        return f"{text} {subs}" if subs else text


def _bind(binders: tuple, payloads: tuple):
    """Value and role substitutions of a receive, or None on a mismatch."""
    if len(binders) != len(payloads):
        return None
    values, roles, shown = {}, {}, []
    for b, v in zip(binders, payloads):
        if isinstance(b, Role):
            if not isinstance(v, Role) or v.var:
                return None
            roles[b.name] = v
        else:
            if isinstance(v, Role):
                return None
            values[b.name] = v
        shown.append((str(v), str(b)))
    return values, roles, shown


def enumerate_steps(c: Config) -> list[tuple[Step, Config]]:
    out = []
    receivers: dict = {}
    for j, t in enumerate(c.threads):
        if isinstance(t, Recv) and isinstance(t.subject, Endpoint):
            receivers.setdefault(t.subject, []).append(j)
    for i, t in enumerate(c.threads):
        if isinstance(t, Call):
            found = c.definition(t.name)
            if found is None:
                continue
            params, body = found
            if len(params) != len(t.args):
                continue
            inst = subst_proc(body, {x: a for (x, _), a in zip(params, t.args)})
            out.append((Step("R-X", label=show_process(t)), _respawn(c, (i,), [inst])))
        elif isinstance(t, SendChoice) and len(t.sends) > 1:
            for k, s in enumerate(t.sends):
                step = Step("R-+", _session(s.subject), _role(s.subject), str(s.to), s.label, choice=k)
                out.append((step, _respawn(c, (i,), [SendChoice((s,), pos=t.pos)])))
        elif isinstance(t, SendChoice) and len(t.sends) == 1:
            s = t.sends[0]
            if not isinstance(s.subject, Endpoint) or s.to.var:
                continue
            target = Endpoint(s.subject.session, s.to.name)
            for j in receivers.get(target, ()):
                if j == i:
                    continue
                r = c.threads[j]
                if not (r.binds and r.replicated) and r.frm != Role(s.subject.role):
                    continue
                case = r.case(s.label)
                if case is None:
                    continue
                bound = _bind(case.binders, s.payloads)
                if bound is None:
                    continue
                values, roles, shown = bound
                if r.binds and r.replicated:
                    roles[r.frm.name] = Role(s.subject.role)
                    shown.append((s.subject.role, str(r.frm)))
                    rule = "R-!C2"
                else:
                    rule = "R-!C1" if r.replicated else "R-C"
                cont = subst_proc(case.cont, values, roles)
                step = Step(rule, target.session, s.subject.role, target.role, s.label, tuple(shown))
                drop = (i,) if r.replicated else (i, j)
                out.append((step, _respawn(c, drop, [s.cont, cont])))
    out.sort(key=lambda e: (str(e[0]), e[1].key()))
    return out


def _session(ch) -> str:
    return ch.session if isinstance(ch, Endpoint) else str(ch)


def _role(ch) -> str:
    return ch.role if isinstance(ch, Endpoint) else str(ch)


def blocked_threads(c: Config) -> list:
    """Threads of a config that still wait for something; replicated receives
    never count, they are servers that may simply have no more clients."""
    return [t for t in c.threads if not (isinstance(t, Recv) and t.replicated)]


# ---------------------------------------------------------------- runs


@dataclass
class Run:
    scheduler: str
    start: Config
    trace: list = field(default_factory=list)        # Step, for single-trace schedulers
    final: "Config | None" = None
    terminals: list = field(default_factory=list)    # Config, for exhaustive search
    states: int = 0
    edges: int = 0
    step_limit: bool = False
    seed: "int | None" = None

    @property
    def blocked(self) -> list:
        """Terminal configs left with waiting threads.  A single run cut off by
        the step limit or by the user has not reached a terminal config."""
        if self.scheduler == "exhaustive":
            return [c for c in self.terminals if blocked_threads(c)]
        c = self.final
        if c is None or enumerate_steps(c):
            return []
        return [c] if blocked_threads(c) else []

    @property
    def verdict(self) -> str:
        if self.blocked:
            return "blocked"
        return "step-limit" if self.step_limit else "ok"

    def trace_text(self) -> str:
        return "\n".join(str(s) for s in self.trace)


def run(c: Config, scheduler: str = "random", seed: "int | None" = None,
        max_steps: int = DEFAULT_MAX_STEPS, choose: "Callable | None" = None) -> Run:
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    if scheduler == "exhaustive":
        return _exhaustive(c, max_steps)
    if scheduler == "random":
        rng = random.Random(seed)
        return _single(c, scheduler, max_steps, lambda steps: rng.randrange(len(steps)), seed)
    if scheduler == "interactive":
        if choose is None:
            raise ValueError("the interactive scheduler needs a choice callback")
        return _single(c, scheduler, max_steps, choose, seed)
    raise ValueError(f"unknown scheduler {scheduler!r}; choose one of {', '.join(SCHEDULERS)}")


def _single(c: Config, scheduler: str, max_steps: int, pick: Callable, seed) -> Run:
    out = Run(scheduler, c, seed=seed)
    cur = c
    while True:
        steps = enumerate_steps(cur)
        if not steps:
            break
        if len(out.trace) >= max_steps:
            out.step_limit = True
            break
        k = pick(steps)
        if k is None:
            break
        step, cur = steps[k]
        out.trace.append(step)
    out.final = cur
    out.states = len(out.trace) + 1
    out.edges = len(out.trace)
    return out


def _exhaustive(c: Config, max_steps: int) -> Run:
    """Breadth-first search of the reachable configs; `max_steps` bounds the
    number of configs expanded."""
    out = Run("exhaustive", c)
    seen = {c.key()}
    frontier = deque([c])
    expanded = 0
    while frontier:
        if expanded >= max_steps:
            out.step_limit = True
            break
        cur = frontier.popleft()
        expanded += 1
        steps = enumerate_steps(cur)
        if not steps:
            out.terminals.append(cur)
            continue
        for _, nxt in steps:
            out.edges += 1
            k = nxt.key()
            if k not in seen:
                seen.add(k)
                frontier.append(nxt)
    out.states = len(seen)
    out.terminals.sort(key=Config.key)
    return out


def run_program(prog, scheduler: str = "random", seed: "int | None" = None,
                max_steps: int = DEFAULT_MAX_STEPS, choose: "Callable | None" = None) -> Run:
    return run(normalize(prog.main), scheduler, seed, max_steps, choose)


# ---------------------------------------------------------------- metatheory harnesses


def type_config(c: Config, g: Context, memo: "dict | None" = None) -> list[Diagnostic]:
    """Type the threads of a config under `g`, with its definitions in scope."""
    return Checker(memo=memo).proc(c.theta(), g, par(*c.threads))


def _with_new_sessions(g: Context, c: Config) -> Context:
    have = g.sessions()
    for s in c.sessions:
        if s.name not in have:
            g = g + assoc(s.name, s.protocol)
    return g


def _candidates(g: Context, step: Step):
    """Contexts that may type the reduct of `step`, most specific first: the
    context itself for R-+ and R-X, the matching communications for the
    others, then everything within two communication rounds."""
    com = step.com()
    first = [g] if com is None else [h for act, h in com_steps(g) if act == com]
    seen = set()
    for h in first:
        k = state_key(h)
        if k not in seen:
            seen.add(k)
            yield h
    more, _ = reduce_star(g, 2)
    for h in more:
        k = state_key(h)
        if k not in seen:
            seen.add(k)
            yield h


class _Typing:
    """Memoized typing of configs under contexts."""

    def __init__(self):
        self.memo: dict = {}
        self.threads: dict = {}          # per-thread typing shared across configs

    def types(self, c: Config, g: Context) -> bool:
        k = (c.key(), g.key())
        if k not in self.memo:
            self.memo[k] = not type_config(c, g, self.threads)
        return self.memo[k]

    def retype(self, g: Context, step: Step, nxt: Config) -> "Context | None":
        for cand in _candidates(g, step):
            cand = _with_new_sessions(cand, nxt)
            if self.types(nxt, cand):
                return cand
        return None


@dataclass
class HarnessReport:
    states: int = 0
    steps: int = 0
    violations: list = field(default_factory=list)   # (config text, step text, message)
    preconditions: list = field(default_factory=list)
    truncated: bool = False                          # the state cap was hit before the depth

    @property
    def holds(self) -> bool:
        return not self.violations and not self.preconditions


def _explore(prog, depth: int, max_states: int, rep: HarnessReport, record_steps: bool, visit=None) -> None:
    """Breadth-first walk over (config, typing context) pairs to `depth`.

    Each step's reduct is paired with the first candidate context that types
    it; steps with no such context are violations of subject reduction.
    """
    c = normalize(prog.main)
    g = c.context()
    typing = _Typing()
    errs = type_config(c, g)
    if errs:
        rep.preconditions.append("initial configuration does not typecheck: " + errs[0].message)
        return
    seen = {(c.key(), g.key())}
    frontier = deque([(c, g, 0)])
    while frontier:
        cur, h, d = frontier.popleft()
        rep.states += 1
        if visit is not None:
            msg = visit(cur, h, typing)
            if msg:
                rep.violations.append((cur.key(), "", msg))
        if d >= depth:
            continue
        for step, nxt in enumerate_steps(cur):
            rep.steps += 1
            cand = typing.retype(h, step, nxt)
            if cand is None:
                if record_steps:
                    rep.violations.append((cur.key(), str(step), "no reachable context types the reduct"))
                continue
            k = (nxt.key(), cand.key())
            if k in seen:
                continue
            if len(seen) >= max_states:
                rep.truncated = True
                continue
            seen.add(k)
            frontier.append((nxt, cand, d + 1))


def subject_reduction_check(prog, depth: int = 12, max_states: int = 5_000) -> HarnessReport:
    """Every step of every explored state retypes under a context reachable
    from the current one in at most two communication rounds."""
    rep = HarnessReport()
    _explore(prog, depth, max_states, rep, True)
    return rep


def _guard_violations(name: str, params: tuple, body, guards: frozenset = frozenset()) -> list[str]:

    out = []
    if isinstance(body, Call):
        linear = {x for x, t in params if not _end_like(t)}
        for a in body.args:
            if isinstance(a, Var) and a.name in linear and a.name not in guards:
                out.append(f"definition {name}: call {show_process(body)} is not guarded by an action on {a}")
        return out
    if isinstance(body, SendChoice):
        for s in body.sends:
            out += _guard_violations(name, params, s.cont, guards | _subject_names(s.subject))
        return out
    if isinstance(body, Recv):
        for cs in body.cases:
            out += _guard_violations(name, params, cs.cont, guards | _subject_names(body.subject))
        return out
    for ch in children(body):
        out += _guard_violations(name, params, ch, guards)
    return out


def _subject_names(ch) -> frozenset:
    return frozenset({ch.name}) if isinstance(ch, Var) else frozenset()


def _end_like(t) -> bool:

    return isinstance(unfold_star(t), End)


def _def_nodes(p):

    if isinstance(p, Def):
        yield p
    for ch in children(p):
        yield from _def_nodes(ch)


def fidelity_preconditions(prog) -> list[str]:
    """Reasons why a program falls outside the shape session fidelity covers."""

    out = []
    for d in _def_nodes(prog.main):
        out += _guard_violations(d.name, d.params, d.body)
    vs, _, rs = free_names(prog.main)
    if vs or rs:
        out.append("program has free variables")
        return out
    c = normalize(prog.main)
    active = [s for s in c.sessions
              if not all(isinstance(unfold_star(t), End) for _, t in s.protocol.entries)]
    if len(active) > 1:
        out.append("more than one restriction has a protocol that is not all end: "
                   + ", ".join(s.name for s in active))
    for t in c.threads:
        for r in _nested_restrictions(t):
            if not all(isinstance(unfold_star(u), End) for _, u in r.protocol.entries):
                out.append(f"nested restriction of {r.session} is not end-typed")
        roles: dict = {}
        for ep in _endpoints_used(t, c):
            roles.setdefault(ep.session, set()).add(ep.role)
        for s, rs_ in sorted(roles.items()):
            if len(rs_) > 1:
                out.append(f"thread {show_process(t)} plays roles {', '.join(sorted(rs_))} in {s}")
    return out


def _nested_restrictions(p):

    if isinstance(p, Restrict):
        yield p
    for ch in children(p):
        yield from _nested_restrictions(ch)


def _endpoints_used(t, c: Config) -> set:

    _, eps, _ = free_names(t)
    return {e for e in eps if any(s.name == e.session for s in c.sessions)}


def _admin_closure(c: Config, limit: int = 8):
    """Configs reachable by R-+ and R-X steps alone, nearest first."""
    seen = {c.key()}
    frontier = deque([(0, c)])
    while frontier:
        n, cur = frontier.popleft()
        yield cur
        if n >= limit:
            continue
        for step, nxt in enumerate_steps(cur):
            if step.com() is None and nxt.key() not in seen:
                seen.add(nxt.key())
                frontier.append((n + 1, nxt))


def fidelity_at(c: Config, g: Context, typing: "_Typing | None" = None) -> "str | None":
    """None when the process matches some communication of `g`, else a message."""
    succs = com_steps(g)
    if not succs:
        return None
    typing = typing or _Typing()
    for cur in _admin_closure(c):
        for step, nxt in enumerate_steps(cur):
            com = step.com()
            if com is None:
                continue
            for act, h in succs:
                if act == com and typing.types(nxt, _with_new_sessions(h, nxt)):
                    return None
    acts = ", ".join(sorted({str(a) for a, _ in succs}))
    return f"context can perform {acts} but the process matches none of them"


def fidelity_check(prog, depth: int = 12, max_states: int = 5_000) -> HarnessReport:
    """Session fidelity over the states explored to `depth`; programs outside
    the single-role shape are reported as precondition violations."""
    rep = HarnessReport()
    rep.preconditions = fidelity_preconditions(prog)
    if rep.preconditions:
        return rep
    _explore(prog, depth, max_states, rep, False, fidelity_at)
    return rep


__all__ = [
    "Config", "Session", "Step", "Run", "HarnessReport", "ClosedError", "DEFAULT_MAX_STEPS", "SCHEDULERS",
    "normalize", "enumerate_steps", "run", "run_program", "blocked_threads", "show_config",
    "type_config", "subject_reduction_check", "fidelity_preconditions", "fidelity_at", "fidelity_check",
]
