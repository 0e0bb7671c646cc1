"""Typechecking of values and processes against typing contexts.

The checker is syntax directed.  The only search it performs is over the
ways of splitting a context among parallel threads (driven by the channels
each thread mentions) and over which parallel component of a channel's
runtime type a prefix acts on.

Every restriction checks its protocol against the configured property
(safety, deadlock freedom or termination) over the behavioural set.  When
that set exceeds the budget the overall verdict becomes ``unknown`` unless
some other rule already failed.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

from .context import Context, sub_multisets, assoc, chan_key
from .diagnostics import Diagnostic
from .safety import check_property, default_budget
from .subtype import is_subtype, unfold_star
from .syntax import (
    Branch, Call, Def, End, Endpoint, Ground, Inact, Lit, Par, Restrict, Recv, Role, Runtime,
    Select, SendChoice, Var, fresh, free_channels, rename_session, runtime, subst_proc,
    subst_roles, threads_of,
)


@dataclass
class Verdict:
    status: str                                   # "ok" | "fail" | "unknown"
    diagnostics: list = field(default_factory=list)
    summary: Counter = field(default_factory=Counter)   # rule name -> applications
    properties: list = field(default_factory=list)     # (session, protocol, PropertyVerdict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _d(rule: str, msg: str, pos=None) -> Diagnostic:
    return Diagnostic(msg, pos, rule)


def _replace(u: Runtime, i: int, new) -> Runtime:
    comps = list(u.components)
    del comps[i]
    return runtime(*comps, new)


def _non_end(g: Context, skip=None) -> list:
    out = []
    for c, u in g.chans:
        if c == skip:
            continue
        if any(not _is_end(t) for t in u.components):
            out.append(f"{c}: {u}")
    return out


def _is_end(t) -> bool:
    return isinstance(unfold_star(t), End)


class Checker:
    def __init__(self, prop: str = "safety", budget: "int | None" = None, memo: "dict | None" = None):
        self.prop = prop
        self.memo = {} if memo is None else memo     # (theta, context, thread) -> errors
        self.budget = budget or default_budget()
        self.rules: Counter = Counter()
        self.unknown: list[Diagnostic] = []
        self.properties: list = []

    # ------------------------------------------------------------ values
    def value(self, g: Context, v, expected, pos=None) -> tuple[list, Context]:
        """Type one payload value; returns (errors, context without consumed channels)."""
        if isinstance(expected, Role):
            if not isinstance(v, Role) or v != expected:
                return [_d("T-q" if not expected.var else "T-α",
                           f"value {v} does not have singleton type {expected}", pos)], g
            if v.var and v.name not in g.roles:
                return [_d("T-α", f"role variable {v} unbound", pos)], g
            self.rules["T-α" if v.var else "T-q"] += 1
            return [], g
        if isinstance(expected, Ground):
            if isinstance(v, Lit) and v.kind == expected.name:
                return [], g
            if isinstance(v, Var) and g.ground(v.name) == expected:
                return [], g
            return [_d("T-val", f"value {v} is not of type {expected}", pos)], g
        if not isinstance(v, (Endpoint, Var)):
            return [_d("T-Sub", f"value {v} is not a channel of type {expected}", pos)], g
        u = g.get(v)
        if u is None:
            return [_d("T-Sub", f"channel {v} is not in the context", pos)], g
        if not is_subtype(u, expected):
            return [_d("T-Sub", f"channel type mismatch: {v} : {u} is not a subtype of {expected}", pos)], g
        self.rules["T-Sub"] += 1
        return [], g.without(v)

    # ------------------------------------------------------------ processes
    def proc(self, theta: dict, g: Context, p) -> list[Diagnostic]:
        if isinstance(p, Inact):
            self.rules["T-0"] += 1
            left = _non_end(g)
            if left:
                return [_d("T-0", "inaction with unused linear channels " + ", ".join(left), p.pos)]
            return []
        if isinstance(p, Par):
            return self.par(theta, g, p)
        if isinstance(p, Restrict):
            return self.restrict(theta, g, p)
        if isinstance(p, SendChoice):
            if len(p.sends) > 1:
                self.rules["T-+"] += 1
            errs = []
            for s in p.sends:
                errs += self.send(theta, g, s, s.pos or p.pos)
            return errs
        if isinstance(p, Recv):
            return self.replicated(theta, g, p) if p.replicated else self.branch(theta, g, p)
        if isinstance(p, Def):
            return self.define(theta, g, p)
        if isinstance(p, Call):
            return self.call(theta, g, p)
        raise TypeError(f"not a process: {p!r}")

    def par(self, theta, g, p) -> list[Diagnostic]:
        """T-| over all threads at once.

        Threads claim the components of shared channels one thread at a time
        and each claim is typed straight away, so a bad claim prunes every
        split that extends it.  End-typed channels are copied to every thread
        that mentions them; unmentioned end-typed channels are weakened away.
        """
        threads = threads_of(p)
        if len(threads) <= 1:
            return self.proc(theta, g, threads[0] if threads else Inact(pos=p.pos))
        self.rules["T-|"] += 1
        demands = [free_channels(t) for t in threads]
        fixed = [[] for _ in threads]           # entries each thread receives whole
        shared = []                             # (channel, components, demanding threads)
        for c, u in g.chans:
            who = [i for i, d in enumerate(demands) if c in d]
            if not who:
                if not all(_is_end(t) for t in u.components):
                    return [_d("T-|", f"linear channel {c} : {u} is not used", p.pos)]
            elif len(who) == 1 or all(_is_end(t) for t in u.components):
                for i in who:
                    fixed[i].append((c, u))
            elif len(u.components) < len(who):
                return [_d("T-|", f"linear channel {c} : {u} used by {len(who)} parallel threads", p.pos)]
            else:
                shared.append((c, u.components, who))
        tk = tuple(sorted(theta.items()))
        best: list = [None, -1]                 # deepest failure seen: errors, thread index

        def claims(i, remaining):
            """Component choices of thread i for every shared channel it uses."""
            per = []
            for k, (c, _, who) in enumerate(shared):
                if i not in who:
                    continue
                left = remaining[k]
                later = sum(1 for j in who if j > i)
                if later == 0:
                    per.append([(k, tuple(left), ())])
                    continue
                opts = []
                for chosen, rest in sub_multisets(left):
                    if chosen and len(rest) >= later:
                        opts.append((k, tuple(chosen), tuple(rest)))
                per.append(opts)
            return itertools.product(*per)

        def go(i, remaining) -> bool:
            if i == len(threads):
                return True
            for choice in claims(i, remaining):
                part = list(fixed[i])
                nxt = list(remaining)
                for k, chosen, rest in choice:
                    part.append((shared[k][0], runtime(*chosen)))
                    nxt[k] = rest
                gi = Context(tuple(sorted(part, key=lambda e: chan_key(e[0]))), g.roles, g.grounds)
                errs = self._memo_proc(tk, theta, gi, threads[i])
                if errs:
                    if i > best[1] or best[0] is None:
                        best[0], best[1] = errs, i
                    continue
                if go(i + 1, nxt):
                    return True
            return False

        if go(0, [comps for _, comps, _ in shared]):
            return []
        return best[0] or [_d("T-|", "no way to split the context among the parallel threads", p.pos)]

    def _memo_proc(self, tk, theta, g, t) -> list[Diagnostic]:
        if self.memo is None:
            return self.proc(theta, g, t)
        key = (tk, g.key(), t)
        if key not in self.memo:
            self.memo[key] = self.proc(theta, g, t)
        return self.memo[key]

    def restrict(self, theta, g, p: Restrict) -> list[Diagnostic]:
        self.rules["T-ν"] += 1
        s, body = p.session, p.body
        if s in g.sessions():
            new = fresh(s)
            body, s = rename_session(body, s, new), new
        local = assoc(s, p.protocol)
        name = p.name or "inline protocol"
        v = check_property(local, self.prop, self.budget)
        self.properties.append((s, name, v))
        errs = []
        if v.holds is False:
            errs.append(_d("T-ν", f"protocol {name} is not {self.prop}: [{v.condition}] {v.message}", p.pos))
        elif v.holds is None:
            self.unknown.append(_d("T-ν", f"cannot decide {self.prop} for protocol {name}: {v.message}", p.pos))
        return errs + self.proc(theta, g + local, body)

    def send(self, theta, g, s, pos) -> list[Diagnostic]:
        u = g.get(s.subject)
        if u is None:
            return [_d("T-⊕", f"channel {s.subject} is not in the context", pos)]
        if s.to.var and s.to.name not in g.roles:
            return [_d("T-⊕", f"send to unbound role variable {s.to}", pos)]
        best = None
        for i, comp in enumerate(u.components):
            t = unfold_star(comp)
            if not isinstance(t, Select):
                continue
            o = t.option(s.to, s.label)
            if o is None:
                continue
            if len(o.payloads) != len(s.payloads):
                errs = [_d("T-⊕", f"{s.label} carries {len(o.payloads)} payloads, sent {len(s.payloads)}", pos)]
            else:
                ctx = g.with_chan(s.subject, _replace(u, i, o.cont))
                errs = []
                for v, pt in zip(s.payloads, o.payloads):
                    e, ctx = self.value(ctx, v, pt, pos)
                    errs += e
                if not errs:
                    errs = self.proc(theta, ctx, s.cont)
            if not errs:
                self.rules["T-⊕"] += 1
                return []
            if best is None or len(errs) < len(best):
                best = errs
        return best or [_d("T-⊕", f"{s.subject} : {u} has no output {s.to} ! {s.label}", pos)]

    def _case(self, theta, ctx: Context, subject, rest: Runtime, tc, pc, rename: dict, pos, rule):
        if len(tc.payloads) != len(pc.binders):
            return [_d(rule, f"label {tc.label} carries {len(tc.payloads)} payloads, "
                             f"the receive binds {len(pc.binders)}", pos)]
        rename = dict(rename)
        cont = pc.cont
        binds = []
        for b, pt in zip(pc.binders, tc.payloads):
            if isinstance(b, Role):
                if isinstance(pt, Role) and pt.var:
                    rename[pt.name] = Role(b.name, True)
                    ctx = ctx.insert_role(b)
                elif isinstance(pt, Role):
                    cont = subst_proc(cont, roles={b.name: pt})
                else:
                    return [_d(rule, f"binder {b} receives {pt}, not a role", pos)]
            elif isinstance(pt, Role):
                return [_d(rule, f"binder {b} receives role {pt}; bind it with @{b}", pos)]
            elif isinstance(pt, Ground):
                ctx = ctx.with_ground(b.name, pt)
            else:
                binds.append((Var(b.name), pt))
        for x, pt in binds:
            old = ctx.get(x)
            if old is not None and any(not _is_end(t) for t in old.components):
                return [_d(rule, f"binder {x} shadows a linear channel", pos)]
            ctx = ctx.with_chan(x, subst_roles(pt, rename))
        ctx = ctx.with_chan(subject, runtime(rest, subst_roles(tc.cont, rename)))
        return self.proc(theta, ctx, cont)

    def branch(self, theta, g, p: Recv) -> list[Diagnostic]:
        u = g.get(p.subject)
        if u is None:
            return [_d("T-&", f"channel {p.subject} is not in the context", p.pos)]
        if p.frm.var and p.frm.name not in g.roles:
            return [_d("T-&", f"receive from unbound role variable {p.frm}", p.pos)]
        best = None
        for i, comp in enumerate(u.components):
            t = unfold_star(comp)
            if not isinstance(t, Branch) or t.replicated or t.frm != p.frm:
                continue
            rest = Runtime(u.components[:i] + u.components[i + 1:])
            errs = []
            for tc in t.cases:
                pc = p.case(tc.label)
                if pc is None:
                    errs.append(_d("T-&", f"receive on {p.subject} lacks label {tc.label}", p.pos))
                    continue
                errs += self._case(theta, g, p.subject, rest, tc, pc, {}, p.pos, "T-&")
            if not errs:
                self.rules["T-&"] += 1
                return []
            if best is None or len(errs) < len(best):
                best = errs
        return best or [_d("T-&", f"{p.subject} : {u} has no input from {p.frm}", p.pos)]

    def replicated(self, theta, g, p: Recv) -> list[Diagnostic]:
        u = g.get(p.subject)
        if u is None:
            return [_d("T-!", f"channel {p.subject} is not in the context", p.pos)]
        if not p.binds and p.frm.var and p.frm.name not in g.roles:
            return [_d("T-!", f"receive from unbound role variable {p.frm}", p.pos)]
        t = unfold_star(u.single) if u.single is not None else None
        if not (isinstance(t, Branch) and t.replicated and t.binds == p.binds
                and (p.binds or t.frm == p.frm)):
            return [_d("T-!", f"{p.subject} : {u} is not a matching replicated input from {p.frm}", p.pos)]
        left = _non_end(g, skip=p.subject)
        if left:
            return [_d("T-!", "replicated receive needs an end-typed context, but has " + ", ".join(left), p.pos)]
        rename = {t.frm.name: Role(p.frm.name, True)} if p.binds else {}
        base = g.insert_role(p.frm) if p.binds else g
        errs = []
        for tc in t.cases:
            pc = p.case(tc.label)
            if pc is None:
                errs.append(_d("T-!", f"replicated receive on {p.subject} lacks label {tc.label}", p.pos))
                continue
            errs += self._case(theta, base, p.subject, Runtime(()), tc, pc, rename, p.pos, "T-!")
        if not errs:
            self.rules["T-!"] += 1
        return errs

    def define(self, theta, g, p: Def) -> list[Diagnostic]:
        self.rules["T-Def"] += 1
        inner = {**theta, p.name: p.params}
        ctx = g.shared_only() + Context.make((Var(x), t) for x, t in p.params)
        errs = self.proc(inner, ctx, p.body)
        return errs + self.proc(inner, g, p.scope)

    def call(self, theta, g, p: Call) -> list[Diagnostic]:
        sig = theta.get(p.name)
        if sig is None:
            return [_d("T-Call", f"call to undeclared process {p.name}", p.pos)]
        if len(sig) != len(p.args):
            return [_d("T-Call", f"{p.name} expects {len(sig)} arguments, got {len(p.args)}", p.pos)]
        if len(set(p.args)) != len(p.args):
            return [_d("T-Call", f"the same channel is passed twice to {p.name}", p.pos)]
        errs = []
        for a, (x, t) in zip(p.args, sig):
            u = g.get(a)
            if u is None:
                errs.append(_d("T-Call", f"channel {a} is not in the context", p.pos))
            elif not is_subtype(u, t):
                errs.append(_d("T-Call", f"argument {a} : {u} is not a subtype of {x} : {t}", p.pos))
        rest = g
        for a in p.args:
            rest = rest.without(a)
        left = _non_end(rest)
        if left:
            errs.append(_d("T-Call", "call leaves unused linear channels " + ", ".join(left), p.pos))
        if not errs:
            self.rules["T-Call"] += 1
        return errs


def _verdict(ch: Checker, errs: list) -> Verdict:
    status = "fail" if errs else ("unknown" if ch.unknown else "ok")
    diags = errs if errs else ch.unknown
    return Verdict(status, diags, ch.rules, ch.properties)


def type_value(g: Context, v, expected) -> Verdict:
    ch = Checker()
    errs, rest = ch.value(g, v, expected)
    if not errs:
        left = _non_end(rest)
        if left:
            errs = [_d("T-Wkn", "linear leftover " + ", ".join(left))]
    return _verdict(ch, errs)


def type_process(theta: dict, g: Context, p, prop: str = "safety", budget: "int | None" = None) -> Verdict:
    ch = Checker(prop, budget)
    return _verdict(ch, ch.proc(dict(theta), g, p))


def typecheck_program(prog, prop: str = "safety", budget: "int | None" = None) -> Verdict:
    """Typecheck `main`, then check every declared protocol it never restricts.

    The second pass lets a file with an inert `main` still ask whether a
    protocol satisfies the property on its own.
    """
    ch = Checker(prop, budget)
    errs = ch.proc({}, Context(), prog.main)
    used = {name for _, name, _ in ch.properties}
    for name, proto in prog.protocols.items():
        if name in used:
            continue
        v = check_property(assoc("s", proto), prop, budget)
        ch.properties.append(("s", name, v))
        if v.holds is False:
            errs.append(_d("T-ν", f"protocol {name} is not {prop}: [{v.condition}] {v.message}"))
        elif v.holds is None:
            ch.unknown.append(_d("T-ν", f"cannot decide {prop} for protocol {name}: {v.message}"))
    return _verdict(ch, errs)
