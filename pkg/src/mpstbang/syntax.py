"""Terms of the calculus: roles, channels, values, session types and processes.

Every node is an immutable dataclass that caches its structural hash, so
terms can be used freely as dictionary keys during state-space exploration.
The binding-aware helpers that every other module needs (free role
variables, role and recursion substitution, alpha-invariant keys) live here
too.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Union


def _node(cls):
    cls = dataclass(frozen=True)(cls)
    structural_hash = cls.__hash__

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = structural_hash(self)
            object.__setattr__(self, "_hash", h)
            return h

    cls.__hash__ = __hash__
    return cls


_counter = itertools.count()


def fresh(base: str) -> str:
    """A name that cannot clash with anything written in source text."""
    stem = base.split("_", 1)[0] if "_" in base and base.rsplit("_", 1)[-1].isdigit() else base
    return f"{stem}_{next(_counter)}"


Pos = Union[tuple, None]


def _pos():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- roles, values


@_node
class Role:
    name: str
    var: bool = False

    def __str__(self):
        return "@" + self.name if self.var else self.name


def role(name: str) -> Role:
    if name.startswith("@"):
        return Role(name[1:], True)
    return Role(name)


@_node
class Endpoint:
    session: str
    role: str

    def __str__(self):
        return f"{self.session}[{self.role}]"


@_node
class Var:
    name: str

    def __str__(self):
        return self.name


Channel = Union[Endpoint, Var]


@_node
class Lit:
    value: object
    kind: str

    def __str__(self):
        if self.kind == "bool":
            return "true" if self.value else "false"
        if self.kind == "str":
            return json.dumps(self.value, ensure_ascii=False)
        return str(self.value)


def lit(value) -> Lit:
    if isinstance(value, bool):
        return Lit(value, "bool")
    if isinstance(value, int):
        return Lit(value, "int")
    if isinstance(value, str):
        return Lit(value, "str")
    raise TypeError(f"no ground type for {value!r}")


Value = Union[Endpoint, Var, Role, Lit]


# ---------------------------------------------------------------- session types


@_node
class Ground:
    name: str

    def __str__(self):
        return self.name


GROUND_TYPES = ("int", "str", "bool")


class _Printable:
    def __str__(self):
        from .printer import show

        return show(self)


@_node
class End(_Printable):
    pass


@_node
class RecBind(_Printable):
    var: str
    body: "SType"


@_node
class RecVar(_Printable):
    name: str


@_node
class Case(_Printable):
    label: str
    payloads: tuple
    cont: "SType"

    def binders(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.payloads if isinstance(p, Role) and p.var)


@_node
class Branch(_Printable):
    frm: Role
    cases: tuple
    replicated: bool = False
    binds: bool = False

    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.cases)

    def case(self, label: str) -> "Case | None":
        for c in self.cases:
            if c.label == label:
                return c
        return None


@_node
class Option(_Printable):
    to: Role
    label: str
    payloads: tuple
    cont: "SType"


@_node
class Select(_Printable):
    options: tuple

    def option(self, to: Role, label: str) -> "Option | None":
        for o in self.options:
            if o.to == to and o.label == label:
                return o
        return None


SType = Union[End, RecBind, RecVar, Branch, Select]
Payload = Union[End, RecBind, RecVar, Branch, Select, Role, Ground]
STYPES = (End, RecBind, RecVar, Branch, Select)
END = End()


def branch(frm: Role, cases: Iterable[Case], replicated: bool = False) -> Branch:
    """Build a branch; a replicated branch on a role variable binds it."""
    return Branch(frm, tuple(cases), replicated, replicated and frm.var)


@_node
class Runtime(_Printable):
    """Parallel composition of session types, kept flat, end-free and sorted."""

    components: tuple

    @property
    def single(self) -> "SType | None":
        return self.components[0] if len(self.components) == 1 else None


def runtime(*parts) -> Runtime:
    comps = []
    for p in parts:
        if isinstance(p, Runtime):
            comps.extend(p.components)
        elif not isinstance(p, End):
            comps.append(p)
    comps.sort(key=_component_order)
    return Runtime(tuple(comps))


def _component_order(t) -> tuple:
    # alpha-equivalent components share a key; the printed form breaks the tie
    from .printer import show_type

    return type_key(t), show_type(t)


# ---------------------------------------------------------------- protocols


@_node
class Protocol(_Printable):
    entries: tuple
    pos: Pos = _pos()

    def __getitem__(self, r: str) -> SType:
        for name, t in self.entries:
            if name == r:
                return t
        raise KeyError(r)

    def __contains__(self, r: str) -> bool:
        return any(name == r for name, _ in self.entries)

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)


def protocol(mapping: Mapping[str, SType] | Iterable) -> Protocol:
    items = mapping.items() if isinstance(mapping, Mapping) else mapping
    return Protocol(tuple(items))


# ---------------------------------------------------------------- processes


@_node
class Inact(_Printable):
    pos: Pos = _pos()


@_node
class Par(_Printable):
    left: "Process"
    right: "Process"
    pos: Pos = _pos()


@_node
class Restrict(_Printable):
    session: str
    protocol: Protocol
    body: "Process"
    name: "str | None" = None
    pos: Pos = _pos()


@_node
class Send(_Printable):
    subject: Channel
    to: Role
    label: str
    payloads: tuple
    cont: "Process"
    pos: Pos = _pos()


@_node
class SendChoice(_Printable):
    sends: tuple
    pos: Pos = _pos()


@_node
class RecvCase(_Printable):
    label: str
    binders: tuple
    cont: "Process"


@_node
class Recv(_Printable):
    subject: Channel
    frm: Role
    cases: tuple
    replicated: bool = False
    binds: bool = False
    pos: Pos = _pos()

    def case(self, label: str) -> "RecvCase | None":
        for c in self.cases:
            if c.label == label:
                return c
        return None


@_node
class Def(_Printable):
    name: str
    params: tuple
    body: "Process"
    scope: "Process"
    pos: Pos = _pos()


@_node
class Call(_Printable):
    name: str
    args: tuple
    pos: Pos = _pos()


Process = Union[Inact, Par, Restrict, SendChoice, Recv, Def, Call]


def send(subject, to, label, payloads=(), cont=None, pos=None) -> SendChoice:
    return SendChoice((Send(subject, to, label, tuple(payloads), cont or Inact()),), pos=pos)


def par(*procs) -> "Process":
    procs = [p for p in procs if not isinstance(p, Inact)]
    if not procs:
        return Inact()
    out = procs[-1]
    for p in reversed(procs[:-1]):
        out = Par(p, out)
    return out


def threads_of(p: "Process") -> list:
    if isinstance(p, Par):
        return threads_of(p.left) + threads_of(p.right)
    if isinstance(p, Inact):
        return []
    return [p]


# ---------------------------------------------------------------- type keys


@lru_cache(maxsize=None)
def type_key(t) -> str:
    """Alpha-invariant rendering: bound names become binder distances."""
    return _key(t, (), ())


def _key(t, recs: tuple, roles: tuple) -> str:
    if isinstance(t, End):
        return "end"
    if isinstance(t, RecVar):
        if t.name in recs:
            return f"%{recs[::-1].index(t.name)}"
        return t.name
    if isinstance(t, RecBind):
        return f"rec.{_key(t.body, recs + (t.var,), roles)}"
    if isinstance(t, Role):
        return _role_key(t, roles)
    if isinstance(t, Ground):
        return t.name
    if isinstance(t, Runtime):
        return " || ".join(_key(c, recs, roles) for c in t.components) or "end"
    if isinstance(t, Branch):
        inner = roles + (t.frm.name,) if t.binds else roles
        head = ("!" if t.replicated else "") + ("#" if t.binds else _role_key(t.frm, roles))
        cases = []
        for c in t.cases:
            pays = ",".join(_key(p, recs, roles) if not _is_rolevar(p) else "#" for p in c.payloads)
            cases.append(f"{c.label}({pays}).{_key(c.cont, recs, inner + c.binders())}")
        return head + "&{" + ",".join(sorted(cases)) + "}"
    if isinstance(t, Select):
        opts = []
        for o in t.options:
            pays = ",".join(_key(p, recs, roles) for p in o.payloads)
            opts.append(f"{_role_key(o.to, roles)} {o.label}({pays}).{_key(o.cont, recs, roles)}")
        return "+{" + ",".join(sorted(opts)) + "}"
    raise TypeError(f"not a type: {t!r}")


def _is_rolevar(p) -> bool:
    return isinstance(p, Role) and p.var


def _role_key(r: Role, roles: tuple) -> str:
    if not r.var:
        return r.name
    if r.name in roles:
        return f"#{roles[::-1].index(r.name)}"
    return "@" + r.name


# ---------------------------------------------------------------- free names


@lru_cache(maxsize=None)
def frv(t) -> frozenset:
    """Free role-variable names of a type, payload or runtime type."""
    if isinstance(t, Role):
        return frozenset([t.name]) if t.var else frozenset()
    if isinstance(t, (End, RecVar, Ground)):
        return frozenset()
    if isinstance(t, RecBind):
        return frv(t.body)
    if isinstance(t, Runtime):
        return frozenset().union(*map(frv, t.components))
    if isinstance(t, Branch):
        out = set()
        for c in t.cases:
            for p in c.payloads:
                if not _is_rolevar(p):
                    out |= frv(p)
            out |= frv(c.cont) - set(c.binders())
        if t.binds:
            out.discard(t.frm.name)
        elif t.frm.var:
            out.add(t.frm.name)
        return frozenset(out)
    if isinstance(t, Select):
        out = set()
        for o in t.options:
            out |= frv(o.to)
            for p in o.payloads:
                out |= frv(p)
            out |= frv(o.cont)
        return frozenset(out)
    raise TypeError(f"not a type: {t!r}")


@lru_cache(maxsize=None)
def free_recvars(t) -> frozenset:
    if isinstance(t, RecVar):
        return frozenset([t.name])
    if isinstance(t, (End, Role, Ground)):
        return frozenset()
    if isinstance(t, RecBind):
        return free_recvars(t.body) - {t.var}
    if isinstance(t, Branch):
        parts = [free_recvars(c.cont) for c in t.cases]
        parts += [free_recvars(p) for c in t.cases for p in c.payloads]
        return frozenset().union(*parts)
    if isinstance(t, Select):
        parts = [free_recvars(o.cont) for o in t.options]
        parts += [free_recvars(p) for o in t.options for p in o.payloads]
        return frozenset().union(*parts)
    if isinstance(t, Runtime):
        return frozenset().union(*map(free_recvars, t.components))
    raise TypeError(f"not a type: {t!r}")


# ---------------------------------------------------------------- substitution


def subst_roles(t, m: Mapping[str, Role]):
    """Capture-avoiding replacement of free role variables (by name)."""
    if not m:
        return t
    if isinstance(t, Runtime):
        return runtime(*(subst_roles(c, m) for c in t.components))
    live = {k: v for k, v in m.items() if k in frv(t)}
    if not live:
        return t
    return _subst_roles(t, live)


def _subst_roles(t, m):
    if isinstance(t, Role):
        return m.get(t.name, t) if t.var else t
    if isinstance(t, (End, RecVar, Ground)):
        return t
    if isinstance(t, RecBind):
        return RecBind(t.var, subst_roles(t.body, m))
    if isinstance(t, Select):
        return Select(tuple(
            Option(_subst_roles(o.to, m), o.label,
                   tuple(subst_roles(p, m) for p in o.payloads), subst_roles(o.cont, m))
            for o in t.options))
    if isinstance(t, Branch):
        frm = t.frm
        inner = dict(m)
        rename = {}
        if t.binds:
            inner.pop(frm.name, None)
            if _captures(frm.name, inner):
                new = fresh(frm.name)
                rename[frm.name] = Role(new, True)
                frm = Role(new, True)
        else:
            frm = _subst_roles(frm, m)
        cases = []
        for c in t.cases:
            cm = {k: v for k, v in inner.items() if k not in c.binders()}
            crename = dict(rename)
            pays = []
            for p in c.payloads:
                if _is_rolevar(p):
                    if _captures(p.name, cm):
                        new = Role(fresh(p.name), True)
                        crename[p.name] = new
                        pays.append(new)
                    else:
                        crename.pop(p.name, None)
                        pays.append(p)
                else:
                    pays.append(subst_roles(subst_roles(p, rename), inner))
            cont = subst_roles(c.cont, crename) if crename else c.cont
            cases.append(Case(c.label, tuple(pays), subst_roles(cont, cm)))
        return Branch(frm, tuple(cases), t.replicated, t.binds)
    raise TypeError(f"not a type: {t!r}")


def _captures(name: str, m: Mapping[str, Role]) -> bool:
    return any(v.var and v.name == name for v in m.values())


def subst_rec(t, var: str, repl):
    """Replace free occurrences of recursion variable `var` with `repl`."""
    if var not in free_recvars(t):
        return t
    if isinstance(t, RecVar):
        return repl
    if isinstance(t, RecBind):
        if t.var == var:
            return t
        if t.var in free_recvars(repl):
            new = fresh(t.var)
            body = subst_rec(t.body, t.var, RecVar(new))
            return RecBind(new, subst_rec(body, var, repl))
        return RecBind(t.var, subst_rec(t.body, var, repl))
    if isinstance(t, Select):
        return Select(tuple(
            Option(o.to, o.label, tuple(subst_rec(p, var, repl) if not isinstance(p, (Role, Ground)) else p
                                        for p in o.payloads), subst_rec(o.cont, var, repl))
            for o in t.options))
    if isinstance(t, Branch):
        danger = frv(repl)
        frm = t.frm
        shift = {}
        if t.binds and frm.name in danger:
            frm = Role(fresh(frm.name), True)
            shift[t.frm.name] = frm
        cases = []
        for c in t.cases:
            cshift = dict(shift)
            pays = []
            for p in c.payloads:
                if _is_rolevar(p):
                    if p.name in danger:
                        q = Role(fresh(p.name), True)
                        cshift[p.name] = q
                        pays.append(q)
                    else:
                        cshift.pop(p.name, None)
                        pays.append(p)
                elif isinstance(p, (Role, Ground)):
                    pays.append(p)
                else:
                    pays.append(subst_rec(p, var, repl))
            cont = subst_roles(c.cont, cshift) if cshift else c.cont
            cases.append(Case(c.label, tuple(pays), subst_rec(cont, var, repl)))
        return Branch(frm, tuple(cases), t.replicated, t.binds)
    return t


def rename_binders_apart(t, avoid: frozenset):
    """Rename role binders of a top-level branch that clash with `avoid`."""
    if not isinstance(t, Branch):
        return t
    m = {}
    frm = t.frm
    if t.binds and frm.name in avoid:
        frm = Role(fresh(frm.name), True)
        m[t.frm.name] = frm
    cases = []
    for c in t.cases:
        cm = dict(m)
        pays = []
        for p in c.payloads:
            if _is_rolevar(p) and p.name in avoid:
                q = Role(fresh(p.name), True)
                cm[p.name] = q
                pays.append(q)
            else:
                if _is_rolevar(p):
                    cm.pop(p.name, None)
                pays.append(p)
        cases.append(Case(c.label, tuple(pays), subst_roles(c.cont, cm)))
    return Branch(frm, tuple(cases), t.replicated, t.binds)


# ---------------------------------------------------------------- processes: names


def free_names(p) -> tuple[frozenset, frozenset, frozenset]:
    """(free channel variables, free endpoints, free role variables) of a process."""
    return _free(p)


@lru_cache(maxsize=None)
def _free(p):
    if isinstance(p, (Inact,)):
        return frozenset(), frozenset(), frozenset()
    if isinstance(p, Par):
        a, b = _free(p.left), _free(p.right)
        return a[0] | b[0], a[1] | b[1], a[2] | b[2]
    if isinstance(p, Restrict):
        vs, eps, rs = _free(p.body)
        return vs, frozenset(e for e in eps if e.session != p.session), rs
    if isinstance(p, Call):
        vs, eps = _split_vals(p.args)
        return vs, eps, frozenset()
    if isinstance(p, SendChoice):
        acc = [frozenset(), frozenset(), frozenset()]
        for s in p.sends:
            vs, eps = _split_vals((s.subject,) + s.payloads)
            rs = frozenset(v.name for v in (s.to,) + s.payloads if isinstance(v, Role) and v.var)
            c = _free(s.cont)
            acc = [acc[0] | vs | c[0], acc[1] | eps | c[1], acc[2] | rs | c[2]]
        return tuple(acc)
    if isinstance(p, Recv):
        vs, eps = _split_vals((p.subject,))
        rs = set() if p.binds else ({p.frm.name} if p.frm.var else set())
        vs, eps = set(vs), set(eps)
        for c in p.cases:
            cv, ce, cr = _free(c.cont)
            bound_v = {b.name for b in c.binders if isinstance(b, Var)}
            bound_r = {b.name for b in c.binders if isinstance(b, Role)}
            if p.binds:
                bound_r.add(p.frm.name)
            vs |= cv - bound_v
            eps |= ce
            rs |= cr - bound_r
        return frozenset(vs), frozenset(eps), frozenset(rs)
    if isinstance(p, Def):
        bv, be, br = _free(p.body)
        sv, se, sr = _free(p.scope)
        pr = frozenset().union(*(frv(t) for _, t in p.params)) if p.params else frozenset()
        return (bv - {x for x, _ in p.params}) | sv, be | se, br | sr | pr
    raise TypeError(f"not a process: {p!r}")


def _split_vals(vals):
    vs = frozenset(v.name for v in vals if isinstance(v, Var))
    eps = frozenset(v for v in vals if isinstance(v, Endpoint))
    return vs, eps


def free_channels(p) -> frozenset:
    vs, eps, _ = _free(p)
    return frozenset(Var(v) for v in vs) | eps


def sessions_bound(p) -> set:
    out = set()
    if isinstance(p, Restrict):
        out.add(p.session)
    for child in children(p):
        out |= sessions_bound(child)
    return out


def children(p) -> list:
    if isinstance(p, Par):
        return [p.left, p.right]
    if isinstance(p, Restrict):
        return [p.body]
    if isinstance(p, SendChoice):
        return [s.cont for s in p.sends]
    if isinstance(p, Recv):
        return [c.cont for c in p.cases]
    if isinstance(p, Def):
        return [p.body, p.scope]
    return []


def subst_proc(p, values: Mapping[str, Value] | None = None, roles: Mapping[str, Role] | None = None):
    """Substitute values for channel variables and roles for role variables."""
    values = dict(values or {})
    roles = dict(roles or {})
    if not values and not roles:
        return p
    fv, _, fr = _free(p)
    values = {k: v for k, v in values.items() if k in fv}
    roles = {k: v for k, v in roles.items() if k in fr}
    if not values and not roles:
        return p
    return _subst_proc(p, values, roles)


def _sv(v, values, roles):
    if isinstance(v, Var):
        return values.get(v.name, v)
    if isinstance(v, Role) and v.var:
        return roles.get(v.name, v)
    return v


def _subst_proc(p, values, roles):
    if isinstance(p, Par):
        return Par(subst_proc(p.left, values, roles), subst_proc(p.right, values, roles), pos=p.pos)
    if isinstance(p, Restrict):
        s = p.session
        body = p.body
        if any(isinstance(v, Endpoint) and v.session == s for v in values.values()):
            new = fresh(s)
            body = rename_session(body, s, new)
            s = new
        return Restrict(s, p.protocol, subst_proc(body, values, roles), p.name, pos=p.pos)
    if isinstance(p, Call):
        return Call(p.name, tuple(_sv(a, values, roles) for a in p.args), pos=p.pos)
    if isinstance(p, SendChoice):
        return SendChoice(tuple(
            Send(_sv(s.subject, values, roles), _sv(s.to, values, roles), s.label,
                 tuple(_sv(v, values, roles) for v in s.payloads),
                 subst_proc(s.cont, values, roles), pos=s.pos)
            for s in p.sends), pos=p.pos)
    if isinstance(p, Recv):
        rs = dict(roles)
        frm = p.frm
        if p.binds:
            rs.pop(frm.name, None)
        else:
            frm = _sv(frm, values, roles)
        cases = []
        for c in p.cases:
            vs = {k: v for k, v in values.items() if k not in {b.name for b in c.binders if isinstance(b, Var)}}
            crs = {k: v for k, v in rs.items() if k not in {b.name for b in c.binders if isinstance(b, Role)}}
            cases.append(RecvCase(c.label, c.binders, subst_proc(c.cont, vs, crs)))
        return Recv(_sv(p.subject, values, roles), frm, tuple(cases), p.replicated, p.binds, pos=p.pos)
    if isinstance(p, Def):
        bvals = {k: v for k, v in values.items() if k not in {x for x, _ in p.params}}
        params = tuple((x, subst_roles(t, roles)) for x, t in p.params)
        return Def(p.name, params, subst_proc(p.body, bvals, roles), subst_proc(p.scope, values, roles), pos=p.pos)
    return p


def rename_session(p, old: str, new: str):
    """Rename free endpoints of session `old` to session `new`."""
    def ep(v):
        return Endpoint(new, v.role) if isinstance(v, Endpoint) and v.session == old else v

    if isinstance(p, Par):
        return Par(rename_session(p.left, old, new), rename_session(p.right, old, new), pos=p.pos)
    if isinstance(p, Restrict):
        if p.session == old:
            return p
        return Restrict(p.session, p.protocol, rename_session(p.body, old, new), p.name, pos=p.pos)
    if isinstance(p, Call):
        return Call(p.name, tuple(ep(a) for a in p.args), pos=p.pos)
    if isinstance(p, SendChoice):
        return SendChoice(tuple(
            Send(ep(s.subject), s.to, s.label, tuple(ep(v) for v in s.payloads),
                 rename_session(s.cont, old, new), pos=s.pos) for s in p.sends), pos=p.pos)
    if isinstance(p, Recv):
        return Recv(ep(p.subject), p.frm,
                    tuple(RecvCase(c.label, c.binders, rename_session(c.cont, old, new)) for c in p.cases),
                    p.replicated, p.binds, pos=p.pos)
    if isinstance(p, Def):
        return Def(p.name, p.params, rename_session(p.body, old, new), rename_session(p.scope, old, new), pos=p.pos)
    return p


def rename_call(p, old: str, new: str):
    """Rename calls to process variable `old` (respecting shadowing defs)."""
    if isinstance(p, Call):
        return Call(new, p.args, pos=p.pos) if p.name == old else p
    if isinstance(p, Par):
        return Par(rename_call(p.left, old, new), rename_call(p.right, old, new), pos=p.pos)
    if isinstance(p, Restrict):
        return Restrict(p.session, p.protocol, rename_call(p.body, old, new), p.name, pos=p.pos)
    if isinstance(p, SendChoice):
        return SendChoice(tuple(
            Send(s.subject, s.to, s.label, s.payloads, rename_call(s.cont, old, new), pos=s.pos)
            for s in p.sends), pos=p.pos)
    if isinstance(p, Recv):
        return Recv(p.subject, p.frm,
                    tuple(RecvCase(c.label, c.binders, rename_call(c.cont, old, new)) for c in p.cases),
                    p.replicated, p.binds, pos=p.pos)
    if isinstance(p, Def):
        if p.name == old:
            return p
        return Def(p.name, p.params, rename_call(p.body, old, new), rename_call(p.scope, old, new), pos=p.pos)
    return p


# ---------------------------------------------------------------- single-role substitution


def subst_role(target, who: Role, for_var: Role):
    """Replace free occurrences of role variable `for_var` by `who` in a
    process, type, runtime type or typing context."""
    m = {for_var.name: who}
    if hasattr(target, "chans") and hasattr(target, "roles"):
        out = target.subst_roles(m)
        if for_var.name in out.roles:
            out = type(out)(out.chans, out.roles - {for_var.name}, out.grounds)
        return out
    if isinstance(target, (Inact, Par, Restrict, SendChoice, Recv, Def, Call)):
        return subst_proc(target, roles=m)
    return subst_roles(target, m)


def free_role_vars(t) -> frozenset:
    if hasattr(t, "frv"):
        return t.frv()
    return frv(t)
