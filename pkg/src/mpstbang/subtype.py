"""Coinductive subtyping, unfolding and congruence of session and runtime types."""
from __future__ import annotations

from functools import lru_cache

from .syntax import (
    Branch, Case, End, Ground, RecBind, Role, Runtime, Select, frv, runtime, subst_rec,
    subst_roles, type_key,
)


def unfold1(t):
    """Unfold the outermost recursion (componentwise on runtime types)."""
    if isinstance(t, Runtime):
        return runtime(*(unfold1(c) for c in t.components))
    if isinstance(t, RecBind):
        return subst_rec(t.body, t.var, t)
    return t


def unfold_n(t, n: int):
    for _ in range(n):
        t = unfold1(t)
    return t


@lru_cache(maxsize=None)
def unfold_star(t):
    """Unfold until the head is no longer a recursion binder."""
    if isinstance(t, Runtime):
        return runtime(*(unfold_star(c) for c in t.components))
    while isinstance(t, RecBind):
        t = unfold1(t)
    return t


def unfold_count(t) -> int:
    """How many one-step unfoldings reach the fixpoint of `unfold_star`."""
    n = 0
    while True:
        u = unfold1(t)
        if type_key(u) == type_key(t):
            return n
        t, n = u, n + 1


def as_runtime(t) -> Runtime:
    return t if isinstance(t, Runtime) else runtime(t)


def type_congruent(a, b) -> bool:
    """Equality modulo commutativity/associativity of `||` and `U || end = U`."""
    return type_key(as_runtime(a)) == type_key(as_runtime(b))


@lru_cache(maxsize=200_000)
def is_subtype(a, b) -> bool:
    if isinstance(a, Runtime) or isinstance(b, Runtime):
        ra, rb = as_runtime(a), as_runtime(b)
        if len(ra.components) != len(rb.components):
            return False
        return all(_sub(x, y, set()) for x, y in zip(ra.components, rb.components))
    return _sub(a, b, set())


def _common(a, b) -> Role:
    taken = frv(a) | frv(b)
    k = 0
    while f"§{k}" in taken:
        k += 1
    return Role(f"§{k}", True)


def _payload_sub(pa, pb, assumed) -> bool:
    if isinstance(pa, (Role, Ground)) or isinstance(pb, (Role, Ground)):
        return pa == pb
    return _sub(pa, pb, assumed)


def _sub(a, b, assumed: set) -> bool:
    if a == b:
        return True
    key = (type_key(a), type_key(b))
    if key[0] == key[1] or key in assumed:
        return True
    assumed.add(key)
    a, b = unfold_star(a), unfold_star(b)
    if isinstance(a, End) or isinstance(b, End):
        return isinstance(a, End) and isinstance(b, End)
    if isinstance(a, Branch) and isinstance(b, Branch):
        return _branch_sub(a, b, assumed)
    if isinstance(a, Select) and isinstance(b, Select):
        return _select_sub(a, b, assumed)
    return False


def _open_binders(ca: Case, cb: Case, shared: dict):
    """Rename role binders of two matching cases to shared names."""
    ma, mb = dict(shared), dict(shared)
    for pa, pb in zip(ca.payloads, cb.payloads):
        va = isinstance(pa, Role) and pa.var
        vb = isinstance(pb, Role) and pb.var
        if va != vb:
            return None
        if va:
            c = _common(subst_roles(ca.cont, ma), subst_roles(cb.cont, mb))
            while c in ma.values() or c in mb.values():
                c = Role(c.name + "'", True)
            ma[pa.name] = c
            mb[pb.name] = c
    return ma, mb


def _branch_sub(a: Branch, b: Branch, assumed) -> bool:
    if a.replicated != b.replicated or a.binds != b.binds:
        return False
    shared = {}
    if a.binds:
        c = _common(a, b)
        shared = {"a": {a.frm.name: c}, "b": {b.frm.name: c}}
    elif a.frm != b.frm:
        return False
    for ca in a.cases:
        cb = b.case(ca.label)
        if cb is None or len(cb.payloads) != len(ca.payloads):
            return False
        sa = shared.get("a", {})
        sb = shared.get("b", {})
        for pa, pb in zip(ca.payloads, cb.payloads):
            if isinstance(pa, Role) and pa.var:
                continue
            if not _payload_sub(subst_roles(pa, sa), subst_roles(pb, sb), assumed):
                return False
        opened = _open_binders(ca, cb, {})
        if opened is None:
            return False
        ma, mb = opened
        ma = {**sa, **ma}
        mb = {**sb, **mb}
        if not _sub(subst_roles(ca.cont, ma), subst_roles(cb.cont, mb), assumed):
            return False
    return True


def _select_sub(a: Select, b: Select, assumed) -> bool:
    for ob in b.options:
        oa = a.option(ob.to, ob.label)
        if oa is None or len(oa.payloads) != len(ob.payloads):
            return False
        if not all(_payload_sub(pb, pa, assumed) for pa, pb in zip(oa.payloads, ob.payloads)):
            return False
        if not _sub(oa.cont, ob.cont, assumed):
            return False
    return True
