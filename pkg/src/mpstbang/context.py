"""Typing contexts: channel entries, role-variable singletons and ground variables.

Contexts are persistent; every operation returns a new one.  Besides the
channel map and role variables, a context records variables bound to ground
payloads (`x : int`).  Those behave like role variables: they are
unrestricted and copied to both sides of a split.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator

from .subtype import unfold_star
from .syntax import (
    End, Endpoint, Ground, Protocol, Role, Runtime, frv, runtime, subst_roles, type_key,
)

SPLIT_CAP = 2 ** 16


class LinearityError(Exception):
    """A split that cannot exist, e.g. one linear channel demanded twice."""


class SplitLimit(Exception):
    """Too many candidate splits to enumerate."""


def chan_key(c) -> str:
    return str(c)


@dataclass(frozen=True)
class Context:
    chans: tuple = ()
    roles: frozenset = frozenset()
    grounds: tuple = ()

    # -- construction
    @staticmethod
    def make(chans: Iterable = (), roles: Iterable = (), grounds: Iterable = ()) -> "Context":
        merged: dict = {}
        for c, u in chans:
            u = u if isinstance(u, Runtime) else runtime(u)
            merged[c] = runtime(merged[c], u) if c in merged else u
        return Context(
            tuple(sorted(merged.items(), key=lambda kv: chan_key(kv[0]))),
            frozenset(r.name if isinstance(r, Role) else r for r in roles),
            tuple(sorted(dict(grounds).items())),
        )

    # -- queries
    def __contains__(self, c) -> bool:
        return any(k == c for k, _ in self.chans)

    def get(self, c) -> "Runtime | None":
        for k, u in self.chans:
            if k == c:
                return u
        return None

    def ground(self, name: str) -> "Ground | None":
        for k, g in self.grounds:
            if k == name:
                return g
        return None

    def endpoints(self) -> list:
        return [c for c, _ in self.chans if isinstance(c, Endpoint)]

    def sessions(self) -> set:
        return {c.session for c, _ in self.chans if isinstance(c, Endpoint)}

    def is_end(self) -> bool:
        return all(_runtime_is_end(u) for _, u in self.chans)

    def frv(self) -> frozenset:
        return frozenset().union(*(frv(u) for _, u in self.chans)) if self.chans else frozenset()

    # -- functional updates
    def with_chan(self, c, u) -> "Context":
        u = u if isinstance(u, Runtime) else runtime(u)
        rest = [(k, v) for k, v in self.chans if k != c]
        rest.append((c, u))
        return Context(tuple(sorted(rest, key=lambda kv: chan_key(kv[0]))), self.roles, self.grounds)

    def without(self, c) -> "Context":
        return Context(tuple((k, v) for k, v in self.chans if k != c), self.roles, self.grounds)

    def with_ground(self, name: str, g: Ground) -> "Context":
        gs = dict(self.grounds)
        gs[name] = g
        return Context(self.chans, self.roles, tuple(sorted(gs.items())))

    def insert_role(self, r: Role) -> "Context":
        if not r.var:
            return self
        return Context(self.chans, self.roles | {r.name}, self.grounds)

    def shared_only(self) -> "Context":
        """The unrestricted part: role and ground variables, no channels."""
        return Context((), self.roles, self.grounds)

    def add(self, other: "Context") -> "Context":
        merged = dict(self.chans)
        for c, u in other.chans:
            merged[c] = runtime(merged[c], u) if c in merged else u
        gs = dict(self.grounds)
        gs.update(other.grounds)
        return Context(
            tuple(sorted(merged.items(), key=lambda kv: chan_key(kv[0]))),
            self.roles | other.roles,
            tuple(sorted(gs.items())),
        )

    __add__ = add

    def subst_roles(self, m) -> "Context":
        return Context(tuple((c, subst_roles(u, m)) for c, u in self.chans), self.roles, self.grounds)

    # -- splitting
    def splits(self) -> Iterator[tuple["Context", "Context"]]:
        """Every split Γ = Γ₁ · Γ₂ (role and ground variables go to both sides)."""
        per_entry = []
        for c, u in self.chans:
            per_entry.append([(l, r) for l, r in _two_way(u)])
        for choice in itertools.product(*per_entry):
            left, right = [], []
            for (c, _), (l, r) in zip(self.chans, choice):
                if l is not None:
                    left.append((c, l))
                if r is not None:
                    right.append((c, r))
            yield (Context(tuple(left), self.roles, self.grounds),
                   Context(tuple(right), self.roles, self.grounds))

    def split_for(self, demand_left: set, demand_right: set) -> list[tuple["Context", "Context"]]:
        """Candidate splits driven by the free channels of two subprocesses."""
        return [tuple(parts) for parts in self.split_among([demand_left, demand_right])]

    def split_among(self, demands: list) -> list[list["Context"]]:
        """Candidate n-ary splits; entry c goes to the parts whose demand set has c.

        Undemanded end entries are dropped (weakening); an end entry demanded by
        several parts is copied to each of them.
        """
        n = len(demands)
        per_entry = []
        for c, u in self.chans:
            who = [i for i, d in enumerate(demands) if c in d]
            if not who:
                if not _runtime_is_end(u):
                    raise LinearityError(f"linear channel {c} : {u} is not used")
                per_entry.append([{}])
            elif len(who) == 1:
                per_entry.append([{who[0]: u}])
            elif _runtime_is_end(u):
                per_entry.append([{i: u for i in who}])
            else:
                opts = _distribute(u.components, who)
                if not opts:
                    raise LinearityError(f"linear channel {c} : {u} used by {len(who)} parallel threads")
                per_entry.append(opts)
        total = 1
        for opts in per_entry:
            total *= len(opts)
        if total > SPLIT_CAP:
            raise SplitLimit(f"{total} candidate splits exceed the limit of {SPLIT_CAP}; simplify the process")
        out = []
        for choice in itertools.product(*per_entry):
            parts = [[] for _ in range(n)]
            for (c, _), assign in zip(self.chans, choice):
                for i, u in assign.items():
                    parts[i].append((c, u))
            out.append([Context(tuple(p), self.roles, self.grounds) for p in parts])
        return out

    # -- display
    def key(self) -> str:
        body = [f"{c}:{type_key(u)}" for c, u in self.chans]
        body += [f"@{r}" for r in sorted(self.roles)]
        body += [f"{x}:{g}" for x, g in self.grounds]
        return "{" + ", ".join(body) + "}"

    def __str__(self):
        body = [f"{c}: {u}" for c, u in self.chans]
        body += [f"@{r}" for r in sorted(self.roles)]
        body += [f"{x}: {g}" for x, g in self.grounds]
        return "{" + ", ".join(body) + "}"


EMPTY = Context()


def _runtime_is_end(u: Runtime) -> bool:
    return all(isinstance(unfold_star(c), End) for c in u.components)


def is_end(g: Context) -> bool:
    return g.is_end()


def insert_role(g: Context, r: Role) -> Context:
    return g.insert_role(r)


def add(g1: Context, g2: Context) -> Context:
    return g1.add(g2)


def splits(g: Context):
    return g.splits()


def split_for(g: Context, demand_left: set, demand_right: set):
    return g.split_for(demand_left, demand_right)


def assoc(session: str, p: Protocol) -> Context:
    """The context {s[q] : S} of a protocol."""
    return Context.make((Endpoint(session, r), t) for r, t in p.entries)


def sub_multisets(items: tuple):
    """All sub-multisets of `items` as (chosen, rest) pairs, without repeats."""
    counts = Counter(items)
    keys = list(counts)
    for picks in itertools.product(*(range(counts[k] + 1) for k in keys)):
        chosen, rest = [], []
        for k, n in zip(keys, picks):
            chosen += [k] * n
            rest += [k] * (counts[k] - n)
        yield chosen, rest


def _two_way(u: Runtime):
    """Ways an entry can sit in a binary split: left, right, or shared by split-par."""
    seen = set()
    for chosen, rest in sub_multisets(u.components):
        if not chosen and not rest:
            continue
        l = runtime(*chosen) if chosen else None
        r = runtime(*rest) if rest else None
        if l is None and r is None:
            continue
        key = (l, r)
        if key not in seen:
            seen.add(key)
            yield l, r
    if not u.components:
        yield u, None
        yield None, u


def _distribute(comps: tuple, who: list) -> list[dict]:
    """Assign every component to one of `who`, each getting at least one."""
    if len(comps) < len(who):
        return []
    out = []
    seen = set()
    for assign in itertools.product(range(len(who)), repeat=len(comps)):
        if len(set(assign)) != len(who):
            continue
        groups = [[] for _ in who]
        for comp, i in zip(comps, assign):
            groups[i].append(comp)
        parts = tuple(runtime(*g) for g in groups)
        if parts in seen:
            continue
        seen.add(parts)
        out.append({w: p for w, p in zip(who, parts)})
    return out
