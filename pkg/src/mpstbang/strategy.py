"""Static analyses that guarantee a finite behavioural set.

Two strategies are offered.  A protocol is *trivially finite* when no send
that sits inside a recursion body or inside the continuation of a replicated
branch can reach a replicated branch.  It is *loop free* when the graph of
communication sites has no cyclic path that keeps feeding a replicated
branch.

Sites are the replicated branches and recursion bodies of the protocol.
Edges say "code in this site may trigger that site": a send that can land
in a replicated branch or in a receive inside a recursion body, entering a
nested recursion, or jumping back to a recursion variable.  A walk through a
site stops at a receive that can only be served by code outside every site,
since such a client fires a bounded number of times.

Role variables in send targets are resolved in one of three modes:

* ``approx``: a variable may name any role and may hit a replicated branch
  regardless of its labels.
* ``approx-unique-labels``: variables are resolved by a least-fixpoint flow
  analysis keyed on (receiving role, label); a universal receive binds the
  senders of that label, a role payload binds the roles passed at that
  position.
* ``exact``: identical to the flow analysis; the result is precise when the
  protocol has no role variables in send targets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .syntax import Branch, End, Protocol, RecBind, RecVar, Role, Select

MODES = ("exact", "approx", "approx-unique-labels")


@dataclass(frozen=True)
class Site:
    id: str
    role: str
    kind: str          # "replicated" or "rec"
    path: tuple
    node: object


@dataclass
class _SendOcc:
    role: str
    to: tuple          # ("lit", name) | ("var", key) | ("free", name)
    label: str
    payloads: tuple    # resolutions of role payloads, None for other payloads
    encl: tuple        # enclosing site ids, outermost first
    path: tuple


@dataclass
class _BranchOcc:
    role: str
    node: Branch
    frm: tuple         # resolution of the sender; ("bind", None) for a universal receive
    binders: dict      # label -> ((index, key), ...) for role payload binders
    from_keys: dict    # label -> key of the universal binder, if any
    encl: tuple
    path: tuple


@dataclass
class Analysis:
    protocol: Protocol
    mode: str
    sites: dict = field(default_factory=dict)
    sends: list = field(default_factory=list)
    branches: dict = field(default_factory=dict)
    recvar_site: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    @property
    def roles(self) -> list[str]:
        return [r for r, _ in self.protocol.entries]

    @property
    def first_class(self) -> bool:
        return any(s.to[0] != "lit" for s in self.sends)

    # -- resolution
    def resolve(self, res) -> set:
        kind, v = res
        if kind == "lit":
            return {v}
        if kind == "var":
            return self.values.get(v, set())
        return set(self.roles)

    def targets(self, s: _SendOcc) -> set:
        if self.mode == "approx" and s.to[0] != "lit":
            return set(self.roles)
        return self.resolve(s.to)

    def label_blind(self, s: _SendOcc) -> bool:
        return self.mode == "approx" and s.to[0] != "lit"

    def accepts(self, b: _BranchOcc, sender: str) -> bool:
        kind, _ = b.frm
        if kind == "bind":
            return True
        if kind == "var" and self.mode == "approx":
            return True
        return sender in self.resolve(b.frm)

    def lands(self, s: _SendOcc, b: _BranchOcc) -> bool:
        """Can send `s` be received by branch `b`?"""
        if b.role not in self.targets(s) or not self.accepts(b, s.role):
            return False
        return self.label_blind(s) or b.node.case(s.label) is not None

    def live_senders(self, b: _BranchOcc, label: str) -> list:
        return [s for s in self.sends if s.encl and (s.label == label or self.label_blind(s))
                and b.role in self.targets(s) and self.accepts(b, s.role)]

    def describe(self, s: _SendOcc) -> str:
        to = s.to[1] if s.to[0] != "var" else "@" + str(s.to[1][-1])
        return f"{s.role} ! {to} {s.label}"


def _site_id(role: str, kind: str, node, taken: dict) -> str:
    if kind == "rec":
        base = f"{role}:rec {node.var}"
    else:
        base = f"{role}:!{node.frm}&{{{', '.join(node.labels())}}}"
    n = taken.get(base, 0)
    taken[base] = n + 1
    return base if n == 0 else f"{base}#{n + 1}"


def _collect(p: Protocol, mode: str) -> Analysis:
    a = Analysis(p, mode)
    taken: dict = {}

    def res_role(r: Role, env: dict):
        if not r.var:
            return ("lit", r.name)
        if r.name in env:
            return ("var", env[r.name])
        return ("free", r.name)

    def go(role, t, path, env, recs, encl):
        if isinstance(t, End):
            return
        if isinstance(t, RecVar):
            if t.name in recs:
                a.recvar_site[(role, path)] = recs[t.name]
            return
        if isinstance(t, RecBind):
            sid = _site_id(role, "rec", t, taken)
            a.sites[sid] = Site(sid, role, "rec", path, t)
            go(role, t.body, path + (0,), env, {**recs, t.var: sid}, encl + (sid,))
            return
        if isinstance(t, Branch):
            inner_encl = encl
            if t.replicated:
                sid = _site_id(role, "replicated", t, taken)
                a.sites[sid] = Site(sid, role, "replicated", path, t)
                inner_encl = encl + (sid,)
            frm = ("bind", None) if t.binds else res_role(t.frm, env)
            occ = _BranchOcc(role, t, frm, {}, {}, encl, path)
            a.branches[(role, path)] = occ
            for k, c in enumerate(t.cases):
                env2 = dict(env)
                if t.binds:
                    key = (role, path, c.label, "from", t.frm.name)
                    occ.from_keys[c.label] = key
                    env2[t.frm.name] = key
                bs = []
                for i, pt in enumerate(c.payloads):
                    if isinstance(pt, Role) and pt.var:
                        key = (role, path, c.label, i, pt.name)
                        bs.append((i, key))
                        env2[pt.name] = key
                occ.binders[c.label] = tuple(bs)
                go(role, c.cont, path + (k,), env2, recs, inner_encl)
            return
        if isinstance(t, Select):
            for k, o in enumerate(t.options):
                pays = tuple(res_role(x, env) if isinstance(x, Role) else None for x in o.payloads)
                a.sends.append(_SendOcc(role, res_role(o.to, env), o.label, pays, encl, path + (k,)))
                go(role, o.cont, path + (k,), env, recs, encl)

    for role, t in p.entries:
        go(role, t, (), {}, {}, ())
    if mode != "approx":
        _flow(a)
    return a


def _flow(a: Analysis) -> None:
    """Least fixpoint of the role-variable flow."""
    changed = True
    while changed:
        changed = False
        for b in a.branches.values():
            for c in b.node.cases:
                senders = [s for s in a.sends if s.label == c.label and b.role in a.resolve(s.to)
                           and a.accepts(b, s.role)]
                updates = []
                if c.label in b.from_keys:
                    updates.append((b.from_keys[c.label], {s.role for s in senders}))
                for i, key in b.binders.get(c.label, ()):
                    vals = set()
                    for s in senders:
                        if i < len(s.payloads) and s.payloads[i] is not None:
                            vals |= a.resolve(s.payloads[i])
                    updates.append((key, vals))
                for key, vals in updates:
                    cur = a.values.setdefault(key, set())
                    if not vals <= cur:
                        cur |= vals
                        changed = True


# ---------------------------------------------------------------- trivially finite


@dataclass
class Verdict:
    status: str                      # "holds" | "fails" | "approx-fails"
    witness: str = ""
    crcps: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def _failure(mode: str) -> str:
    return "fails" if mode == "exact" else "approx-fails"


def _replicated_hits(a: Analysis, s: _SendOcc) -> list[Site]:
    out = []
    for site in a.sites.values():
        if site.kind == "replicated" and a.lands(s, a.branches[(site.role, site.path)]):
            out.append(site)
    return out


def triv_finite(p: Protocol, mode: str = "exact") -> Verdict:
    a = _collect(p, _check_mode(mode))
    for s in a.sends:
        if not s.encl:
            continue
        hits = _replicated_hits(a, s)
        if hits:
            where = a.sites[s.encl[-1]]
            ctx = "recursion body" if where.kind == "rec" else "replicated continuation"
            return Verdict(_failure(mode), f"{a.describe(s)} inside {ctx} {where.id} reaches {hits[0].id}")
    return Verdict("holds")


# ---------------------------------------------------------------- loop free


def comm_graph(a: Analysis) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(a.sites)
    for sid, site in a.sites.items():
        for dst, why in _walk(a, site):
            if g.has_edge(sid, dst):
                continue
            g.add_edge(sid, dst, why=why)
    return g


def _walk(a: Analysis, site: Site):
    role = site.role
    out = []
    stack = []
    if site.kind == "rec":
        stack.append((site.node.body, site.path + (0,)))
    else:
        stack += [(c.cont, site.path + (k,)) for k, c in enumerate(site.node.cases)]
    while stack:
        t, path = stack.pop()
        if isinstance(t, RecVar):
            if (role, path) in a.recvar_site:
                out.append((a.recvar_site[(role, path)], f"{t.name} loops back"))
        elif isinstance(t, RecBind):
            out.append((_site_at(a, role, path), "enters"))
        elif isinstance(t, Branch):
            if t.replicated:
                continue
            occ = a.branches[(role, path)]
            for k, c in enumerate(t.cases):
                if a.live_senders(occ, c.label):
                    stack.append((c.cont, path + (k,)))
        elif isinstance(t, Select):
            for k, o in enumerate(t.options):
                s = _send_at(a, role, path + (k,))
                for hit in _replicated_hits(a, s):
                    out.append((hit.id, a.describe(s)))
                for b in a.branches.values():
                    if b.encl and not b.node.replicated and a.sites[b.encl[-1]].kind == "rec" and a.lands(s, b):
                        out.append((b.encl[-1], a.describe(s)))
                stack.append((o.cont, path + (k,)))
    return out


def _site_at(a: Analysis, role, path) -> str:
    for s in a.sites.values():
        if s.role == role and s.path == path:
            return s.id
    raise KeyError((role, path))


def _send_at(a: Analysis, role, path) -> _SendOcc:
    for s in a.sends:
        if s.role == role and s.path == path:
            return s
    raise KeyError((role, path))


def _shortest_cycle(g: nx.DiGraph, u) -> list:
    if g.has_edge(u, u):
        return [u, u]
    best = None
    for v in g.successors(u):
        try:
            path = nx.shortest_path(g, v, u)
        except nx.NetworkXNoPath:
            continue
        if best is None or len(path) < len(best):
            best = path
    return [u] + best if best else []


@dataclass
class Crcp:
    site: str
    cycle: list

    def __str__(self):
        return f"{self.site} fed by cycle {' -> '.join(self.cycle)}"


def crcps(p: Protocol, mode: str = "exact") -> list[Crcp]:
    a = _collect(p, _check_mode(mode))
    g = comm_graph(a)
    cyclic = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(n, n) for n in comp):
            cyclic |= comp
    out = []
    for sid, site in a.sites.items():
        if site.kind != "replicated":
            continue
        feeders = sorted(u for u in g.predecessors(sid) if u in cyclic)
        if feeders:
            cycles = [_shortest_cycle(g, u) for u in feeders]
            best = min(cycles, key=len)
            out.append(Crcp(sid, best + ([sid] if best[-1] != sid else [])))
    return out


def loop_free(p: Protocol, mode: str = "exact") -> Verdict:
    found = crcps(p, mode)
    if not found:
        return Verdict("holds")
    return Verdict(_failure(mode), str(found[0]), found)


# ---------------------------------------------------------------- report


@dataclass
class StrategyReport:
    mode: str
    tf: Verdict
    lf: Verdict
    precise: bool

    @property
    def finite_guaranteed(self) -> bool:
        return self.tf.holds or self.lf.holds

    def render(self) -> str:
        lines = [f"mode: {self.mode}" + ("" if self.precise else " (role variables in send targets)")]
        for name, v in (("tf", self.tf), ("lf", self.lf)):
            line = f"{name}: {v.status}"
            if name == "lf" and v.crcps:
                line += f" ({len(v.crcps)} CRCP{'s' if len(v.crcps) != 1 else ''})"
            if v.witness:
                line += f"; {v.witness}"
            lines.append(line)
            for c in v.crcps[1:]:
                lines.append(f"    also {c}")
        if self.finite_guaranteed:
            lines.append("finite behavioural set guaranteed")
        else:
            lines.append("no guarantee: fall back to budgeted beh")
        return "\n".join(lines)

    def as_json(self) -> dict:
        return {
            "mode": self.mode,
            "precise": self.precise,
            "tf": {"status": self.tf.status, "witness": self.tf.witness},
            "lf": {"status": self.lf.status, "witness": self.lf.witness,
                   "crcps": [{"site": c.site, "cycle": c.cycle} for c in self.lf.crcps]},
            "finite_guaranteed": self.finite_guaranteed,
        }


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose one of {', '.join(MODES)}")
    return mode


def analyse(p: Protocol, mode: str = "exact") -> StrategyReport:
    precise = not _collect(p, "approx").first_class
    return StrategyReport(mode, triv_finite(p, mode), loop_free(p, mode), precise)


def recommend(p: Protocol) -> StrategyReport:
    """Both analyses in the most precise mode available."""
    return analyse(p, "exact")
