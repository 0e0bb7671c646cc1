from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpstbang.context import Context, assoc
from mpstbang.parser import parse, parse_context, parse_type
from mpstbang.syntax import Branch, Case, Inact, Restrict, Role, Var, par, threads_of
from mpstbang.typecheck import Checker, type_process, type_value, typecheck_program

from conftest import load

T = parse_type


def test_value_subsumption():
    g = parse_context("{c: p & {m() . end}}")
    v = type_value(g, Var("c"), T("p & {m() . end, n() . end}"))
    assert v.ok and v.summary["T-Sub"] == 1


def test_value_role_literal_singleton():
    assert type_value(Context(), Role("q"), Role("q")).ok


def test_value_singletons_match_syntactically():
    v = type_value(parse_context("{@a}"), Role("q"), Role("a", True))
    assert not v.ok and "singleton" in v.diagnostics[0].message


def test_value_unbound_role_variable():
    assert not type_value(Context(), Role("a", True), Role("a", True)).ok


def test_inaction_needs_end_context():
    v = type_process({}, parse_context("{c: p ! m() . end}"), Inact())
    assert not v.ok and v.diagnostics[0].rule == "T-0"


def test_load_balancer_typechecks():
    v = typecheck_program(load("load_balancer.mpst"))
    assert v.ok
    assert {"T-ν", "T-!", "T-+", "T-⊕", "T-&"} <= set(v.summary)


def test_replicated_branch_needs_end_context():
    prog = parse("""
    protocol Ping { s: !@a & ping() . @a ! pong() . end, c: s ! ping() . s & pong() . end }
    protocol Two { p: q ! m() . end, q: p & m() . end }
    main new s : Ping . new t : Two .
      (!s[s][@a]?{ping(). t[p][q]!m<>.s[s][@a]!pong<>.0} | t[q][p]?{m().0} | s[c][s]!ping<>.s[c][s]?{pong().0})
    """)
    v = typecheck_program(prog)
    assert not v.ok
    assert v.diagnostics[0].rule == "T-!" and "end-typed" in v.diagnostics[0].message


def test_send_to_unbound_role_variable():
    prog = parse("protocol P { p: q ! m() . end, q: p & m() . end }\nmain new s : P . (s[p][@z]!m<>.0 | s[q][p]?{m().0})")
    assert not typecheck_program(prog).ok


def test_sum_branches_share_the_context():
    prog = parse("""protocol P { p: + {q a() . end, q b() . end}, q: p & {a() . end, b() . end} }
    main new s : P . (sum{ s[p][q]!a<>.0, s[p][q]!b<>.0 } | s[q][p]?{a().0, b().0})""")
    v = typecheck_program(prog)
    assert v.ok and v.summary["T-+"] == 1


def test_unsafe_protocol_fails_t_nu():
    prog = parse("protocol P { p: q ! m(int) . end, q: p & n(int) . end }\nmain new s : P . (s[p][q]!m<1>.0 | s[q][p]?{n(x).0})")
    v = typecheck_program(prog)
    assert not v.ok and any(d.rule == "T-ν" for d in v.diagnostics)
    ((_, _, pv),) = v.properties
    assert pv.condition == "S-⊕&"


def test_unknown_when_budget_exhausted():
    v = typecheck_program(load("beh_infinite.mpst"), budget=50)
    assert v.status == "unknown"


def test_definitions_and_calls():
    v = typecheck_program(load("auction.mpst"))
    assert v.ok and v.summary["T-Def"] >= 1 and v.summary["T-Call"] >= 1


def test_call_with_wrong_type():
    prog = parse("""protocol P { p: q ! m() . end, q: p & m() . end }
    main new s : P . def X(x : q ! n() . end) = x[q]!n<>.0 in (X<s[p]> | s[q][p]?{m().0})""")
    v = typecheck_program(prog)
    assert not v.ok and any(d.rule == "T-Call" for d in v.diagnostics)


@pytest.mark.parametrize("prop", ["safety", "deadlock-free", "terminating"])
def test_property_parameter(prop):
    v = typecheck_program(load("philosophers_turns.mpst"), prop)
    assert v.ok


# ---------------------------------------------------------------- narrowing and congruence

SIMPLE = ["load_balancer.mpst", "ping.mpst", "tree.mpst"]


def _body(name):
    main = load(name).main
    assert isinstance(main, Restrict)
    return assoc(main.session, main.protocol), main.body


def _narrow(t, draw):
    """A subtype: drop branch cases (keeping one)."""
    if isinstance(t, Branch):
        cases = t.cases
        if len(cases) > 1 and draw(st.booleans()):
            cases = cases[:-1]
        return Branch(t.frm, tuple(Case(c.label, c.payloads, _narrow(c.cont, draw)) for c in cases),
                      t.replicated, t.binds)
    return t


@settings(max_examples=60)
@given(st.sampled_from(SIMPLE), st.data())
def test_narrowing(name, data):
    g, body = _body(name)
    assert not Checker().proc({}, g, body)
    narrowed = Context.make([(c, _narrow(u.single, data.draw)) for c, u in g.chans])
    assert not Checker().proc({}, narrowed, body)


@settings(max_examples=60)
@given(st.sampled_from(SIMPLE), st.randoms(use_true_random=False))
def test_subject_congruence(name, rnd):
    g, body = _body(name)
    threads = threads_of(body)
    rnd.shuffle(threads)
    assert not Checker().proc({}, g, par(*threads, Inact()))
