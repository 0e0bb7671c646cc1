from __future__ import annotations

from hypothesis import given, settings

from mpstbang.parser import parse, parse_process, parse_protocol, parse_type
from mpstbang.printer import show
from mpstbang.syntax import (
    END, Branch, Endpoint, Role, Runtime, free_role_vars, frv, lit, role, runtime, subst_role, subst_roles,
)
from mpstbang.validate import validate, validate_program, validate_protocol, validate_type

from conftest import load
from strategies import open_types

A = Role("a", True)
C = Role("c")


def test_role_sigil_distinguishes_literals_and_variables():
    assert role("@a") == A and str(A) == "@a"
    assert role("q") == Role("q") and str(Role("q")) == "q"
    assert A != Role("a")


def test_endpoint_prints_with_brackets():
    assert str(Endpoint("s", "q")) == "s[q]"


def test_ground_literals_carry_their_type():
    assert lit(3).kind == "int" and lit("x").kind == "str" and lit(True).kind == "bool"


def test_runtime_drops_end_and_flattens():
    s = parse_type("p ! m() . end")
    assert runtime(s, END) == runtime(s)
    assert runtime(runtime(s, s), s).components == (s, s, s)
    assert isinstance(runtime(END), Runtime) and runtime(END).components == ()


def test_subst_role_replaces_free_variable_in_send_target():
    p = parse_process('x[@a]!ans<"v">.0', variables={"x"}, roles={"a"})
    assert show(subst_role(p, C, A)) == 'x[c]!ans<"v">.0'


def test_subst_role_leaves_binder_alone():
    p = parse_process("!s[p][@a]?{m().0}")
    assert p.binds
    assert subst_role(p, Role("q"), A) == p


def test_subst_role_absent_variable_is_identity():
    t = parse_type("p ! m() . end")
    assert subst_role(t, C, A) == t


def test_frv_examples():
    assert frv(parse_type("!@a & { m() . @a ! m2() . end }")) == frozenset()
    assert frv(parse_type("@g ! ans(str) . end")) == {"g"}
    proto = load("load_balancer.mpst").protocols["LoadBalancer"]
    assert all(frv(t) == frozenset() for _, t in proto.entries)


def test_subst_avoids_capture():
    # substituting @b for @a under a binder of @b must rename the binder
    t = parse_type("!@b & {m() . @a ! n() . @b ! k() . end}", roles=frozenset({"a"}))
    out = subst_roles(t, {"a": Role("b", True)})
    assert frv(out) == {"b"}
    inner = out.cases[0].cont
    assert inner.options[0].to == Role("b", True)
    assert inner.options[0].cont.options[0].to == Role(out.frm.name, True) != Role("b", True)


def test_validate_unguarded_recursion():
    diags = validate_type(parse_type("rec t . t"))
    assert [d.message for d in diags] == ["unguarded recursion variable t"]


def test_validate_auction_protocol_ok():
    assert validate_protocol(load("auction.mpst").protocols["Auction"]) == []


def test_validate_free_role_variable():
    # the server type of the load balancer with its binder removed
    proto = parse_protocol("{s: @a & {req(int) . @a ! wrk(int) . end}}")
    msgs = [d.message for d in validate(proto)]
    assert any("free role variable @a" in m for m in msgs)


def test_validate_unknown_endpoint_role_has_position():
    prog = parse("protocol P { p: q ! m() . end, q: p & m() . end }\nmain new s : P . s[z][q]!m<>.0")
    diags = validate_program(prog)
    assert diags and "role z is not part of the protocol" in diags[0].message
    assert diags[0].pos == (2, 18)


def test_validate_free_channel_variable():
    assert any("free channel variable x" in d.message for d in validate(parse_process("x[p]!m<>.0")))


def test_validate_duplicate_labels_rejected_by_parser():
    from mpstbang.diagnostics import ParseError
    import pytest

    with pytest.raises(ParseError, match="duplicate branch label m"):
        parse_type("p & {m() . end, m() . end}")


@settings(max_examples=300)
@given(open_types())
def test_subst_removes_variable(t):
    out = subst_role(t, C, A)
    assert free_role_vars(out) == free_role_vars(t) - {"a"}


@settings(max_examples=300)
@given(open_types())
def test_subst_idempotent(t):
    once = subst_role(t, C, A)
    assert subst_role(once, C, A) == once


@settings(max_examples=300)
@given(open_types())
def test_subst_commutes_with_printing(t):
    roles = frozenset(free_role_vars(t))
    reparsed = parse_type(show(subst_role(t, C, A)), roles - {"a"})
    assert reparsed == subst_role(parse_type(show(t), roles), C, A)


def test_binds_flag_matches_branch_helper():
    t = parse_type("!@a & {m() . end}")
    assert isinstance(t, Branch) and t.binds
    assert not parse_type("!@a & {m() . end}", roles=frozenset({"a"})).binds
