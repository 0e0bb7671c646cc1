from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpstbang.context import assoc
from mpstbang.safety import compute_beh
from mpstbang.strategy import MODES, analyse, crcps, loop_free, recommend, triv_finite

from conftest import CORPUS_FILES, first_protocol
from strategies import communicating_protocols, protocols


@pytest.mark.parametrize("name", ["philosophers_naive.mpst", "philosophers_turns.mpst"])
def test_philosophers_trivially_finite(name):
    assert triv_finite(first_protocol(name), "exact").holds


def test_false_negative_under_coarse_approximation():
    p = first_protocol("approx_false_negative.mpst")
    assert triv_finite(p, "approx").status == "approx-fails"
    assert triv_finite(p, "approx-unique-labels").holds
    assert compute_beh(assoc("s", p), 1000).finite


def test_recursive_sender_into_replicated_receiver():
    v = triv_finite(first_protocol("beh_infinite.mpst"), "exact")
    assert v.status == "fails" and "p:rec t" in v.witness and "q:!p&{m}" in v.witness


def test_load_balancer_loop_free():
    p = first_protocol("load_balancer.mpst")
    assert loop_free(p, "exact").holds
    assert not triv_finite(p, "exact").holds


@pytest.mark.parametrize("name", ["tree.mpst", "tree_multi.mpst"])
def test_tree_services_loop_free(name):
    assert loop_free(first_protocol(name), "exact").holds


def test_two_crcps():
    found = crcps(first_protocol("beh_infinite_loop.mpst"), "exact")
    assert sorted(c.site.split(":")[0] for c in found) == ["p", "q"]
    for c in found:
        assert c.cycle[-1] == c.site


def test_one_crcp():
    (c,) = crcps(first_protocol("beh_infinite.mpst"), "exact")
    assert c.site.startswith("q:")


def test_auction_needs_budgeted_beh():
    rep = recommend(first_protocol("auction.mpst"))
    assert not rep.finite_guaranteed
    assert "fall back to budgeted beh" in rep.render()
    assert compute_beh(assoc("s", first_protocol("auction.mpst")), 10_000).finite


def test_ping_trivially_finite():
    assert recommend(first_protocol("ping.mpst")).tf.holds


def test_infinite_examples_fail_both():
    for name in ("beh_infinite.mpst", "beh_infinite_loop.mpst"):
        rep = recommend(first_protocol(name))
        assert not rep.tf.holds and not rep.lf.holds


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="unknown mode"):
        analyse(first_protocol("ping.mpst"), "fast")


def test_report_json_shape():
    out = analyse(first_protocol("beh_infinite_loop.mpst"), "exact").as_json()
    assert out["tf"]["status"] == "fails" and len(out["lf"]["crcps"]) == 2
    assert out["finite_guaranteed"] is False


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_approximations_are_conservative(name):
    p = first_protocol(name)
    exact = analyse(p, "exact")
    for mode in ("approx", "approx-unique-labels"):
        rep = analyse(p, mode)
        if rep.tf.holds:
            assert exact.tf.holds
        if rep.lf.holds:
            assert exact.lf.holds


@settings(max_examples=300)
@given(st.one_of(protocols(3), communicating_protocols()), st.sampled_from(MODES))
def test_guarantee_is_sound_on_generated_protocols(proto, mode):
    rep = analyse(proto, mode)
    if rep.finite_guaranteed:
        beh = compute_beh(assoc("s", proto), 2000, pumping=True)
        assert beh.finite or beh.reason == "budget"


@settings(max_examples=300)
@given(st.one_of(protocols(3), communicating_protocols()))
def test_growth_has_a_crcp_on_generated_protocols(proto):
    beh = compute_beh(assoc("s", proto), 2000, pumping=True)
    if not beh.finite and beh.reason == "pumping":
        assert crcps(proto, "exact")


@settings(max_examples=300)
@given(st.one_of(protocols(3), communicating_protocols()))
def test_approx_holds_implies_exact_holds(proto):
    exact = analyse(proto, "exact")
    for mode in ("approx", "approx-unique-labels"):
        rep = analyse(proto, mode)
        assert not rep.tf.holds or exact.tf.holds
        assert not rep.lf.holds or exact.lf.holds
