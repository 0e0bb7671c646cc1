from __future__ import annotations

import io
import json
import subprocess
import sys

import jsonschema
import pytest

from mpstbang.cli import (
    EXIT_ERROR, EXIT_FAIL, EXIT_OK, EXIT_STEP_LIMIT, EXIT_UNKNOWN, annotations, cmd_run, main, matches, resolve,
    schema,
)

from conftest import CORPUS


def run_cli(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def run_json(capsys, *argv):
    code, out = run_cli(capsys, *argv, "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, schema())
    return code, doc


def test_check_load_balancer(capsys):
    code, doc = run_json(capsys, "check", "load_balancer.mpst")
    assert code == EXIT_OK and doc["verdict"] == "ok" and doc["property"] == "safety"
    assert doc["budget"] == 10_000 and doc["timing-ms"] >= 0


def test_check_naive_deadlock_witness(capsys):
    code, out = run_cli(capsys, "check", "philosophers_naive.mpst", "--property=deadlock-free")
    assert code == EXIT_FAIL
    assert "witness state:" in out and "s: C1 -> L : acquire" in out
    code, doc = run_json(capsys, "check", "philosophers_naive.mpst", "--property=deadlock-free")
    assert doc["verdict"] == "fail" and doc["trace"]
    assert doc["details"]["protocols"][0]["witness"].startswith("{")


def test_check_turns_terminating(capsys):
    code, _ = run_cli(capsys, "check", "philosophers_turns.mpst", "--property=terminating")
    assert code == EXIT_OK


def test_check_unknown_exit_code(capsys):
    code, doc = run_json(capsys, "check", "beh_infinite.mpst", "--budget=50")
    assert code == EXIT_UNKNOWN and doc["verdict"] == "unknown"


def test_beh_two_states(capsys):
    code, out = run_cli(capsys, "beh", "beh_two_states.mpst")
    assert code == EXIT_OK and out.startswith("Finite: 2 states")


def test_beh_infinite(capsys):
    code, out = run_cli(capsys, "beh", "beh_infinite.mpst", "--budget=50")
    assert code == EXIT_UNKNOWN and out.startswith("Infinite (budget)")
    code, out = run_cli(capsys, "strategy", "beh_infinite.mpst")
    assert "CRCP" in out


def test_beh_graph_json(capsys):
    code, doc = run_json(capsys, "beh", "ping.mpst", "--graph")
    assert code == EXIT_OK
    g = doc["graph"]
    assert len(g["nodes"]) == doc["details"]["nodes"] and len(g["edges"]) == doc["details"]["edges"]
    assert all(src in g["nodes"] and dst in g["nodes"] for src, _, dst in g["edges"])


def test_beh_protocol_selection(capsys):
    code, doc = run_json(capsys, "beh", "ping.mpst", "--protocol=Nope")
    assert code == EXIT_ERROR and "no protocol named Nope" in doc["diagnostics"][0]["message"]


def test_strategy_modes(capsys):
    _, out = run_cli(capsys, "strategy", "approx_false_negative.mpst", "--mode=approx")
    assert "tf: approx-fails" in out
    _, out = run_cli(capsys, "strategy", "approx_false_negative.mpst", "--mode=approx-unique-labels")
    assert "tf: holds" in out
    code, doc = run_json(capsys, "strategy", "auction.mpst")
    assert code == EXIT_UNKNOWN and doc["details"]["finite_guaranteed"] is False


def test_run_exhaustive_load_balancer(capsys):
    code, doc = run_json(capsys, "run", "load_balancer.mpst", "--scheduler=exhaustive")
    assert code == EXIT_OK and doc["details"]["outcome"] == "ok"
    assert len(doc["details"]["terminals"]) == 1 and doc["details"]["blocked"] == []


def test_run_seeded(capsys):
    code, out = run_cli(capsys, "run", "load_balancer.mpst", "--seed=1")
    assert code == EXIT_OK
    assert "R-!C2 s c->s req {42/x}{c/@a}" in out and "R-!C1 s s->w1 fw {42/y}{c/@γ}" in out


def test_run_without_seed_prints_one(capsys):
    _, doc = run_json(capsys, "run", "ping.mpst")
    assert isinstance(doc["details"]["seed"], int)


def test_run_zero_steps(capsys):
    code, doc = run_json(capsys, "run", "load_balancer.mpst", "--seed=7", "--max-steps=0")
    assert code == EXIT_STEP_LIMIT and doc["trace"] == [] and doc["details"]["outcome"] == "step-limit"


def test_run_naive_blocked(capsys):
    code, out = run_cli(capsys, "run", "philosophers_naive.mpst", "--scheduler=exhaustive")
    assert code == EXIT_FAIL and "[blocked]" in out


def test_run_interactive():
    out = io.StringIO()
    res = cmd_run(str(CORPUS / "load_balancer.mpst"), step=True, out=out, inp=io.StringIO("0\n1\n9\n\nq\n"))
    text = out.getvalue()
    assert "[0] R-!C2 s c->s req {42/x}{c/@a}" in text and "pick a number below" in text
    assert len(res.trace) == 3 and res.trace[1] == "R-+ s s->w2 fw #1"


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.mpst"
    bad.write_text("main s[p][q]!m<.0")
    code, doc = run_json(capsys, "check", str(bad))
    assert code == EXIT_ERROR and doc["verdict"] == "error"
    assert doc["diagnostics"][0]["line"] == 1


def test_validation_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.mpst"
    bad.write_text("protocol P { p: q ! m() . end, q: p & m() . end }\nmain new s : P . s[z][q]!m<>.0")
    code, out = run_cli(capsys, "check", str(bad))
    assert code == EXIT_ERROR and "bad.mpst:2:18:" in out


def test_missing_file(capsys):
    code, doc = run_json(capsys, "check", "no_such_file.mpst")
    assert code == EXIT_ERROR and "cannot read" in doc["diagnostics"][0]["message"]


def test_resolve_prefers_real_paths(tmp_path):
    f = tmp_path / "ping.mpst"
    f.write_text("main 0")
    assert resolve(str(f)) == f
    assert resolve("ping.mpst") == CORPUS / "ping.mpst"


def test_annotation_parsing_and_matching():
    anns = annotations(CORPUS / "beh_infinite_loop.mpst")
    assert ("strategy", ["--mode=exact"], "tf fails, lf fails 2") in anns
    assert matches("finite", "finite 7", "beh") and not matches("finite 2", "finite 3", "beh")
    assert matches("tf holds", "tf holds, lf fails 1", "strategy")
    assert not matches("tf fails, lf fails 2", "tf fails, lf fails 1", "strategy")


def test_corpus_command(capsys):
    code, doc = run_json(capsys, "corpus")
    assert code == EXIT_OK
    checks = doc["details"]["checks"]
    assert checks and all(c["pass"] for c in checks)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "mpstbang", "beh", "beh_two_states.mpst"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("Finite: 2 states")


def test_bad_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["check", "ping.mpst", "--property=liveness"])
    assert e.value.code == 2
