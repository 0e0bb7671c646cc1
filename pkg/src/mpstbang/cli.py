"""Command-line front end.

    mpstbang check FILE [--property=P] [--budget=N] [--json]
    mpstbang beh FILE [--budget=N] [--protocol=NAME] [--graph] [--json]
    mpstbang strategy FILE [--mode=M] [--protocol=NAME] [--json]
    mpstbang run FILE [--scheduler=S] [--seed=N] [--max-steps=N] [--step] [--json]
    mpstbang corpus [DIR] [--json]

Exit codes: 0 ok, 1 fail, 2 unknown, 3 parse or validation error, 4 step
limit reached.  FILE may also name a file of the bundled corpus.
"""
from __future__ import annotations

import argparse
import json
import random
import re
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .context import assoc
from .diagnostics import Diagnostic, ParseError
from .interp import DEFAULT_MAX_STEPS, ClosedError, normalize, run
from .parser import parse
from .safety import PROPERTIES, compute_beh, default_budget, dump_graph
from .strategy import MODES, analyse
from .syntax import Restrict, children
from .typecheck import typecheck_program
from .validate import validate_program

EXIT_OK, EXIT_FAIL, EXIT_UNKNOWN, EXIT_ERROR, EXIT_STEP_LIMIT = 0, 1, 2, 3, 4
SCHEMA_VERSION = 1
EXIT_CODES = {"ok": EXIT_OK, "fail": EXIT_FAIL, "unknown": EXIT_UNKNOWN, "error": EXIT_ERROR}


@dataclass
class Result:
    command: str
    file: str
    verdict: str                                   # ok | fail | unknown | error
    diagnostics: list = field(default_factory=list)
    prop: "str | None" = None
    budget: "int | None" = None
    timing_ms: float = 0.0
    trace: "list | None" = None
    graph: "dict | None" = None
    details: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)      # human-readable report
    step_limit: bool = False

    @property
    def exit_code(self) -> int:
        if self.step_limit and self.verdict != "fail":
            return EXIT_STEP_LIMIT
        return EXIT_CODES[self.verdict]

    def as_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "file": self.file,
            "verdict": self.verdict,
            "diagnostics": [d.as_json() for d in self.diagnostics],
            "property": self.prop,
            "budget": self.budget,
            "timing-ms": round(self.timing_ms, 3),
            "details": self.details,
        }
        if self.trace is not None:
            out["trace"] = self.trace
        if self.graph is not None:
            out["graph"] = self.graph
        return out

    def render(self) -> str:
        out = list(self.lines)
        out += [d.render(self.file) for d in self.diagnostics if d.render(self.file) not in out]
        return "\n".join(out)


def schema() -> dict:
    """The JSON schema every `--json` result conforms to."""
    text = resources.files("mpstbang").joinpath("schema/verdict.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def corpus_dir() -> Path:
    return Path(str(resources.files("mpstbang").joinpath("corpus")))


def resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = corpus_dir() / p.name
    return bundled if bundled.exists() else p


class _Failed(Exception):
    def __init__(self, result: Result):
        self.result = result


def _load(command: str, path: str):
    p = resolve(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise _Failed(Result(command, path, "error", [Diagnostic(f"cannot read {path}: {e.strerror}")]))
    try:
        prog = parse(text)
    except ParseError as e:
        raise _Failed(Result(command, path, "error", e.diagnostics))
    diags = validate_program(prog)
    if diags:
        raise _Failed(Result(command, path, "error", diags))
    return prog


def _inline_protocols(p, acc: list) -> list:
    if isinstance(p, Restrict) and p.name is None:
        acc.append((f"new {p.session}", p.protocol))
    for ch in children(p):
        _inline_protocols(ch, acc)
    return acc


def protocols_of(prog) -> list:
    """Declared protocols followed by the ones written inline in `new`."""
    return list(prog.protocols.items()) + _inline_protocols(prog.main, [])


def _pick_protocol(command: str, path: str, prog, name: "str | None"):
    found = protocols_of(prog)
    if name is not None:
        found = [(n, p) for n, p in found if n == name]
        if not found:
            raise _Failed(Result(command, path, "error", [Diagnostic(f"no protocol named {name}")]))
    if not found:
        raise _Failed(Result(command, path, "error", [Diagnostic("the file declares no protocol")]))
    return found[0]


# ---------------------------------------------------------------- commands


def cmd_check(path: str, prop: str = "safety", budget: "int | None" = None) -> Result:
    budget = budget or default_budget()
    prog = _load("check", path)
    v = typecheck_program(prog, prop, budget)
    res = Result("check", path, v.status, list(v.diagnostics), prop, budget)
    protos = []
    for session, name, pv in v.properties:
        protos.append({
            "session": session, "protocol": name, "verdict": pv.verdict, "condition": pv.condition,
            "message": pv.message, "states": pv.states,
            "witness": str(pv.state) if pv.state is not None else None,
            "trace": [str(a) for a in pv.trace],
        })
    res.details = {"protocols": protos, "rules": dict(sorted(v.summary.items()))}
    head = f"{path}: {v.status} under {prop}"
    res.lines.append(head + f" ({len(protos)} protocol{'s' if len(protos) != 1 else ''} checked)")
    for p in protos:
        res.lines.append(f"  {p['session']} : {p['protocol']}: {p['verdict']} ({p['states']} states)")
    bad = next((p for p in protos if p["verdict"] == "fail"), None)
    if bad is not None:
        res.trace = bad["trace"]
        res.lines.append(f"  witness state: {bad['witness']}")
        if bad["trace"]:
            res.lines.append("  reached by:")
            res.lines += [f"    {a}" for a in bad["trace"]]
    return res


def cmd_beh(path: str, budget: "int | None" = None, protocol: "str | None" = None,
            graph: bool = False) -> Result:
    budget = budget or default_budget()
    prog = _load("beh", path)
    name, proto = _pick_protocol("beh", path, prog, protocol)
    beh = compute_beh(assoc("s", proto), budget)
    if beh.finite:
        res = Result("beh", path, "ok", budget=budget)
        res.details = {"protocol": name, "finite": True, "states": len(beh.states),
                       "nodes": len(beh.nodes), "edges": len(beh.edges)}
        res.lines.append(f"Finite: {len(beh.states)} states ({len(beh.nodes)} graph nodes, "
                         f"{len(beh.edges)} edges)")
        if graph:
            ids = {k: f"S{i}" for i, k in enumerate(beh.nodes)}
            res.graph = {
                "nodes": {ids[k]: str(h) for k, h in beh.nodes.items()},
                "edges": [[ids[a], str(act), ids[b]] for a, act, b in beh.edges],
            }
            res.lines.append(dump_graph(beh))
    else:
        res = Result("beh", path, "unknown", budget=budget)
        res.details = {"protocol": name, "finite": False, "reason": beh.reason, "explored": beh.explored}
        res.lines.append(f"Infinite ({beh.reason}): explored {beh.explored} states")
    return res


def cmd_strategy(path: str, mode: str = "exact", protocol: "str | None" = None) -> Result:
    prog = _load("strategy", path)
    name, proto = _pick_protocol("strategy", path, prog, protocol)
    rep = analyse(proto, mode)
    res = Result("strategy", path, "ok" if rep.finite_guaranteed else "unknown")
    res.details = {"protocol": name, **rep.as_json()}
    res.lines.append(f"protocol {name}")
    res.lines += rep.render().splitlines()
    return res


def _prompt(out, inp):
    def choose(steps):
        for k, (step, _) in enumerate(steps):
            print(f"  [{k}] {step}", file=out)
        while True:
            print("step> ", end="", file=out, flush=True)
            line = inp.readline()
            if not line or line.strip() in ("q", "quit"):
                return None
            text = line.strip() or "0"
            if text.isdigit() and int(text) < len(steps):
                return int(text)
            print(f"  pick a number below {len(steps)}, or q", file=out)
    return choose


def cmd_run(path: str, scheduler: str = "random", seed: "int | None" = None,
            max_steps: int = DEFAULT_MAX_STEPS, step: bool = False, out=None, inp=None) -> Result:
    prog = _load("run", path)
    try:
        c = normalize(prog.main)
    except ClosedError as e:
        raise _Failed(Result("run", path, "error", e.diagnostics))
    if step:
        scheduler = "interactive"
    if scheduler == "random" and seed is None:
        seed = random.SystemRandom().randrange(2 ** 31)
    choose = _prompt(out or sys.stdout, inp or sys.stdin) if scheduler == "interactive" else None
    r = run(c, scheduler, seed, max_steps, choose)
    outcome = r.verdict
    verdict = {"ok": "ok", "blocked": "fail", "step-limit": "unknown"}[outcome]
    res = Result("run", path, verdict, step_limit=r.step_limit)
    res.details = {"scheduler": scheduler, "seed": seed, "max_steps": max_steps, "outcome": outcome,
                   "states": r.states, "transitions": r.edges}
    if scheduler == "exhaustive":
        res.details["terminals"] = [str(t) for t in r.terminals]
        res.details["blocked"] = [str(t) for t in r.blocked]
        res.lines.append(f"explored {r.states} configurations, {r.edges} transitions")
        res.lines.append(f"{len(r.terminals)} terminal configuration{'s' if len(r.terminals) != 1 else ''}, "
                         f"{len(r.blocked)} with blocked threads")
        for t in r.terminals:
            mark = "blocked" if t in r.blocked else "done"
            res.lines.append(f"  [{mark}] {t}")
    else:
        res.trace = [str(s) for s in r.trace]
        if seed is not None:
            res.lines.append(f"seed: {seed}")
        res.lines += res.trace
        res.lines.append(f"final: {r.final}")
        res.details["final"] = str(r.final)
    if r.step_limit:
        res.lines.append(f"stopped after {max_steps} steps")
    res.lines.append(f"outcome: {outcome}")
    return res


# ---------------------------------------------------------------- corpus annotations


_EXPECT = re.compile(r"^//\s*expect:\s*(\w+)((?:\s+--\S+)*)\s*=>\s*(.+?)\s*$")


def annotations(path: Path) -> list[tuple[str, list, str]]:
    """(command, flags, expected result) for every `// expect:` line."""
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        m = _EXPECT.match(line.strip())
        if m:
            out.append((m[1], m[2].split(), m[3]))
    return out


def summarize(res: Result) -> str:
    """The short result an annotation is compared against."""
    d = res.details
    if res.verdict == "error":
        return "error"
    if res.command == "beh":
        return f"finite {d['states']}" if d["finite"] else "infinite"
    if res.command == "strategy":
        lf = f"lf {d['lf']['status']}"
        if d["lf"]["crcps"]:
            lf += f" {len(d['lf']['crcps'])}"
        return f"tf {d['tf']['status']}, {lf}"
    if res.command == "run":
        return d["outcome"]
    return res.verdict


def matches(expected: str, got: str, command: str) -> bool:
    if command == "beh":
        e, g = expected.split(), got.split()
        return e[0] == g[0] and (len(e) == 1 or e[1:] == g[1:])
    if command == "strategy":
        have = dict(part.strip().split(" ", 1) for part in got.split(","))
        for part in expected.split(","):
            name, want = part.strip().split(" ", 1)
            status = have.get(name, "")
            if want.split()[0] != status.split()[0]:
                return False
            if len(want.split()) > 1 and want.split()[1:] != status.split()[1:]:
                return False
        return True
    return expected == got


def cmd_corpus(directory: "str | None" = None) -> Result:
    root = Path(directory) if directory else corpus_dir()
    rows = []
    for f in sorted(root.glob("*.mpst")):
        for command, flags, expected in annotations(f):
            args = _parser().parse_args([command, str(f), *flags])
            res = _dispatch(args)
            got = summarize(res)
            ok = matches(expected, got, command)
            rows.append({"file": f.name, "command": " ".join([command, *flags]), "expected": expected,
                         "got": got, "pass": ok})
    failed = [r for r in rows if not r["pass"]]
    res = Result("corpus", str(root), "fail" if failed else "ok")
    res.details = {"checks": rows}
    for r in rows:
        res.lines.append(f"{'PASS' if r['pass'] else 'FAIL'} {r['file']}: {r['command']} => {r['expected']}"
                         + ("" if r["pass"] else f" (got {r['got']})"))
    res.lines.append(f"{len(rows) - len(failed)}/{len(rows)} expectations met")
    return res


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpstbang", description="Typecheck, analyse and run MPST! programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="print a JSON result")

    c = sub.add_parser("check", help="typecheck a program against a runtime property")
    c.add_argument("file")
    c.add_argument("--property", default="safety", choices=PROPERTIES)
    c.add_argument("--budget", type=int, default=None, help="behavioural-set state budget")
    common(c)

    b = sub.add_parser("beh", help="explore the behavioural set of a protocol")
    b.add_argument("file")
    b.add_argument("--budget", type=int, default=None)
    b.add_argument("--protocol", default=None, help="protocol name (default: the first one)")
    b.add_argument("--graph", action="store_true", help="print the communication graph")
    common(b)

    s = sub.add_parser("strategy", help="syntactic finiteness strategies")
    s.add_argument("file")
    s.add_argument("--mode", default="exact", choices=MODES)
    s.add_argument("--protocol", default=None)
    common(s)

    r = sub.add_parser("run", help="execute the main process")
    r.add_argument("file")
    r.add_argument("--scheduler", default="random", choices=("exhaustive", "random"))
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    r.add_argument("--step", action="store_true", help="choose every step interactively")
    common(r)

    k = sub.add_parser("corpus", help="check every expect annotation of a corpus directory")
    k.add_argument("directory", nargs="?", default=None)
    common(k)
    return ap


def _dispatch(args) -> Result:
    start = time.perf_counter()
    try:
        if args.command == "check":
            res = cmd_check(args.file, args.property, args.budget)
        elif args.command == "beh":
            res = cmd_beh(args.file, args.budget, args.protocol, args.graph)
        elif args.command == "strategy":
            res = cmd_strategy(args.file, args.mode, args.protocol)
        elif args.command == "run":
            res = cmd_run(args.file, args.scheduler, args.seed, args.max_steps, args.step)
        else:
            res = cmd_corpus(args.directory)
    except _Failed as e:
        res = e.result
    res.timing_ms = (time.perf_counter() - start) * 1000
    return res


def main(argv: "list[str] | None" = None) -> int:
    args = _parser().parse_args(argv)
    res = _dispatch(args)
    if args.json:
        print(json.dumps(res.as_json(), ensure_ascii=False, indent=2))
    else:
        print(res.render())
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
