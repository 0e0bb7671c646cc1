from __future__ import annotations

import pytest

from mpstbang.cli import _dispatch, _parser, annotations, matches, summarize
from mpstbang import parse
from mpstbang.printer import show_program

from conftest import CORPUS, CORPUS_FILES, load

CASES = [(name, command, flags, expected)
         for name in CORPUS_FILES for command, flags, expected in annotations(CORPUS / name)]


def test_every_file_is_annotated():
    annotated = {name for name, *_ in CASES}
    assert annotated == set(CORPUS_FILES)


@pytest.mark.parametrize("name,command,flags,expected", CASES,
                         ids=[f"{n}:{c}{''.join(fl)}" for n, c, fl, _ in CASES])
def test_annotation(name, command, flags, expected):
    res = _dispatch(_parser().parse_args([command, str(CORPUS / name), *flags]))
    got = summarize(res)
    assert matches(expected, got, command), f"expected {expected!r}, got {got!r}"


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_corpus_programs_print_stably(name):
    prog = load(name)
    assert show_program(parse(show_program(prog))) == show_program(prog)
