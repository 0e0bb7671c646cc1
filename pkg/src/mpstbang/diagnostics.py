"""Position-carrying diagnostics shared by the parser, validator and checker."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    message: str
    pos: "tuple[int, int] | None" = None
    rule: "str | None" = None

    def render(self, file: str = "<input>") -> str:
        line, col = self.pos or (0, 0)
        tag = f"[{self.rule}] " if self.rule else ""
        return f"{file}:{line}:{col}: {tag}{self.message}"

    def as_json(self) -> dict:
        line, col = self.pos or (0, 0)
        return {"message": self.message, "line": line, "col": col, "rule": self.rule}


class ParseError(ValueError):
    """Raised with every diagnostic collected before giving up."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(d.render() for d in diagnostics))
