from dataclasses import dataclass, field
from typing import List

from dicke.token import Token
from dicke.token_type import TokenType


@dataclass(frozen=True)
class Diagnostic:
    line: int
    where: str
    message: str

    def __str__(self) -> str:
        return f"[line {self.line}] Error{self.where}: {self.message}"


class ConfigError(Exception):
    """A config file could not be turned into a RunConfig."""

    def __init__(self, diagnostics: List[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class Reporter:
    """
    Collects config diagnostics from every stage of loading.

    Scanner, parser, evaluator and resolver all report here instead of raising
    on the first problem, so a single run lists everything wrong with a file.
    """

    diagnostics: List[Diagnostic] = field(default_factory=list)

    @property
    def had_error(self) -> bool:
        return bool(self.diagnostics)

    def error(self, line: int, message: str) -> None:
        """Report a problem with a line number but no token context."""
        self.report(line, "", message)

    def token_error(self, token: Token, message: str) -> None:
        if token.type == TokenType.EOF:
            self.report(token.line, " at end", message)
        elif token.type == TokenType.NEWLINE:
            self.report(token.line, " at end of line", message)
        else:
            self.report(token.line, f" at '{token.lexeme}'", message)

    def key_error(self, line: int, key: str, message: str) -> None:
        self.report(line, f" in key '{key}'", message)

    def report(self, line: int, where: str, message: str) -> None:
        self.diagnostics.append(Diagnostic(line, where, message))

    def raise_if_errors(self) -> None:
        if self.diagnostics:
            raise ConfigError(list(self.diagnostics))
