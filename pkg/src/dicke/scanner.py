from typing import Any, Dict, List

from dicke.diagnostics import Reporter
from dicke.model import TWO_PI_MHZ
from dicke.token import Token
from dicke.token_type import TokenType


class Scanner:
    keywords: Dict[str, TokenType] = {
        "true": TokenType.TRUE,
        "false": TokenType.FALSE,
    }

    def __init__(self, source: str, reporter: Reporter | None = None) -> None:
        self.source = source
        self.reporter = reporter if reporter is not None else Reporter()
        self.tokens: List[Token] = []
        self.start = 0
        self.current = 0
        self.line = 1

    def scan_tokens(self) -> List[Token]:
        while not self._is_at_end():
            # We are at the beginning of the next lexeme
            self.start = self.current
            self._scan_token()

        # A file without a trailing newline still ends its last entry
        if not self.tokens or self.tokens[-1].type != TokenType.NEWLINE:
            self.tokens.append(Token(TokenType.NEWLINE, "", None, self.line))
        self.tokens.append(Token(TokenType.EOF, "", None, self.line))
        return self.tokens

    def _scan_token(self) -> None:
        c = self._advance()
        match c:
            case "(":
                self._add_token(TokenType.LEFT_PAREN)
            case ")":
                self._add_token(TokenType.RIGHT_PAREN)
            case ",":
                self._add_token(TokenType.COMMA)
            case "-":
                self._add_token(TokenType.MINUS)
            case "+":
                self._add_token(TokenType.PLUS)
            case "*":
                self._add_token(TokenType.STAR)
            case "/":
                self._add_token(TokenType.SLASH)
            case "^":
                self._add_token(TokenType.CARET)
            case "=":
                self._add_token(TokenType.EQUAL)
            case "#":
                # A comment goes until the end of the line
                while self._peek() != "\n" and not self._is_at_end():
                    self._advance()
            case " " | "\r" | "\t":
                pass
            case "\n":
                self._add_token(TokenType.NEWLINE)
                self.line += 1
            case '"':
                self._string()
            case _:
                # isdigit() also accepts sub/superscript digits
                if "0" <= c <= "9" or (c == "." and self._is_digit(self._peek())):
                    self._number()
                elif c.isalpha() or c == "_":
                    self._identifier()
                else:
                    self.reporter.error(self.line, f"Unexpected character '{c}'.")

    def _string(self) -> None:
        while self._peek() != '"' and self._peek() != "\n" and not self._is_at_end():
            self._advance()

        # Strings never span lines: an entry is one line
        if self._peek() != '"':
            self.reporter.error(self.line, "Unterminated string.")
            return

        # The closing "
        self._advance()

        # Trim the surrounding quotes
        value = self.source[self.start + 1 : self.current - 1]
        self._add_token(TokenType.STRING, value)

    def _number(self) -> None:
        # The literal "2pi" is a unit, not the product 2 * pi
        if (
            self.source[self.start] == "2"
            and self.source.startswith("pi", self.current)
            and not self._is_identifier_char(self._peek_at(2))
        ):
            self.current += 2
            self._add_token(TokenType.TWO_PI, TWO_PI_MHZ)
            return

        while self._is_digit(self._peek()):
            self._advance()

        # Look for a fractional part
        if self._peek() == "." and self._is_digit(self._peek_next()):
            # Consume the '.'
            self._advance()
            while self._is_digit(self._peek()):
                self._advance()

        # Look for an exponent: 1e6, 2.5E-3
        if self._peek() in ("e", "E"):
            sign = 1 if self._peek_next() in ("+", "-") else 0
            if self._is_digit(self._peek_at(1 + sign)):
                self.current += 1 + sign
                while self._is_digit(self._peek()):
                    self._advance()

        text = self.source[self.start : self.current]
        # Whole numbers stay exact: seeds go up to 2^64
        value = int(text) if text.isdigit() else float(text)
        self._add_token(TokenType.NUMBER, value)

    def _identifier(self) -> None:
        # Maximal munch; dots group keys ("grid.n", "profile.w0")
        while self._is_identifier_char(self._peek()) or self._peek() == ".":
            self._advance()

        text = self.source[self.start : self.current]
        token_type = self.keywords.get(text, TokenType.IDENTIFIER)
        self._add_token(token_type)

    @staticmethod
    def _is_digit(c: str) -> bool:
        return "0" <= c <= "9" if c else False

    @staticmethod
    def _is_identifier_char(c: str) -> bool:
        return bool(c) and (c.isalnum() or c == "_")

    def _peek(self) -> str:
        if self._is_at_end():
            # '' is the sentinel; Python strings aren't null terminated
            return ""
        return self.source[self.current]

    def _peek_next(self) -> str:
        return self._peek_at(1)

    def _peek_at(self, offset: int) -> str:
        if self.current + offset >= len(self.source):
            return ""
        return self.source[self.current + offset]

    def _is_at_end(self) -> bool:
        return self.current >= len(self.source)

    def _advance(self) -> str:
        self.current += 1
        return self.source[self.current - 1]

    def _add_token(self, type: TokenType, literal: Any = None) -> None:
        text = self.source[self.start : self.current]
        self.tokens.append(Token(type, text, literal, self.line))
