import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dicke.diagnostics import Reporter
from dicke.model import TWO_PI_MHZ
from dicke.scanner import Scanner
from dicke.token_type import TokenType


def scan(source: str):
    reporter = Reporter()
    tokens = Scanner(source, reporter).scan_tokens()
    return tokens, reporter


def types(source: str):
    tokens, _ = scan(source)
    return [token.type for token in tokens]


class TestScanner:
    def test_empty_source(self) -> None:
        tokens, reporter = scan("")
        assert [t.type for t in tokens] == [TokenType.NEWLINE, TokenType.EOF]
        assert not reporter.had_error

    def test_single_character_tokens(self) -> None:
        assert types("(),-+*/^=") == [
            TokenType.LEFT_PAREN,
            TokenType.RIGHT_PAREN,
            TokenType.COMMA,
            TokenType.MINUS,
            TokenType.PLUS,
            TokenType.STAR,
            TokenType.SLASH,
            TokenType.CARET,
            TokenType.EQUAL,
            TokenType.NEWLINE,
            TokenType.EOF,
        ]

    # Exclude surrogate code points
    @given(st.text(alphabet=st.characters(blacklist_categories=("Cs",))))
    def test_scanner_handles_arbitrary_input(self, source: str) -> None:
        """Property: the scanner reports problems but never raises."""
        tokens, _ = scan(source)
        assert tokens[-1].type == TokenType.EOF
        assert tokens[-2].type == TokenType.NEWLINE

    def test_entry(self) -> None:
        tokens, _ = scan("delta_L = 20*g\n")
        assert [t.type for t in tokens] == [
            TokenType.IDENTIFIER,
            TokenType.EQUAL,
            TokenType.NUMBER,
            TokenType.STAR,
            TokenType.IDENTIFIER,
            TokenType.NEWLINE,
            TokenType.EOF,
        ]
        assert tokens[0].lexeme == "delta_L"
        assert tokens[2].literal == 20.0

    def test_two_pi_is_one_token(self) -> None:
        tokens, _ = scan("g = 2pi*16")
        assert tokens[2].type == TokenType.TWO_PI
        assert tokens[2].lexeme == "2pi"
        assert tokens[2].literal == TWO_PI_MHZ == 2 * math.pi * 1e6

    def test_two_pi_needs_a_word_boundary(self) -> None:
        # "2pix" is the number 2 followed by the name "pix"
        assert types("2pix")[:2] == [TokenType.NUMBER, TokenType.IDENTIFIER]

    @pytest.mark.parametrize(
        "source, value",
        [
            ("123", 123.0),
            ("123.45", 123.45),
            (".5", 0.5),
            ("1e6", 1e6),
            ("2.5E-3", 2.5e-3),
            ("7e+2", 700.0),
        ],
    )
    def test_number_literals(self, source: str, value: float) -> None:
        tokens, reporter = scan(source)
        assert tokens[0].type == TokenType.NUMBER
        assert tokens[0].literal == value
        assert not reporter.had_error

    def test_whole_numbers_stay_exact(self) -> None:
        tokens, _ = scan("9007199254740993 2.0 1e3")
        assert tokens[0].literal == 2**53 + 1
        assert isinstance(tokens[0].literal, int)
        assert isinstance(tokens[1].literal, float)
        assert isinstance(tokens[2].literal, float)

    def test_exponent_without_digits_is_a_name(self) -> None:
        assert types("3e")[:2] == [TokenType.NUMBER, TokenType.IDENTIFIER]

    def test_dotted_identifier(self) -> None:
        tokens, _ = scan("grid.g_over_kappa = 1, 100, 100")
        assert tokens[0].type == TokenType.IDENTIFIER
        assert tokens[0].lexeme == "grid.g_over_kappa"

    def test_keywords(self) -> None:
        assert types("oracle = true, false")[:5] == [
            TokenType.IDENTIFIER,
            TokenType.EQUAL,
            TokenType.TRUE,
            TokenType.COMMA,
            TokenType.FALSE,
        ]

    def test_string_literal(self) -> None:
        tokens, _ = scan('note = "Hello, cavity"')
        assert tokens[2].type == TokenType.STRING
        assert tokens[2].literal == "Hello, cavity"

    def test_comments(self) -> None:
        tokens, _ = scan("# a comment\nn = 3  # trailing\n")
        assert [t.type for t in tokens] == [
            TokenType.NEWLINE,
            TokenType.IDENTIFIER,
            TokenType.EQUAL,
            TokenType.NUMBER,
            TokenType.NEWLINE,
            TokenType.EOF,
        ]

    def test_line_numbers(self) -> None:
        tokens, _ = scan("n = 3\n\nm = 1")
        lines = {t.lexeme: t.line for t in tokens if t.type == TokenType.IDENTIFIER}
        assert lines == {"n": 1, "m": 3}

    def test_unexpected_character(self) -> None:
        tokens, reporter = scan("n = 3\nm = @1")
        assert [str(d) for d in reporter.diagnostics] == [
            "[line 2] Error: Unexpected character '@'."
        ]
        # Scanning goes on after the error
        assert tokens[-3].type == TokenType.NUMBER

    def test_unterminated_string(self) -> None:
        _, reporter = scan('note = "open\nn = 3')
        assert [str(d) for d in reporter.diagnostics] == [
            "[line 1] Error: Unterminated string."
        ]
