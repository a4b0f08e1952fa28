from dataclasses import dataclass
from typing import Callable, List

from dicke.diagnostics import Reporter
from dicke.expr import Binary, Call, Expr, Grouping, Literal, Unary, Variable
from dicke.token import Token
from dicke.token_type import TokenType


class ParseError(Exception):
    """Raised inside the parser to unwind to the next entry."""

    pass


@dataclass(frozen=True)
class Entry:
    key: Token
    values: List[Expr]

    @property
    def line(self) -> int:
        return self.key.line


class Parser:
    """
    A recursive descent parser for config files.

    Grammar:

    config      -> ( entry? NEWLINE )* EOF ;
    entry       -> IDENTIFIER "=" value ;
    value       -> expression ( "," expression )* ;

    expression  -> term ;
    term        -> factor ( ( "-" | "+" ) factor )* ;
    factor      -> unary ( ( "/" | "*" ) unary )* ;
    unary       -> ( "-" | "+" ) unary | power ;
    power       -> call ( "^" unary )? ;
    call        -> primary ( "(" arguments? ")" )* ;
    arguments   -> expression ( "," expression )* ;
    primary     -> NUMBER | STRING | "2pi" | "true" | "false"
                | "(" expression ")" | IDENTIFIER ;
    """

    def __init__(self, tokens: List[Token], reporter: Reporter | None = None):
        self.tokens = tokens
        self.reporter = reporter if reporter is not None else Reporter()
        self.current = 0

    def parse(self) -> List[Entry]:
        """
        Returns:
            The entries of the file in order. Entries with syntax errors are
            reported and skipped.
        """
        entries: List[Entry] = []
        while not self.is_at_end():
            if self.match(TokenType.NEWLINE):
                continue
            entry = self.entry()
            if entry is not None:
                entries.append(entry)
        return entries

    def entry(self) -> Entry | None:
        # A bad line should not hide problems on the following lines, so
        # recover at the next newline
        try:
            key = self.consume(TokenType.IDENTIFIER, "Expect key name.")
            self.consume(TokenType.EQUAL, "Expect '=' after key name.")
            values = self.value()
            self.consume(TokenType.NEWLINE, "Expect end of line after value.")
            return Entry(key, values)
        except ParseError:
            self.synchronize()
            return None

    def value(self) -> List[Expr]:
        values = [self.expression()]
        while self.match(TokenType.COMMA):
            values.append(self.expression())
        return values

    def expression(self) -> Expr:
        """Lowest precedence level"""
        return self.term()

    def term(self) -> Expr:
        """+, -"""
        return self.left_associative(self.factor, TokenType.MINUS, TokenType.PLUS)

    def factor(self) -> Expr:
        """*, /"""
        return self.left_associative(self.unary, TokenType.SLASH, TokenType.STAR)

    def left_associative(
        self, operand: Callable[[], Expr], *operators: TokenType
    ) -> Expr:
        expr = operand()
        while self.match(*operators):
            expr = Binary(expr, self.previous(), operand())
        return expr

    def unary(self) -> Expr:
        """- or +"""
        if self.match(TokenType.MINUS, TokenType.PLUS):
            operator = self.previous()
            right = self.unary()
            return Unary(operator, right)

        return self.power()

    def power(self) -> Expr:
        """^, right associative and tighter than unary minus on its left"""
        expr = self.call()

        if self.match(TokenType.CARET):
            operator = self.previous()
            right = self.unary()
            expr = Binary(expr, operator, right)

        return expr

    def call(self) -> Expr:
        expr = self.primary()

        while self.match(TokenType.LEFT_PAREN):
            expr = self.finish_call(expr)

        return expr

    def finish_call(self, callee: Expr) -> Expr:
        arguments = []
        if not self.check(TokenType.RIGHT_PAREN):
            while True:
                arguments.append(self.expression())
                if not self.match(TokenType.COMMA):
                    break

        paren = self.consume(TokenType.RIGHT_PAREN, "Expect ')' after arguments.")

        return Call(callee, paren, tuple(arguments))

    def primary(self) -> Expr:
        """literals, names, parentheses"""
        if self.match(TokenType.FALSE):
            return Literal(False, self.previous())
        if self.match(TokenType.TRUE):
            return Literal(True, self.previous())

        if self.match(TokenType.NUMBER, TokenType.STRING, TokenType.TWO_PI):
            return Literal(self.previous().literal, self.previous())

        if self.match(TokenType.IDENTIFIER):
            return Variable(self.previous())

        if self.match(TokenType.LEFT_PAREN):
            expr = self.expression()
            self.consume(TokenType.RIGHT_PAREN, "Expect ')' after expression.")
            return Grouping(expr)

        raise self.error(self.peek(), "Expect expression.")

    def match(self, *token_types: TokenType) -> bool:
        """Consumes token if check succeeds"""
        for token_type in token_types:
            if self.check(token_type):
                self.advance()
                return True
        return False

    def consume(self, token_type: TokenType, message: str) -> Token:
        if self.check(token_type):
            return self.advance()

        raise self.error(self.peek(), message)

    def check(self, token_type: TokenType) -> bool:
        """Doesn't consume token if check succeeds"""
        if self.is_at_end():
            return False
        return self.peek().type == token_type

    def advance(self) -> Token:
        """Consume the current token and return it."""
        if not self.is_at_end():
            self.current += 1
        return self.previous()

    def is_at_end(self) -> bool:
        return self.peek().type == TokenType.EOF

    def peek(self) -> Token:
        """Return the current token without consuming it."""
        return self.tokens[self.current]

    def previous(self) -> Token:
        """Return the most recently consumed token."""
        return self.tokens[self.current - 1]

    def synchronize(self) -> None:
        """Discard tokens up to and including the end of the current line."""
        while not self.is_at_end():
            if self.advance().type == TokenType.NEWLINE:
                return

    def error(self, token: Token, message: str) -> ParseError:
        self.reporter.token_error(token, message)
        return ParseError()
