"""Syntax tree of config values. Nodes are immutable and compare by structure."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Generic, Tuple, TypeVar

from dicke.token import Token

R = TypeVar("R")


class Expr(ABC):
    @abstractmethod
    def accept(self, visitor: "ExprVisitor[R]") -> R: ...


@dataclass(frozen=True)
class Binary(Expr):
    left: Expr
    operator: Token
    right: Expr

    def accept(self, visitor: "ExprVisitor[R]") -> R:
        return visitor.visit_binary(self)


@dataclass(frozen=True)
class Grouping(Expr):
    expression: Expr

    def accept(self, visitor: "ExprVisitor[R]") -> R:
        return visitor.visit_grouping(self)


@dataclass(frozen=True)
class Literal(Expr):
    value: Any
    # Source token, so the printer echoes "2pi" rather than 6283185.307...
    token: Token | None = None

    def accept(self, visitor: "ExprVisitor[R]") -> R:
        return visitor.visit_literal(self)


@dataclass(frozen=True)
class Unary(Expr):
    operator: Token
    right: Expr

    def accept(self, visitor: "ExprVisitor[R]") -> R:
        return visitor.visit_unary(self)


@dataclass(frozen=True)
class Variable(Expr):
    name: Token

    def accept(self, visitor: "ExprVisitor[R]") -> R:
        return visitor.visit_variable(self)


@dataclass(frozen=True)
class Call(Expr):
    callee: Expr
    paren: Token  # closing paren, where arity errors are reported
    arguments: Tuple[Expr, ...]

    def accept(self, visitor: "ExprVisitor[R]") -> R:
        return visitor.visit_call(self)


class ExprVisitor(ABC, Generic[R]):
    """One method per node type; evaluation and printing implement it."""

    @abstractmethod
    def visit_binary(self, expr: Binary) -> R: ...

    @abstractmethod
    def visit_grouping(self, expr: Grouping) -> R: ...

    @abstractmethod
    def visit_literal(self, expr: Literal) -> R: ...

    @abstractmethod
    def visit_unary(self, expr: Unary) -> R: ...

    @abstractmethod
    def visit_variable(self, expr: Variable) -> R: ...

    @abstractmethod
    def visit_call(self, expr: Call) -> R: ...
