import math
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, List, Mapping, Tuple

from dicke.builtins import NativeFunction, builtin_environment
from dicke.diagnostics import Reporter
from dicke.environment import Environment
from dicke.expr import (
    Binary,
    Call,
    Expr,
    ExprVisitor,
    Grouping,
    Literal,
    Unary,
    Variable,
)
from dicke.parser import Entry
from dicke.printer import ExprPrinter
from dicke.token import Token
from dicke.token_type import TokenType

# Larger integer powers fall back to floats
MAX_EXACT_BITS = 128


class EvaluationError(Exception):
    """Config evaluation error with associated token for error reporting."""

    def __init__(self, token: Token, message: str):
        super().__init__(message)
        self.token = token


@dataclass(frozen=True)
class Word:
    """A bare, undefined name given as the value of a symbolic key."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Binding:
    key: str
    line: int
    values: Tuple[Any, ...]
    source: str

    @property
    def value(self) -> Any:
        """The single value, or the whole tuple for list-valued keys."""
        if len(self.values) == 1:
            return self.values[0]
        return self.values


class Evaluator(ExprVisitor[Any]):
    """Evaluates config entries in file order."""

    def __init__(
        self,
        reporter: Reporter | None = None,
        symbolic_keys: FrozenSet[str] = frozenset(),
        defaults: Mapping[str, Any] | None = None,
    ):
        self.reporter = reporter if reporter is not None else Reporter()
        self.symbolic_keys = symbolic_keys
        self.globals = builtin_environment()
        enclosing = self.globals
        if defaults:
            # Default key values sit between the built-ins and the file
            enclosing = Environment(self.globals)
            for name, value in defaults.items():
                enclosing.define(name, value)
        self.environment = Environment(enclosing)
        self.printer = ExprPrinter()

    def evaluate(self, entries: List[Entry]) -> Dict[str, Binding]:
        """
        Returns:
            Every entry that evaluated cleanly, keyed by name in file order.
            Entries that fail are reported and left out; later entries that
            refer to them report an undefined name.
        """
        bindings: Dict[str, Binding] = {}
        for entry in entries:
            key = entry.key.lexeme
            if key in bindings or self.environment.is_defined_here(key):
                previous = bindings.get(key)
                where = f" on line {previous.line}" if previous else ""
                self.reporter.token_error(entry.key, f"Key already set{where}.")
                continue
            try:
                values = tuple(self._value(key, expr) for expr in entry.values)
            except EvaluationError as error:
                self.reporter.token_error(error.token, str(error))
                continue

            source = ", ".join(self.printer.print(expr) for expr in entry.values)
            binding = Binding(key, entry.line, values, source)
            bindings[key] = binding
            self.environment.define(key, binding.value)
        return bindings

    def _value(self, key: str, expr: Expr) -> Any:
        if key in self.symbolic_keys and isinstance(expr, Variable):
            try:
                return self.environment.get(expr.name)
            except EvaluationError:
                return Word(expr.name.lexeme)
        return self._evaluate(expr)

    def visit_literal(self, expr: Literal) -> Any:
        """Return the literal's value directly."""
        return expr.value

    def visit_grouping(self, expr: Grouping) -> Any:
        """Evaluate the expression inside the grouping."""
        return self._evaluate(expr.expression)

    def visit_unary(self, expr: Unary) -> Any:
        """Evaluate unary operations (-, +)."""
        right = self._evaluate(expr.right)
        self._check_number_operand(expr.operator, right)

        match expr.operator.type:
            case TokenType.MINUS:
                return -right
            case TokenType.PLUS:
                return right

        # Unreachable
        return None

    def visit_binary(self, expr: Binary) -> Any:
        """
        Evaluate binary operations (+, -, *, /, ^). Integers stay exact
        under +, - and * and under ^ with a small non-negative exponent.
        """
        left = self._evaluate(expr.left)
        right = self._evaluate(expr.right)
        self._check_number_operands(expr.operator, left, right)

        try:
            match expr.operator.type:
                case TokenType.MINUS:
                    return left - right
                case TokenType.PLUS:
                    return left + right
                case TokenType.STAR:
                    return left * right
                case TokenType.SLASH:
                    if right == 0:
                        raise EvaluationError(expr.operator, "Division by zero.")
                    return left / right
                case TokenType.CARET:
                    return self._power(expr.operator, left, right)
        except OverflowError:
            raise EvaluationError(expr.operator, "Value overflows.") from None

        # Unreachable
        return None

    @staticmethod
    def _power(operator: Token, left: Any, right: Any) -> Any:
        exact = isinstance(left, int) and isinstance(right, int)
        if exact and 0 <= right and left.bit_length() * right <= MAX_EXACT_BITS:
            return left**right
        try:
            return math.pow(left, right)
        except (ValueError, ZeroDivisionError):
            raise EvaluationError(operator, "Power is not a real number.") from None
        except OverflowError:
            raise EvaluationError(operator, "Power overflows.") from None

    def visit_variable(self, expr: Variable) -> Any:
        return self.environment.get(expr.name)

    def visit_call(self, expr: Call) -> Any:
        callee = self._evaluate(expr.callee)

        arguments = []
        for argument in expr.arguments:
            arguments.append(self._evaluate(argument))

        if not isinstance(callee, NativeFunction):
            raise EvaluationError(expr.paren, "Can only call functions.")

        function = callee
        if len(arguments) != function.arity():
            raise EvaluationError(
                expr.paren,
                f"Expected {function.arity()} arguments but got {len(arguments)}.",
            )
        for argument in arguments:
            self._check_number_operand(expr.paren, argument)

        try:
            return function.call(self, arguments)
        except (ValueError, OverflowError):
            raise EvaluationError(
                expr.paren, f"Argument out of domain for {function}."
            ) from None

    def _evaluate(self, expr: Expr) -> Any:
        return expr.accept(self)

    @staticmethod
    def _is_number(value: Any) -> bool:
        # bool is an int subclass; true/false are not numbers here
        return isinstance(value, (int, float)) and not isinstance(value, bool)

    def _check_number_operand(self, operator: Token, operand: Any) -> None:
        if self._is_number(operand):
            return
        raise EvaluationError(operator, "Operand must be a number.")

    def _check_number_operands(self, operator: Token, left: Any, right: Any) -> None:
        if self._is_number(left) and self._is_number(right):
            return
        raise EvaluationError(operator, "Operands must be numbers.")
