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


class ExprPrinter(ExprVisitor[str]):
    """
    Prints an expression back as config source.

    Output is normalized (one space around binary operators, none inside
    parentheses) so the printed form is stable regardless of how the file was
    spaced. Literals keep their original lexeme, so `2pi*16` prints as written
    rather than as 100530964.9...
    """

    def print(self, expr: Expr) -> str:
        return expr.accept(self)

    def visit_call(self, expr: Call) -> str:
        args = ", ".join(map(self.print, expr.arguments))
        return f"{self.print(expr.callee)}({args})"

    def visit_binary(self, expr: Binary) -> str:
        operator = expr.operator.lexeme
        # Powers bind tightest and read better unspaced: g^2
        if operator == "^":
            return f"{self.print(expr.left)}^{self.print(expr.right)}"
        return f"{self.print(expr.left)} {operator} {self.print(expr.right)}"

    def visit_grouping(self, expr: Grouping) -> str:
        return f"({self.print(expr.expression)})"

    def visit_literal(self, expr: Literal) -> str:
        if expr.token is not None:
            return expr.token.lexeme
        if isinstance(expr.value, bool):
            # str(True) evaluates to "True"
            return str(expr.value).lower()
        if isinstance(expr.value, str):
            return f'"{expr.value}"'
        return repr(expr.value)

    def visit_unary(self, expr: Unary) -> str:
        return f"{expr.operator.lexeme}{self.print(expr.right)}"

    def visit_variable(self, expr: Variable) -> str:
        return expr.name.lexeme
