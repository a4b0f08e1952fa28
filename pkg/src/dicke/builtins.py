import math
from abc import ABC, abstractmethod
from typing import Any, Callable, List

from dicke.environment import Environment


class NativeFunction(ABC):
    @abstractmethod
    # evaluator is an Evaluator; not imported here to keep evaluator.py free to
    # import this module
    def call(self, evaluator, arguments: List[Any]) -> Any:
        pass

    @abstractmethod
    def arity(self) -> int:
        pass


class MathFunction(NativeFunction):
    """A one-argument real function such as sqrt or exp."""

    def __init__(self, name: str, function: Callable[[float], float]):
        self.name = name
        self.function = function

    def call(self, evaluator, arguments: List[Any]) -> float:
        # math raises ValueError on domain errors (sqrt(-1), log(0)) and
        # OverflowError on exp(1000); the evaluator turns both into diagnostics
        return float(self.function(float(arguments[0])))

    def arity(self) -> int:
        return 1

    def __str__(self) -> str:
        return f"<native fn {self.name}>"


CONSTANTS = {
    "pi": math.pi,
    "MHz": 1e6,
    "kHz": 1e3,
    "us": 1e-6,
    "ns": 1e-9,
    "um": 1e-6,
    "nm": 1e-9,
}

FUNCTIONS = {
    "sqrt": math.sqrt,
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
}


def builtin_environment() -> Environment:
    """A fresh scope holding every built-in constant and function."""
    environment = Environment()
    for name, value in CONSTANTS.items():
        environment.define(name, value)
    for name, function in FUNCTIONS.items():
        environment.define(name, MathFunction(name, function))
    return environment
