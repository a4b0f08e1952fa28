from dataclasses import dataclass
from typing import Any

from dicke.token_type import TokenType


# frozen=True makes tokens hashable and immutable once scanned.
@dataclass(frozen=True)
class Token:
    type: TokenType
    lexeme: str  # The config text this token was scanned from
    literal: Any  # Value for NUMBER, STRING and TWO_PI tokens
    line: int  # Line of the config file the token appears on

    def __str__(self) -> str:
        return f"{self.type} {self.lexeme} {self.literal}"
