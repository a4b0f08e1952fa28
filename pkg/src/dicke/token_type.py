from enum import Enum, auto, unique


# @unique catches members that accidentally share a value. auto() never does
# that, but the decorator documents the intent.
@unique
class TokenType(Enum):
    # Single-character tokens
    LEFT_PAREN = auto()
    RIGHT_PAREN = auto()
    COMMA = auto()
    MINUS = auto()
    PLUS = auto()
    SLASH = auto()
    STAR = auto()
    CARET = auto()
    EQUAL = auto()

    # Entries are line based, so the end of a line is a token of its own
    NEWLINE = auto()

    # Literals
    IDENTIFIER = auto()
    STRING = auto()
    NUMBER = auto()

    # "2pi": angular frequency of one MHz, so "2pi*16" is 2π×16 MHz
    TWO_PI = auto()

    # Keywords
    TRUE = auto()
    FALSE = auto()

    EOF = auto()
