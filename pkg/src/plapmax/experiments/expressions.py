"""Small arithmetic grammar for weights and loads given as text.

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are the coordinates ``x`` and ``y``, the constants ``pi`` and ``e``,
and the functions in ``FUNCTIONS``. Expressions evaluate element-wise on
numpy arrays of node coordinates.
"""

from __future__ import annotations

import re
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from plapmax.errors import ExpressionError

_TOKEN = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "step": lambda t: np.heaviside(t, 0.5),
}
CONSTANTS = {"pi": np.pi, "e": np.e}
VARIABLES = ("x", "y")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    position: int


def tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    stripped = source.rstrip()
    while pos < len(stripped):
        match = _TOKEN.match(stripped, pos)
        if match is None or match.end() == pos:
            bad = len(stripped) - len(stripped[pos:].lstrip())
            raise ExpressionError(
                f"Unexpected character {stripped[bad]!r}",
                details={"expression": source, "position": bad},
            )
        kind = match.lastgroup or "op"
        tokens.append(_Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    return tokens


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------

Coordinates = dict[str, np.ndarray]


@dataclass(frozen=True)
class Number:
    value: float

    def evaluate(self, env: Coordinates) -> np.ndarray:
        return np.asarray(self.value, dtype=float)


@dataclass(frozen=True)
class Variable:
    name: str

    def evaluate(self, env: Coordinates) -> np.ndarray:
        return env[self.name]


@dataclass(frozen=True)
class Negate:
    operand: Node

    def evaluate(self, env: Coordinates) -> np.ndarray:
        return -self.operand.evaluate(env)


@dataclass(frozen=True)
class Binary:
    op: str
    left: Node
    right: Node

    def evaluate(self, env: Coordinates) -> np.ndarray:
        a, b = self.left.evaluate(env), self.right.evaluate(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return np.power(a, b)


@dataclass(frozen=True)
class Call:
    function: str
    argument: Node

    def evaluate(self, env: Coordinates) -> np.ndarray:
        return FUNCTIONS[self.function](self.argument.evaluate(env))


Node = Number | Variable | Negate | Binary | Call


class _Parser:
    def __init__(self, source: str) -> None:
        self.source = source
        self.tokens = tokenize(source)
        self.index = 0
        self.variables: set[str] = set()

    def error(self, message: str, token: _Token | None = None) -> ExpressionError:
        position = token.position if token else len(self.source)
        return ExpressionError(message, details={"expression": self.source, "position": position})

    def peek(self) -> _Token | None:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def accept(self, *ops: str) -> _Token | None:
        token = self.peek()
        if token is not None and token.kind == "op" and token.text in ops:
            self.index += 1
            return token
        return None

    def expect(self, op: str) -> None:
        if self.accept(op) is None:
            raise self.error(f"Expected '{op}'", self.peek())

    def parse(self) -> Node:
        if not self.tokens:
            raise self.error("Empty expression")
        node = self.expr()
        leftover = self.peek()
        if leftover is not None:
            raise self.error(f"Unexpected token {leftover.text!r}", leftover)
        return node

    def expr(self) -> Node:
        node = self.term()
        while (token := self.accept("+", "-")) is not None:
            node = Binary(token.text, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while (token := self.accept("*", "/")) is not None:
            node = Binary(token.text, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-") is not None:
            return Negate(self.unary())
        if self.accept("+") is not None:
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^") is not None:
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        token = self.peek()
        if token is None:
            raise self.error("Unexpected end of expression")
        self.index += 1
        if token.kind == "number":
            return Number(float(token.text))
        if token.kind == "name":
            name = token.text
            if name in FUNCTIONS:
                self.expect("(")
                argument = self.expr()
                self.expect(")")
                return Call(name, argument)
            if name in CONSTANTS:
                return Number(CONSTANTS[name])
            if name in VARIABLES:
                self.variables.add(name)
                return Variable(name)
            raise self.error(f"Unknown name '{name}'", token)
        if token.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"Unexpected token {token.text!r}", token)


@dataclass(frozen=True)
class Expression:
    source: str
    tree: Node
    variables: frozenset[str]

    def __call__(self, x: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        env: Coordinates = {"x": x}
        if y is not None:
            env["y"] = np.asarray(y, dtype=float)
        elif "y" in self.variables:
            raise ExpressionError(
                "Expression uses 'y' on a one-dimensional domain",
                details={"expression": self.source},
            )
        with np.errstate(all="ignore"):
            values = np.broadcast_to(self.tree.evaluate(env), x.shape).astype(float)
        if not np.all(np.isfinite(values)):
            raise ExpressionError(
                "Expression is not finite at every node", details={"expression": self.source}
            )
        return values


def parse_expression(source: str) -> Expression:
    parser = _Parser(source)
    tree = parser.parse()
    return Expression(source=source, tree=tree, variables=frozenset(parser.variables))
