"""Boolean condition language for operational events.

Grammar::

    expr       := and_expr ("or" and_expr)*
    and_expr   := not_expr ("and" not_expr)*
    not_expr   := "not" not_expr | comparison
    comparison := operand (("==" | "!=" | "<" | "<=" | ">" | ">=") operand)?
    operand    := literal | name | "(" expr ")"
    name       := IDENT | ("agent" | "dest") "." IDENT

Bare names and ``agent.x`` read the source agent's knowledge, ``dest.x`` the
destination's. A missing variable makes every comparison involving it false.
Expressions are parsed once at scenario load.
"""

import operator
import re
from dataclasses import dataclass

from app.core.errors import ConfigError

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<number>-?\d+(?:\.\d+)?)
      | (?P<string>"[^"]*"|'[^']*')
      | (?P<op>==|!=|<=|>=|<|>|\(|\))
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)?)
    )""",
    re.VERBOSE,
)

_COMPARE = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_KEYWORDS = {"and", "or", "not", "true", "false"}
_MISSING = object()


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    column: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    stripped = source.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if not m or m.end() == pos:
            raise ConfigError(f"condition {source!r}: unexpected character at column {pos + 1}")
        kind = m.lastgroup
        text = m.group(kind)
        column = m.start(kind) + 1
        if kind == "name" and text in _KEYWORDS:
            kind = text
        tokens.append(Token(kind, text, column))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0

    def error(self, message: str):
        column = self.tokens[self.pos].column if self.pos < len(self.tokens) else len(self.source) + 1
        return ConfigError(f"condition {self.source!r}: {message} at column {column}")

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        if tok and tok.kind == kind and (text is None or tok.text == text):
            self.pos += 1
            return True
        return False

    def parse(self):
        if not self.tokens:
            raise self.error("empty condition")
        node = self.expr()
        if self.peek() is not None:
            raise self.error(f"unexpected {self.peek().text!r}")
        return node

    def expr(self):
        node = self.and_expr()
        while self.take("or"):
            node = ("or", node, self.and_expr())
        return node

    def and_expr(self):
        node = self.not_expr()
        while self.take("and"):
            node = ("and", node, self.not_expr())
        return node

    def not_expr(self):
        if self.take("not"):
            return ("not", self.not_expr())
        return self.comparison()

    def comparison(self):
        left = self.operand()
        tok = self.peek()
        if tok and tok.kind == "op" and tok.text in _COMPARE:
            self.pos += 1
            return ("cmp", tok.text, left, self.operand())
        return left

    def operand(self):
        tok = self.peek()
        if tok is None:
            raise self.error("expression ends early")
        self.pos += 1
        if tok.kind == "number":
            return ("lit", float(tok.text) if "." in tok.text else int(tok.text))
        if tok.kind == "string":
            return ("lit", tok.text[1:-1])
        if tok.kind in ("true", "false"):
            return ("lit", tok.kind == "true")
        if tok.kind == "name":
            scope, _, var = tok.text.rpartition(".")
            if scope not in ("", "agent", "dest"):
                self.pos -= 1
                raise self.error(f"unknown scope {scope!r}")
            return ("var", "dest" if scope == "dest" else "agent", var)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            if not self.take("op", ")"):
                raise self.error("missing ')'")
            return node
        self.pos -= 1
        raise self.error(f"unexpected {tok.text!r}")


def _normalize(value):
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    return value


class Condition:
    def __init__(self, source: str):
        self.source = source
        self.tree = _Parser(source).parse()

    def variables(self) -> set[tuple[str, str]]:
        found = set()

        def walk(node):
            if node[0] == "var":
                found.add((node[1], node[2]))
            elif node[0] in ("and", "or"):
                walk(node[1])
                walk(node[2])
            elif node[0] == "not":
                walk(node[1])
            elif node[0] == "cmp":
                walk(node[2])
                walk(node[3])

        walk(self.tree)
        return found

    def evaluate(self, agent: dict, dest: dict | None = None) -> bool:
        scopes = {"agent": agent, "dest": dest or {}}

        def value(node):
            if node[0] == "lit":
                return node[1]
            if node[0] == "var":
                return _normalize(scopes[node[1]].get(node[2], _MISSING))
            return truth(node)

        def truth(node) -> bool:
            tag = node[0]
            if tag == "or":
                return truth(node[1]) or truth(node[2])
            if tag == "and":
                return truth(node[1]) and truth(node[2])
            if tag == "not":
                return not truth(node[1])
            if tag == "cmp":
                left, right = value(node[2]), value(node[3])
                if left is _MISSING or right is _MISSING:
                    return False
                try:
                    return bool(_COMPARE[node[1]](left, right))
                except TypeError:
                    return False
            v = value(node)
            return v is not _MISSING and bool(v)

        return truth(self.tree)

    def __repr__(self) -> str:
        return f"Condition({self.source!r})"


def compile_condition(source: str | None) -> Condition | None:
    if source is None or not source.strip():
        return None
    return Condition(source)
