"""A tiny arithmetic language for declaring happiness functions.

Grammar (standard precedence, left-associative binary operators)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | IDENT | "(" expr ")"
             | "ind" "(" expr CMP expr ")"
             | "eq" "(" IDENT "," STRING ")"
    CMP     := "<" | "<=" | "==" | ">=" | ">"

Identifiers are ``yhat``, ``y``, ``z`` or feature names from a schema.
Evaluation is vectorised: identifiers may be bound to numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

RESERVED = ("yhat", "y", "z")
KEYWORDS = ("ind", "eq")
COMPARATORS = ("<", "<=", "==", ">=", ">")


class ExprError(ValueError):
    """Base class for parse and evaluation errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    pass


class ExprTypeError(ExprError):
    pass


class MissingFeatureError(ExprError, KeyError):
    def __str__(self):
        return ValueError.__str__(self)


class ExprEvalError(ExprError):
    pass


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Ind:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Eq:
    feature: str
    category: str


Expr = Union[Num, Ident, BinOp, Neg, Ind, Eq]


# -- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<op><=|>=|==|[-+*/(),<>])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int  # UTF-8 byte offset into the source


def _byte_offset(text, index):
    return len(text[:index].encode("utf-8"))


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    # end of input is reported right after the last non-blank character
    tokens.append(_Token("eof", "", _byte_offset(text, len(text.rstrip()))))
    return tokens


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, text, schema):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.schema = schema

    @property
    def tok(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        if self.tok.text != text or self.tok.kind not in ("op",):
            self.fail(f"expected {text!r}")
        return self.advance()

    def fail(self, what):
        tok = self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ExprSyntaxError(f"{what}, found {found}", tok.offset)

    def parse(self):
        node = self.expr()
        if self.tok.kind != "eof":
            self.fail("expected operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            if tok.text == "ind":
                return self.indicator()
            if tok.text == "eq":
                return self.category_test()
            self.advance()
            self.check_numeric(tok)
            return Ident(tok.text)
        self.fail("expected a number, identifier or '('")

    def indicator(self):
        self.advance()
        self.expect("(")
        left = self.expr()
        if not (self.tok.kind == "op" and self.tok.text in COMPARATORS):
            self.fail("expected a comparison operator")
        op = self.advance().text
        right = self.expr()
        self.expect(")")
        return Ind(op, left, right)

    def category_test(self):
        self.advance()
        self.expect("(")
        tok = self.tok
        if tok.kind != "ident" or tok.text in RESERVED + KEYWORDS:
            self.fail("expected a categorical feature name")
        self.advance()
        if self.schema is not None:
            if tok.text not in self.schema:
                raise UnknownIdentifierError(f"unknown feature {tok.text!r} at offset {tok.offset}")
            categories = self.schema[tok.text]
            if categories is None:
                raise ExprTypeError(f"eq() needs a categorical feature, {tok.text!r} is numeric")
        self.expect(",")
        if self.tok.kind != "string":
            self.fail("expected a quoted category")
        raw = self.advance().text
        category = re.sub(r"\\(.)", r"\1", raw[1:-1])
        if self.schema is not None and category not in self.schema[tok.text]:
            raise ExprTypeError(f"{category!r} is not a category of {tok.text!r}")
        self.expect(")")
        return Eq(tok.text, category)

    def check_numeric(self, tok):
        name = tok.text
        if name in KEYWORDS:
            self.fail(f"{name} must be called")
        if name in RESERVED or self.schema is None:
            return
        if name not in self.schema:
            raise UnknownIdentifierError(f"unknown identifier {name!r} at offset {tok.offset}")
        if self.schema[name] is not None:
            raise ExprTypeError(
                f"categorical feature {name!r} used arithmetically; use eq({name}, \"...\")"
            )


def parse(text: str, schema: Mapping[str, tuple | None] | None = None) -> Expr:
    """Parse ``text`` into an AST.

    ``schema`` maps feature names to ``None`` (numeric) or a tuple of
    categories. When it is ``None`` no identifier checking is done.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, schema).parse()


# -- rendering ---------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _render_number(value):
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    return text


def render(node: Expr) -> str:
    """Render an AST back to source text, with only the parentheses needed."""
    return _render(node, 0)


def _render(node, min_prec):
    if isinstance(node, Num):
        return _render_number(node.value)
    if isinstance(node, Ident):
        return node.name
    if isinstance(node, Eq):
        escaped = node.category.replace("\\", "\\\\").replace('"', '\\"')
        return f'eq({node.feature}, "{escaped}")'
    if isinstance(node, Ind):
        return f"ind({_render(node.left, 0)} {node.op} {_render(node.right, 0)})"
    if isinstance(node, Neg):
        text = "-" + _render(node.operand, 3)
        return f"({text})" if min_prec > 2 else text
    prec = _PREC[node.op]
    # right operand binds tighter to keep left associativity
    text = f"{_render(node.left, prec)} {node.op} {_render(node.right, prec + 1)}"
    return f"({text})" if prec < min_prec else text


# -- evaluation --------------------------------------------------------------


def identifiers(node: Expr) -> set:
    """Feature names referenced by ``node`` (excluding yhat, y, z)."""
    if isinstance(node, Ident):
        return set() if node.name in RESERVED else {node.name}
    if isinstance(node, Eq):
        return {node.feature}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return identifiers(node.operand)
    return identifiers(node.left) | identifiers(node.right)


_COMPARE = {
    "<": np.less,
    "<=": np.less_equal,
    "==": np.equal,
    ">=": np.greater_equal,
    ">": np.greater,
}


def evaluate(node: Expr, env: Mapping[str, object]):
    """Evaluate ``node`` with identifiers looked up in ``env``.

    Values may be scalars or numpy arrays; the result broadcasts accordingly.
    Division by zero raises :class:`ExprEvalError`.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Ident):
        try:
            return env[node.name]
        except KeyError:
            raise MissingFeatureError(f"missing feature {node.name!r}") from None
    if isinstance(node, Eq):
        try:
            column = env[node.feature]
        except KeyError:
            raise MissingFeatureError(f"missing feature {node.feature!r}") from None
        return np.asarray(np.asarray(column, dtype=object) == node.category, dtype=float)
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Ind):
        left = np.asarray(evaluate(node.left, env), dtype=float)
        right = np.asarray(evaluate(node.right, env), dtype=float)
        return _COMPARE[node.op](left, right).astype(float)
    left = evaluate(node.left, env)
    right = evaluate(node.right, env)
    if node.op == "+":
        return np.add(left, right)
    if node.op == "-":
        return np.subtract(left, right)
    if node.op == "*":
        return np.multiply(left, right)
    if np.any(np.asarray(right) == 0):
        raise ExprEvalError(f"division by zero in {render(node)!r}")
    return np.divide(left, right)
