"""Arithmetic expressions for problem coefficients.

A small recursive-descent parser over a hand-written tokenizer. Expressions
range over the variables ``x``, ``u`` and ``eps`` and support

    + - * / ^      (^ binds tightest and is right-associative)
    unary -        (binds looser than ^, so -2^2 == -4)
    exp ln sqrt sin cos abs

Evaluation is vectorised: bindings may be floats or numpy arrays. Domain
violations (ln of a non-positive number, division by zero, 0^negative,
overflow) raise :class:`DomainError` instead of producing inf/nan.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import (
    DomainError,
    EvaluationError,
    ExprSyntaxError,
    MissingBindingError,
    UnknownFunctionError,
    UnknownIdentifierError,
)

VARIABLES = frozenset({"x", "u", "eps"})
FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos", "abs")
# produced by differentiate() only, never accepted by the parser
_INTERNAL_FUNCTIONS = ("sign",)

_OP_NAMES = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}


# --------------------------------------------------------------------------
# tree nodes


@dataclass(frozen=True)
class Num:
    value: float

    def sexpr(self):
        v = self.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


@dataclass(frozen=True)
class Var:
    name: str

    def sexpr(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: "Node"

    def sexpr(self):
        return f"neg({self.operand.sexpr()})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def sexpr(self):
        return f"{_OP_NAMES[self.op]}({self.left.sexpr()}, {self.right.sexpr()})"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"

    def sexpr(self):
        return f"call({self.func}, {self.arg.sexpr()})"


Node = Union[Num, Var, Neg, BinOp, Call]


def _collect_vars(node, out):
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg):
        _collect_vars(node.operand, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Call):
        _collect_vars(node.arg, out)
    return out


class Expression:
    """An immutable parsed formula."""

    __slots__ = ("_root", "_source", "_free_vars")

    def __init__(self, root: Node, source: str | None = None):
        object.__setattr__(self, "_root", root)
        object.__setattr__(self, "_source", source if source is not None else to_source(root))
        object.__setattr__(self, "_free_vars", frozenset(_collect_vars(root, set())))

    def __setattr__(self, name, value):
        raise AttributeError("Expression is immutable")

    @property
    def root(self) -> Node:
        return self._root

    @property
    def source(self) -> str:
        return self._source

    @property
    def free_vars(self) -> frozenset:
        return self._free_vars

    def sexpr(self) -> str:
        return self._root.sexpr()

    def evaluate(self, bindings=None, **kwargs):
        return evaluate(self, {**(bindings or {}), **kwargs})

    def __call__(self, **bindings):
        return evaluate(self, bindings)

    def __eq__(self, other):
        return isinstance(other, Expression) and self._root == other._root

    def __hash__(self):
        return hash(self._root)

    def __repr__(self):
        return f"Expression({self._source!r})"

    def __str__(self):
        return self._source

    def __reduce__(self):
        return (parse, (self._source,))


# --------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "ident" | "op" | "end"
    text: str
    pos: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", len(source)))
    return tokens


# --------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, message, tok=None):
        tok = tok or self.tok
        if tok.kind == "end":
            message = f"{message}: unexpected end of input"
        else:
            message = f"{message}: unexpected {tok.text!r}"
        return ExprSyntaxError(message, tok.pos, self.source)

    def expect(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            return self.advance()
        raise self.error(f"expected {text!r}")

    def at_op(self, *ops):
        return self.tok.kind == "op" and self.tok.text in ops

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error("trailing input")
        return node

    def expr(self):
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.at_op("-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.at_op("^"):
            self.advance()
            # right operand may itself carry a unary minus: 2^-1
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.at_op("("):
                if tok.text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {tok.text!r}", tok.pos, self.source)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                raise self.error(f"function {tok.text!r} needs an argument")
            if tok.text not in VARIABLES:
                raise UnknownIdentifierError(f"unknown identifier {tok.text!r}", tok.pos, self.source)
            return Var(tok.text)
        if self.at_op("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise self.error("expected a number, variable, function call or '('")


def parse(source: str) -> Expression:
    """Parse ``source`` into an :class:`Expression`.

    >>> parse("exp(-x) + u^2").sexpr()
    'add(call(exp, neg(x)), pow(u, 2))'
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source if isinstance(source, str) else "")
    return Expression(_Parser(source).parse(), source)


def as_expression(value) -> Expression:
    """Accept an Expression, a formula string or a plain number."""
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Expression(Num(float(value)))
    return parse(value)


# --------------------------------------------------------------------------
# evaluation


def _check(result, what):
    if not np.all(np.isfinite(result)):
        raise DomainError(f"non-finite result in {what}")
    return result


def _eval(node, env):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        op = node.op
        if op == "+":
            return _check(a + b, "+")
        if op == "-":
            return _check(a - b, "-")
        if op == "*":
            return _check(a * b, "*")
        if op == "/":
            if np.any(b == 0):
                raise DomainError("division by zero")
            return _check(a / b, "/")
        # power
        if np.any((a == 0) & (b < 0)):
            raise DomainError("zero raised to a negative power")
        if np.any((a < 0) & (b != np.floor(b))):
            raise DomainError("negative base with non-integer exponent")
        return _check(np.power(a, b), "^")
    if isinstance(node, Call):
        v = _eval(node.arg, env)
        f = node.func
        if f == "exp":
            return _check(np.exp(v), "exp")
        if f == "ln":
            if np.any(v <= 0):
                raise DomainError("ln of a non-positive argument")
            return np.log(v)
        if f == "sqrt":
            if np.any(v < 0):
                raise DomainError("sqrt of a negative argument")
            return np.sqrt(v)
        if f == "sin":
            return np.sin(v)
        if f == "cos":
            return np.cos(v)
        if f == "abs":
            return np.abs(v)
        if f == "sign":
            return np.sign(v)
    raise EvaluationError(f"cannot evaluate node {node!r}")


def evaluate(expr: Expression, bindings: Mapping[str, object]):
    """Evaluate ``expr``. Returns a float for scalar bindings, else an array
    broadcast to the common shape of the bound arrays."""
    env = {}
    shapes = []
    for name in expr.free_vars:
        if name not in bindings:
            raise MissingBindingError(f"no value bound for {name!r}")
    for name, value in bindings.items():
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim:
            shapes.append(arr.shape)
        env[name] = arr if arr.ndim else np.float64(arr)
    with np.errstate(all="ignore"):
        result = _check(_eval(expr.root, env), "expression")
    if not shapes:
        return float(result)
    return np.broadcast_to(result, np.broadcast_shapes(*shapes)).astype(np.float64)


def derivative_at(expr: Expression, var: str, bindings: Mapping[str, float]) -> float:
    """Approximate d(expr)/d(var) by a central difference.

    The step is ``max(1e-6, 1e-6*|var|)``. Accuracy is roughly 1e-10 relative
    for smooth expressions; this is meant for sampling-based assumption
    checks, not for anything inside a scheme (see :func:`differentiate`).
    """
    if var not in expr.free_vars:
        evaluate(expr, bindings)
        return 0.0
    x0 = float(bindings[var])
    h = max(1e-6, 1e-6 * abs(x0))
    hi = evaluate(expr, {**bindings, var: x0 + h})
    lo = evaluate(expr, {**bindings, var: x0 - h})
    return (hi - lo) / (2.0 * h)


def derivative_array(expr: Expression, var: str, bindings: Mapping[str, object]) -> np.ndarray:
    """Vectorised :func:`derivative_at` with the same step rule per sample."""
    if var not in expr.free_vars:
        value = evaluate(expr, bindings)
        return np.zeros_like(np.asarray(value, dtype=np.float64))
    x0 = np.asarray(bindings[var], dtype=np.float64)
    h = np.maximum(1e-6, 1e-6 * np.abs(x0))
    hi = evaluate(expr, {**bindings, var: x0 + h})
    lo = evaluate(expr, {**bindings, var: x0 - h})
    return (hi - lo) / (2.0 * h)


# --------------------------------------------------------------------------
# symbolic differentiation (tree rewriting, only trivial folding)

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _is_num(node, value=None):
    return isinstance(node, Num) and (value is None or node.value == value)


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return _ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return _ZERO
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _depends(node, var):
    return var in _collect_vars(node, set())


def _d(node, var):
    if isinstance(node, Num):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == var else _ZERO
    if isinstance(node, Neg):
        return _neg(_d(node.operand, var))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _d(a, var), _d(b, var)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        if node.op == "/":
            return _div(_sub(_mul(da, b), _mul(a, db)), BinOp("^", b, Num(2.0)))
        # a^b
        if not _depends(b, var):
            if _is_num(b):
                lowered = Num(b.value - 1.0)
            else:
                lowered = BinOp("-", b, _ONE)
            return _mul(_mul(b, BinOp("^", a, lowered)), da)
        # general case d(a^b) = a^b * (b' ln a + b a'/a)
        return _mul(node, _add(_mul(db, Call("ln", a)), _div(_mul(b, da), a)))
    if isinstance(node, Call):
        a = node.arg
        da = _d(a, var)
        if _is_num(da, 0.0):
            return _ZERO
        f = node.func
        if f == "exp":
            outer = node
        elif f == "ln":
            return _div(da, a)
        elif f == "sqrt":
            return _div(da, _mul(Num(2.0), node))
        elif f == "sin":
            outer = Call("cos", a)
        elif f == "cos":
            outer = _neg(Call("sin", a))
        elif f == "abs":
            outer = Call("sign", a)
        else:
            return _ZERO  # sign: derivative zero almost everywhere
        return _mul(outer, da)
    raise EvaluationError(f"cannot differentiate node {node!r}")


def differentiate(expr: Expression, var: str) -> Expression:
    """Exact derivative tree of ``expr`` with respect to ``var``."""
    return Expression(_d(expr.root, var))


# --------------------------------------------------------------------------
# printing


def _fmt_num(value):
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def to_source(node) -> str:
    """Fully parenthesised text that :func:`parse` maps back to the same tree."""
    if isinstance(node, Expression):
        node = node.root
    if isinstance(node, Num):
        if node.value < 0 or math.copysign(1.0, node.value) < 0:
            return f"(-{_fmt_num(-node.value)})"
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        if node.func in _INTERNAL_FUNCTIONS:
            # sign(a) has no surface syntax; a/abs(a) agrees wherever a != 0
            return f"({to_source(node.arg)} / abs({to_source(node.arg)}))"
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")
