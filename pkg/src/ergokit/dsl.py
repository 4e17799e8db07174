"""A small expression language for scalar fields on R^d.

Grammar, loosest binding first::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?          # right-associative
    atom    := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Names are the variables ``x1 .. xd`` and ``t``; callable names are ``exp``,
``log``, ``sqrt``, ``abs``, ``tanh``, ``pow`` (two arguments) and ``min`` /
``max`` (two or more). Evaluation is vectorized over an ``(N, d)`` array of
points and raises :class:`~ergokit.errors.DomainError` instead of returning
NaN or infinity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import DimensionError, DomainError, ParseError

FUNCTIONS = {
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
    "abs": (1, 1),
    "tanh": (1, 1),
    "pow": (2, 2),
    "min": (2, None),
    "max": (2, None),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int  # 0-based column of x; -1 for t


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple["Node", ...]


Node = Union[Num, Var, Neg, BinOp, Call]


def _tokenize(source):
    tokens = []
    pos = 0
    while True:
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            rest = source[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ParseError(f"unexpected character {source[bad]!r}", source, bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, d):
        self.source = source
        self.d = d
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def error(self, message, offset=None):
        if offset is None:
            offset = self.peek()[2]
        return ParseError(message, self.source, offset)

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.peek()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise self.error(f"expected {value!r}, found {found}")
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, text, _ = self.peek()
        if kind != "end":
            raise self.error(f"unexpected {text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, off = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                return self.call(text, off)
            return self.variable(text, off)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise self.error(f"expected a number, name or '(', found {found}", off)

    def variable(self, name, off):
        if name == "t":
            return Var("t", -1)
        m = re.fullmatch(r"x([1-9]\d*)", name)
        if m is None:
            if name in FUNCTIONS:
                raise self.error(f"function {name!r} needs arguments", off)
            raise self.error(f"unknown identifier {name!r}", off)
        k = int(m.group(1))
        if k > self.d:
            raise self.error(f"variable {name} exceeds dimension {self.d}", off)
        return Var(name, k - 1)

    def call(self, name, off):
        if name not in FUNCTIONS:
            raise self.error(f"unknown function {name!r}", off)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.advance()
            args.append(self.expr())
        self.expect(")")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else f"at least {lo}"
            raise self.error(f"{name} takes {want} arguments, got {len(args)}", off)
        return Call(name, tuple(args))


def _checked(values, what):
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{what} produced a non-finite value")
    return values


def _pow(a, b):
    a, b = np.broadcast_arrays(a, b)
    if np.any((a < 0) & (b != np.round(b))):
        raise DomainError("negative base raised to a non-integer power")
    if np.any((a == 0) & (b < 0)):
        raise DomainError("zero raised to a negative power")
    with np.errstate(over="ignore"):
        return _checked(np.power(a, b), "power")


def _log(a):
    if np.any(a <= 0):
        raise DomainError("log of a nonpositive number")
    return np.log(a)


def _sqrt(a):
    if np.any(a < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(a)


def _div(a, b):
    if np.any(b == 0):
        raise DomainError("division by zero")
    return _checked(a / b, "division")


def _exp(a):
    with np.errstate(over="ignore"):
        return _checked(np.exp(a), "exp")


_CALLS = {
    "exp": _exp,
    "log": _log,
    "sqrt": _sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "pow": _pow,
    "min": lambda *a: np.minimum.reduce(np.broadcast_arrays(*a)),
    "max": lambda *a: np.maximum.reduce(np.broadcast_arrays(*a)),
}


def _is_constant(node):
    if isinstance(node, Num):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, Neg):
        return _is_constant(node.operand)
    if isinstance(node, BinOp):
        return _is_constant(node.left) and _is_constant(node.right)
    return all(_is_constant(a) for a in node.args)


_NAMESPACE = {
    "_div": _div,
    "_pow": _pow,
    **{f"_{name}": fn for name, fn in _CALLS.items()},
}


def _codegen(node, consts):
    """Python source for ``node`` in terms of ``X`` and ``t``; constant subtrees are folded."""
    if _is_constant(node) and not isinstance(node, Num):
        try:
            value = _eval_constant(node)
        except DomainError:
            value = None  # left unfolded so the error surfaces at evaluation
        if value is not None:
            consts.append(value)
            return f"_k{len(consts) - 1}"
    if isinstance(node, Num):
        consts.append(node.value)
        return f"_k{len(consts) - 1}"
    if isinstance(node, Var):
        return "t" if node.index < 0 else f"X[:, {node.index}]"
    if isinstance(node, Neg):
        return f"(-{_codegen(node.operand, consts)})"
    if isinstance(node, BinOp):
        a, b = _codegen(node.left, consts), _codegen(node.right, consts)
        if node.op == "/":
            return f"_div({a}, {b})"
        if node.op == "^":
            return f"_pow({a}, {b})"
        return f"({a} {node.op} {b})"
    args = ", ".join(_codegen(a, consts) for a in node.args)
    return f"_{node.name}({args})"


def _compile(node):
    consts = []
    body = _codegen(node, consts) if not _is_constant(node) else None
    if body is None:
        # constant expression: evaluate once through the generic path
        try:
            value = _eval_constant(node)
        except DomainError as exc:
            error = exc

            def fail(X, t):
                raise DomainError(str(error))

            return fail
        return lambda X, t: np.full(X.shape[0], value)
    ns = dict(_NAMESPACE, np=np, **{f"_k{i}": v for i, v in enumerate(consts)})
    code = f"def _f(X, t):\n    return {body}\n"
    exec(compile(code, "<ergokit-dsl>", "exec"), ns)
    fn = ns["_f"]

    def run(X, t):
        out = fn(X, float(t))
        if np.ndim(out) == 0:
            return np.full(X.shape[0], float(out))
        return out

    return run


def _eval_constant(node):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg):
        return -_eval_constant(node.operand)
    if isinstance(node, BinOp):
        a, b = np.float64(_eval_constant(node.left)), np.float64(_eval_constant(node.right))
        with np.errstate(over="ignore", invalid="ignore"):
            if node.op == "+":
                v = a + b
            elif node.op == "-":
                v = a - b
            elif node.op == "*":
                v = a * b
            elif node.op == "/":
                v = _div(a, b)
            else:
                v = _pow(a, b)
        return float(_checked(np.asarray(v), "constant"))
    return float(_CALLS[node.name](*(np.float64(_eval_constant(a)) for a in node.args)))


class Expr:
    """A parsed expression over ``x1 .. xd`` and ``t``."""

    def __init__(self, tree: Node, d: int, source: str = ""):
        self.tree = tree
        self.d = d
        self.source = source
        self._fn = _compile(tree)

    def __repr__(self):
        return f"Expr({to_source(self.tree)!r}, d={self.d})"

    def __eq__(self, other):
        return isinstance(other, Expr) and self.tree == other.tree and self.d == other.d

    def __hash__(self):
        return hash((self.tree, self.d))

    def __call__(self, points, t=0.0) -> np.ndarray:
        """Evaluate at an ``(N, d)`` array of points; returns ``N`` values."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        if X.shape[1] != self.d:
            raise DimensionError(f"expression has dimension {self.d}, points have {X.shape[1]}")
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._fn(X, t)
        return _checked(np.asarray(out, dtype=float), "expression")

    @property
    def is_constant(self) -> bool:
        return _is_constant(self.tree)

    def raw(self, X, t=0.0):
        """Unchecked evaluation on a validated ``(N, d)`` array, for inner loops."""
        return self._fn(X, t)


def parse(source: str, d: int) -> Expr:
    if d < 0:
        raise DimensionError("dimension must be nonnegative")
    return Expr(_Parser(source, d).parse(), d, source)


def evaluate(e: Expr, x, t: float = 0.0) -> float:
    """Value of ``e`` at a single point ``x`` of length ``d``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != e.d:
        raise DimensionError(f"point has dimension {x.size}, expression expects {e.d}")
    return float(e(x[None, :], t)[0])


def differentiate_fd(e: Expr, x, i: int, h: float) -> float:
    """Central difference ``(e(x + h e_i) - e(x - h e_i)) / 2h`` in variable ``x<i>`` (1-based)."""
    if not 1 <= i <= e.d:
        raise DimensionError(f"variable index {i} outside 1..{e.d}")
    x = np.asarray(x, dtype=float).reshape(-1)
    step = np.zeros_like(x)
    step[i - 1] = h
    return (evaluate(e, x + step) - evaluate(e, x - step)) / (2 * h)


def to_source(node: Node) -> str:
    """Fully parenthesized source text; ``parse(to_source(tree))`` rebuilds ``tree``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
