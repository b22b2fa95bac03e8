"""A small expression language for defining fields in config files.

Source text is one expression, or a parenthesized comma-separated list of
component expressions: ``( -y, x )``.  Grammar (see docs/dsl_grammar.md for
the EBNF):

* numeric literals (integer, decimal, scientific notation)
* variables ``x1 .. xn``, with aliases ``x, y, z`` when the dimension is <= 3
* constants ``pi`` and ``lambda``; ``lambda`` resolves to the ambient scale
  at evaluation time, so one source string can be re-instantiated per sweep
  scale
* binary ``+ - * / ^`` with standard precedence (``^`` right-associative and
  tighter than unary minus), unary ``-``, parentheses
* functions ``sin cos tan exp log sqrt abs floor`` (one argument each)

Parsing is a handwritten recursive descent; errors carry byte offsets and
the expected-token set, and the message text is stable so golden tests can
assert on it.  Evaluation is pure: the same (point, scale) always produces
bit-identical output.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ArityMismatch, DomainError, FieldSyntaxError, UnknownIdentifier
from .order import Scale

CLASSICAL_FIELD = "classical_field"
DISPLACEMENT_MAP = "displacement_map"
SCALAR_PROBE = "scalar_probe"
TRANSITION = "transition"
KINDS = (CLASSICAL_FIELD, DISPLACEMENT_MAP, SCALAR_PROBE, TRANSITION)

FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
    "floor": math.floor,
}
CONSTANTS = ("pi", "lambda")
_ALIASES = ("x", "y", "z")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Var:
    index: int
    name: str
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Const:
    name: str
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    span: tuple = (0, 0)


Expr = (Num, Var, Const, Unary, Bin, Call)


@dataclass(frozen=True)
class FieldDef:
    """A parsed field: ``dimension`` input variables, one expression per component."""

    dimension: int
    components: tuple
    kind: str = CLASSICAL_FIELD
    source: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        want = 1 if self.kind == SCALAR_PROBE else self.dimension
        if len(self.components) != want:
            raise ArityMismatch(
                f"expected {want} components, got {len(self.components)}"
            )
        object.__setattr__(
            self, "_compiled", tuple(_compile(c, self.source) for c in self.components)
        )


# ---------------------------------------------------------------------------
# Tokenizer

_NUMBER = re.compile(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_OPS = ("+", "-", "*", "/", "^", "(", ")", ",")


def _tokenize(src: str):
    tokens = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER.match(src, i)
        if m:
            tokens.append(("number", m.group(), i))
            i = m.end()
            continue
        m = _IDENT.match(src, i)
        if m:
            tokens.append(("ident", m.group(), i))
            i = m.end()
            continue
        if ch in _OPS:
            tokens.append((ch, ch, i))
            i += 1
            continue
        raise FieldSyntaxError(
            f"syntax error at offset {i}: unexpected character {ch!r}",
            offset=i,
            expected=("number", "identifier", "operator"),
        )
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            self.fail((kind,))
        return self.next()

    def fail(self, expected):
        tok = self.peek()
        raise FieldSyntaxError(
            f"syntax error at offset {tok[2]}: expected {', '.join(sorted(expected))}",
            offset=tok[2],
            expected=expected,
        )

    # expr := term (("+"|"-") term)*
    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.next()[0]
            rhs = self.term()
            node = Bin(op, node, rhs, (node.span[0], rhs.span[1]))
        return node

    # term := unary (("*"|"/") unary)*
    def term(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.next()[0]
            rhs = self.unary()
            node = Bin(op, node, rhs, (node.span[0], rhs.span[1]))
        return node

    # unary := "-" unary | power      (so ^ binds tighter: -x^2 == -(x^2))
    def unary(self):
        if self.peek()[0] == "-":
            start = self.next()[2]
            operand = self.unary()
            return Unary("-", operand, (start, operand.span[1]))
        return self.power()

    # power := atom ("^" unary)?      (right-associative, exponent may be signed)
    def power(self):
        node = self.atom()
        if self.peek()[0] == "^":
            self.next()
            rhs = self.unary()
            node = Bin("^", node, rhs, (node.span[0], rhs.span[1]))
        return node

    def atom(self):
        kind, text, off = self.peek()
        if kind == "number":
            self.next()
            return Num(float(text), (off, off + len(text)))
        if kind == "ident":
            self.next()
            if self.peek()[0] == "(":
                return self.call(text, off)
            return Var(-1, text, (off, off + len(text)))  # resolved later
        if kind == "(":
            self.next()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(("number", "identifier", "'('"))

    def call(self, name, off):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == ",":
            self.next()
            args.append(self.expr())
        end = self.expect(")")
        if name not in FUNCTIONS:
            raise UnknownIdentifier(
                f"unknown identifier '{name}' at offset {off}", name=name, offset=off
            )
        if len(args) != 1:
            raise ArityMismatch(
                f"function '{name}' takes 1 argument, got {len(args)}",
                name=name,
                offset=off,
            )
        return Call(name, args[0], (off, end[2] + 1))


def _resolve_vars(node, dimension: int, src: str):
    """Map identifier leaves to variable indices or constants."""
    if isinstance(node, Var) and node.index < 0:
        name = node.name
        if name in CONSTANTS:
            return Const(name, node.span)
        if name in _ALIASES and dimension <= 3:
            idx = _ALIASES.index(name)
            if idx < dimension:
                return Var(idx, name, node.span)
        m = re.fullmatch(r"x(\d+)", name)
        if m:
            idx = int(m.group(1)) - 1
            if 0 <= idx < dimension:
                return Var(idx, name, node.span)
        raise UnknownIdentifier(
            f"unknown identifier '{name}' at offset {node.span[0]}",
            name=name,
            offset=node.span[0],
        )
    if isinstance(node, Unary):
        return Unary(node.op, _resolve_vars(node.operand, dimension, src), node.span)
    if isinstance(node, Bin):
        return Bin(
            node.op,
            _resolve_vars(node.left, dimension, src),
            _resolve_vars(node.right, dimension, src),
            node.span,
        )
    if isinstance(node, Call):
        return Call(node.func, _resolve_vars(node.arg, dimension, src), node.span)
    return node


def parse(source: str, dimension: int | None = None, kind: str = CLASSICAL_FIELD) -> FieldDef:
    """Parse source text into a FieldDef.

    When ``dimension`` is omitted it is inferred from the component count
    (scalar probes infer dimension from the highest variable used).
    """
    p = _Parser(source)
    components = []
    if p.peek()[0] == "(":
        # lookahead: a parenthesized list is a component tuple, unless it
        # closes as a single parenthesized expression used as the whole body
        p.next()
        components.append(p.expr())
        while p.peek()[0] == ",":
            p.next()
            components.append(p.expr())
        p.expect(")")
        p.expect("end")
    else:
        components.append(p.expr())
        p.expect("end")

    if dimension is None:
        if kind == SCALAR_PROBE:
            dimension = _max_var_index(components, source) + 1 or 1
        else:
            dimension = len(components)
    resolved = tuple(_resolve_vars(c, dimension, source) for c in components)
    return FieldDef(dimension=dimension, components=resolved, kind=kind, source=source)


def _max_var_index(components, src):
    best = 0

    def walk(node):
        nonlocal best
        if isinstance(node, Var):
            name = node.name
            if name in _ALIASES:
                best = max(best, _ALIASES.index(name) + 1)
            else:
                m = re.fullmatch(r"x(\d+)", name)
                if m:
                    best = max(best, int(m.group(1)))
        elif isinstance(node, Unary):
            walk(node.operand)
        elif isinstance(node, Bin):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Call):
            walk(node.arg)

    for c in components:
        walk(c)
    return max(best - 1, 0)


# ---------------------------------------------------------------------------
# Evaluation (compiled once per FieldDef into closures)


def _sub_src(span, src):
    s = src[span[0]:span[1]] if src else ""
    return s if s else "<expression>"


def _compile(node, src):
    if isinstance(node, Num):
        v = node.value
        return lambda coords, lam: v
    if isinstance(node, Var):
        i = node.index
        return lambda coords, lam: coords[i]
    if isinstance(node, Const):
        if node.name == "pi":
            return lambda coords, lam: math.pi
        return lambda coords, lam: lam
    if isinstance(node, Unary):
        f = _compile(node.operand, src)
        return lambda coords, lam: -f(coords, lam)
    if isinstance(node, Bin):
        lf = _compile(node.left, src)
        rf = _compile(node.right, src)
        op = node.op
        text = _sub_src(node.span, src)
        if op == "+":
            return lambda coords, lam: lf(coords, lam) + rf(coords, lam)
        if op == "-":
            return lambda coords, lam: lf(coords, lam) - rf(coords, lam)
        if op == "*":
            return lambda coords, lam: lf(coords, lam) * rf(coords, lam)
        if op == "/":

            def div(coords, lam):
                d = rf(coords, lam)
                if d == 0:
                    raise DomainError(f"division by zero in '{text}'", text)
                return lf(coords, lam) / d

            return div

        def power(coords, lam):
            try:
                r = lf(coords, lam) ** rf(coords, lam)
            except (ValueError, ZeroDivisionError, OverflowError) as e:
                raise DomainError(f"undefined power in '{text}'", text) from e
            if isinstance(r, complex):
                raise DomainError(f"undefined power in '{text}'", text)
            return r

        return power
    if isinstance(node, Call):
        f = _compile(node.arg, src)
        fn = FUNCTIONS[node.func]
        text = _sub_src(node.span, src)

        def call(coords, lam):
            try:
                return fn(f(coords, lam))
            except (ValueError, OverflowError) as e:
                raise DomainError(f"undefined value in '{text}'", text) from e

        return call
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(fdef: FieldDef, point, scale: Scale) -> np.ndarray:
    """Evaluate all components at a point; ``lambda`` takes the scale's value."""
    coords = tuple(float(c) for c in np.asarray(point).ravel())
    if len(coords) != fdef.dimension:
        raise ValueError(
            f"point has dimension {len(coords)}, field expects {fdef.dimension}"
        )
    lam = scale.lam_float
    return np.array([f(coords, lam) for f in fdef._compiled], dtype=float)


def evaluate_scalar(fdef: FieldDef, point, scale: Scale) -> float:
    if fdef.kind != SCALAR_PROBE:
        raise ValueError("evaluate_scalar expects a scalar_probe FieldDef")
    return float(evaluate(fdef, point, scale)[0])


# ---------------------------------------------------------------------------
# Printing (fully parenthesized; parse(to_source(d)) evaluates identically)


def _fmt(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Unary):
        return f"(-{_fmt(node.operand)})"
    if isinstance(node, Bin):
        return f"({_fmt(node.left)} {node.op} {_fmt(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def to_source(fdef: FieldDef) -> str:
    inner = ", ".join(_fmt(c) for c in fdef.components)
    return f"( {inner} )"
