"""Recursive-descent parser for symbol expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | NAME | NAME '(' [expr (',' expr)*] ')' | '(' expr ')'

Names are the variables allowed by the caller (``tau1``, ``tau2`` for twisted
symbols), the constants ``pi`` and ``e``, and any caller-supplied constants.
Functions are ``abs sin cos exp min max theta vartheta cone``; ``cone(c)``
takes a constant aperture and denotes the catalog cone symbol in ``tau1, tau2``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from ..cutoffs import theta, vartheta
from ..operators import SpatialSymbol, TwistedSymbol, _cone_terms, cone, constant_symbol

__all__ = [
    "ParseError",
    "UnknownIdentifierError",
    "Num",
    "Var",
    "Unary",
    "Binary",
    "Call",
    "Cone",
    "parse_expression",
    "compile_expression",
    "interpret",
    "parse_symbol_expression",
    "parse_spatial_expression",
]


class ParseError(ValueError):
    """Malformed expression; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    """An identifier that is neither a variable, a constant nor a function."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]


@dataclass(frozen=True)
class Cone:
    c: float


Node = Union[Num, Var, Unary, Binary, Call, Cone]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>\*\*|[-+*/^(),]))"
)
_FUNCS = {"abs": 1, "sin": 1, "cos": 1, "exp": 1, "min": None, "max": None, "theta": 1, "vartheta": 1, "cone": 1}
_CONSTS = {"pi": math.pi, "e": math.e}


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ParseError(f"unexpected character {src[start]!r}", start)
        kind = m.lastgroup
        assert kind is not None
        toks.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src: str, variables: frozenset[str], constants: Mapping[str, float]) -> None:
        self.toks = _tokenize(src)
        self.i = 0
        self.variables = variables
        self.constants = {**_CONSTS, **constants}

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, val, pos = self.take()
        if val != text or kind != "op":
            raise ParseError(f"expected {text!r} but found {val or 'end of input'!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            return Unary(val, self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val in ("^", "**"):
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in _FUNCS:
                    raise UnknownIdentifierError(f"unknown function {val!r}", pos)
                return self.call(val, pos)
            if val in self.variables:
                return Var(val)
            if val in self.constants:
                return Num(float(self.constants[val]))
            if val in _FUNCS:
                raise ParseError(f"function {val!r} needs arguments", pos)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", pos)
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos)

    def call(self, name: str, pos: int) -> Node:
        self.expect("(")
        args: list[Node] = []
        if self.peek()[1] != ")":
            args.append(self.expr())
            while self.peek()[1] == "," and self.peek()[0] == "op":
                self.take()
                args.append(self.expr())
        self.expect(")")
        arity = _FUNCS[name]
        if arity is not None and len(args) != arity:
            raise ParseError(f"{name} takes {arity} argument(s), got {len(args)}", pos)
        if arity is None and not args:
            raise ParseError(f"{name} needs at least one argument", pos)
        if name == "cone":
            if not {"tau1", "tau2"} <= self.variables:
                raise ParseError("cone(c) is only available in frequency expressions", pos)
            if _variables(args[0]):
                raise ParseError("cone aperture must be a constant", pos)
            c = interpret(args[0], {})
            if not c > 0:
                raise ParseError("cone aperture must be positive", pos)
            return Cone(c)
        return Call(name, tuple(args))


def _variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Cone):
        return {"tau1", "tau2"}
    if isinstance(node, Unary):
        return _variables(node.operand)
    if isinstance(node, Binary):
        return _variables(node.left) | _variables(node.right)
    if isinstance(node, Call):
        return set().union(*(_variables(a) for a in node.args))
    return set()


def parse_expression(
    src: str, variables: frozenset[str] | set[str] = frozenset({"tau1", "tau2"}), constants: Mapping[str, float] | None = None
) -> Node:
    """Parse ``src`` into an expression tree."""
    if not isinstance(src, str):
        raise ParseError("expression must be a string", 0)
    return _Parser(src, frozenset(variables), constants or {}).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_NP_UNARY: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "theta": theta,
    "vartheta": vartheta,
}


def compile_expression(node: Node) -> Callable[[Mapping[str, np.ndarray]], np.ndarray]:
    """Vectorized evaluator ``env -> values`` for an expression tree."""
    if isinstance(node, Num):
        v = node.value
        return lambda env: np.float64(v)
    if isinstance(node, Var):
        name = node.name
        return lambda env: np.asarray(env[name], dtype=float)
    if isinstance(node, Cone):
        c = node.c
        return lambda env: cone(env["tau1"], env["tau2"], c)
    if isinstance(node, Unary):
        inner = compile_expression(node.operand)
        return (lambda env: -inner(env)) if node.op == "-" else inner
    if isinstance(node, Binary):
        lhs, rhs = compile_expression(node.left), compile_expression(node.right)
        op = node.op
        if op == "+":
            return lambda env: lhs(env) + rhs(env)
        if op == "-":
            return lambda env: lhs(env) - rhs(env)
        if op == "*":
            return lambda env: lhs(env) * rhs(env)
        if op == "/":
            return lambda env: lhs(env) / rhs(env)
        return lambda env: np.power(lhs(env), rhs(env))
    assert isinstance(node, Call)
    args = [compile_expression(a) for a in node.args]
    if node.name == "min":
        return lambda env: np.minimum.reduce(np.broadcast_arrays(*(a(env) for a in args)))
    if node.name == "max":
        return lambda env: np.maximum.reduce(np.broadcast_arrays(*(a(env) for a in args)))
    fn = _NP_UNARY[node.name]
    arg = args[0]
    return lambda env: fn(arg(env))


_MATH_UNARY: dict[str, Callable[[float], float]] = {
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "theta": lambda t: float(theta(t)),
    "vartheta": lambda t: float(vartheta(t)),
}


def interpret(node: Node, env: Mapping[str, float]) -> float:
    """Scalar tree-walking reference evaluator."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(env[node.name])
    if isinstance(node, Cone):
        return float(cone(env["tau1"], env["tau2"], node.c))
    if isinstance(node, Unary):
        v = interpret(node.operand, env)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        a, b = interpret(node.left, env), interpret(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b if b != 0 else math.copysign(math.inf, a) if a != 0 else math.nan
        try:
            return float(a ** b) if not (a < 0 and b != int(b)) else math.nan
        except OverflowError:
            return math.inf
    assert isinstance(node, Call)
    vals = [interpret(a, env) for a in node.args]
    if node.name == "min":
        return min(vals)
    if node.name == "max":
        return max(vals)
    return _MATH_UNARY[node.name](vals[0])


def _support(node: Node) -> float | None:
    """Cone aperture implied by the expression, if any."""
    if isinstance(node, Num):
        return 0.0 if node.value == 0 else None
    if isinstance(node, Cone):
        return node.c
    if isinstance(node, Unary):
        return _support(node.operand)
    if isinstance(node, Binary):
        if node.op == "*":
            known = [s for s in (_support(node.left), _support(node.right)) if s is not None]
            return min(known) if known else None
        if node.op == "/":
            return _support(node.left)
        if node.op in ("+", "-"):
            a, b = _support(node.left), _support(node.right)
            return max(a, b) if a is not None and b is not None else None
    return None


def _contains_cone(node: Node) -> bool:
    if isinstance(node, Cone):
        return True
    if isinstance(node, Unary):
        return _contains_cone(node.operand)
    if isinstance(node, Binary):
        return _contains_cone(node.left) or _contains_cone(node.right)
    if isinstance(node, Call):
        return any(_contains_cone(a) for a in node.args)
    return False


def parse_symbol_expression(src: str, support_constant: float | None = None) -> TwistedSymbol:
    """Build a :class:`TwistedSymbol` from an expression in ``tau1, tau2``.

    The support constant is taken from ``support_constant`` when given, else
    inferred from ``cone(c)`` factors (``0`` for the zero expression). An
    expression built only from ``cone(...)`` calls and constants is flagged
    homogeneous.
    """
    node = parse_expression(src)
    ev = compile_expression(node)

    def func(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
        return np.broadcast_to(ev({"tau1": t1, "tau2": t2}), np.broadcast(t1, t2).shape)

    c = support_constant if support_constant is not None else _support(node)
    homogeneous = _contains_cone(node) and not _has_var(node)
    separable = None
    if isinstance(node, Cone):
        separable = _cone_terms(node.c)
    elif isinstance(node, Num):
        separable = constant_symbol(node.value).separable
    return TwistedSymbol(func, support_constant=c, homogeneous=homogeneous, separable=separable, name=src.strip())


def _has_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Unary):
        return _has_var(node.operand)
    if isinstance(node, Binary):
        return _has_var(node.left) or _has_var(node.right)
    if isinstance(node, Call):
        return any(_has_var(a) for a in node.args)
    return False


def parse_spatial_expression(
    src: str, constants: Mapping[str, float] | None = None, support_constant: float | None = None
) -> SpatialSymbol:
    """Build a :class:`SpatialSymbol` from an expression in ``x, y, tau1, tau2``.

    A top-level product of an ``(x, y)`` factor and a ``(tau1, tau2)`` factor is
    recorded as a factorized symbol.
    """
    space, freq = {"x", "y"}, {"tau1", "tau2"}
    node = parse_expression(src, space | freq, constants)
    ev = compile_expression(node)

    def func(x: np.ndarray, y: np.ndarray, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
        shape = np.broadcast(x, y, t1, t2).shape
        return np.broadcast_to(ev({"x": x, "y": y, "tau1": t1, "tau2": t2}), shape)

    c = support_constant if support_constant is not None else _support(node)
    factors = None
    if isinstance(node, Binary) and node.op == "*":
        for amp_node, sym_node in ((node.left, node.right), (node.right, node.left)):
            if _variables(amp_node) <= space and _variables(sym_node) <= freq:
                amp_ev, sym_ev = compile_expression(amp_node), compile_expression(sym_node)
                amp = lambda x, y, f=amp_ev: f({"x": x, "y": y})  # noqa: E731
                m = TwistedSymbol(
                    lambda t1, t2, f=sym_ev: np.broadcast_to(f({"tau1": t1, "tau2": t2}), np.broadcast(t1, t2).shape),
                    support_constant=c,
                    homogeneous=isinstance(sym_node, Cone),
                )
                factors = (amp, m)
                break
    return SpatialSymbol(func, c, factors, src.strip())
