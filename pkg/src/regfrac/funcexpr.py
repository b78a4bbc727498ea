"""A small arithmetic expression language for scalar fields in config files.

Grammar (EBNF)::

    expr    = term   { ("+" | "-") term } ;
    term    = unary  { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;              (* right associative *)
    atom    = NUMBER | "pi" | "x" | "y"
            | NAME "(" expr { "," expr } ")"
            | "(" expr ")" ;

Builtin functions: ``sin cos exp log abs sqrt`` (one argument),
``pow(base, p)``, ``powplus(base, p)`` which computes ``max(base, 0)**p``,
and ``rho(point)`` which evaluates distance-to-boundary of the ambient
domain.  Evaluation is total: any domain error (log of a non-positive
number, division by zero, ...) raises :class:`EvalError`; results are never
silently non-finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Pi",
    "Neg",
    "BinOp",
    "Call",
    "ParseError",
    "EvalError",
    "parse",
    "to_source",
    "evaluate",
]


class ParseError(ValueError):
    """Syntax or name error, carrying a 1-based column offset."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


class EvalError(ArithmeticError):
    """Domain error during evaluation (log of non-positive, division by zero, ...)."""


class Expr:
    """Immutable expression AST node."""

    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str  # "x" or "y"


@dataclass(frozen=True)
class Pi(Expr):
    pass


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]


_UNARY_FUNCS = frozenset({"sin", "cos", "exp", "log", "abs", "sqrt", "rho"})
_BINARY_FUNCS = frozenset({"pow", "powplus"})


class _Tokenizer:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []  # (kind, text, column)
        self._scan()
        self.index = 0

    def _scan(self) -> None:
        src, n = self.src, len(self.src)
        i = 0
        while i < n:
            ch = src[i]
            if ch.isspace():
                i += 1
                continue
            col = i + 1
            if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
                j = i
                while j < n and (src[j].isdigit() or src[j] == "."):
                    j += 1
                if j < n and src[j] in "eE":
                    k = j + 1
                    if k < n and src[k] in "+-":
                        k += 1
                    if k < n and src[k].isdigit():
                        j = k
                        while j < n and src[j].isdigit():
                            j += 1
                text = src[i:j]
                try:
                    float(text)
                except ValueError:
                    raise ParseError(f"malformed number {text!r}", col) from None
                self.tokens.append(("num", text, col))
                i = j
            elif ch.isalpha() or ch == "_":
                j = i
                while j < n and (src[j].isalnum() or src[j] == "_"):
                    j += 1
                self.tokens.append(("name", src[i:j], col))
                i = j
            elif ch in "+-*/^(),":
                self.tokens.append((ch, ch, col))
                i += 1
            else:
                raise ParseError(f"unexpected character {ch!r}", col)
        self.tokens.append(("end", "", n + 1))

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.index]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, kind: str) -> tuple[str, str, int]:
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, got {tok[1]!r}", tok[2])
        return tok


def parse(src: str) -> Expr:
    """Parse an expression string into an AST.

    Raises :class:`ParseError` with a 1-based column on syntax errors or
    unknown identifiers.
    """
    tz = _Tokenizer(src)
    e = _parse_sum(tz)
    tok = tz.peek()
    if tok[0] != "end":
        raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
    return e


def _parse_sum(tz: _Tokenizer) -> Expr:
    e = _parse_term(tz)
    while tz.peek()[0] in ("+", "-"):
        op = tz.next()[0]
        e = BinOp(op, e, _parse_term(tz))
    return e


def _parse_term(tz: _Tokenizer) -> Expr:
    e = _parse_unary(tz)
    while tz.peek()[0] in ("*", "/"):
        op = tz.next()[0]
        e = BinOp(op, e, _parse_unary(tz))
    return e


def _parse_unary(tz: _Tokenizer) -> Expr:
    if tz.peek()[0] == "-":
        tz.next()
        return Neg(_parse_unary(tz))
    return _parse_power(tz)


def _parse_power(tz: _Tokenizer) -> Expr:
    base = _parse_atom(tz)
    if tz.peek()[0] == "^":
        tz.next()
        return BinOp("^", base, _parse_unary(tz))
    return base


def _parse_atom(tz: _Tokenizer) -> Expr:
    kind, text, col = tz.next()
    if kind == "num":
        return Num(float(text))
    if kind == "(":
        e = _parse_sum(tz)
        tz.expect(")")
        return e
    if kind == "name":
        if tz.peek()[0] == "(":
            tz.next()
            args = [_parse_sum(tz)]
            while tz.peek()[0] == ",":
                tz.next()
                args.append(_parse_sum(tz))
            tz.expect(")")
            if text in _UNARY_FUNCS:
                if len(args) != 1:
                    raise ParseError(f"{text} takes one argument", col)
            elif text in _BINARY_FUNCS:
                if len(args) != 2:
                    raise ParseError(f"{text} takes two arguments", col)
            else:
                raise ParseError(f"unknown function {text!r}", col)
            return Call(text, tuple(args))
        if text == "pi":
            return Pi()
        if text in ("x", "y"):
            return Var(text)
        raise ParseError(f"unknown identifier {text!r}", col)
    raise ParseError(f"unexpected token {text!r}", col)


def to_source(e: Expr) -> str:
    """Render an AST as a parseable string; ``parse(to_source(e))`` equals ``e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    raise TypeError(f"not an Expr node: {e!r}")


def _check_finite(val, what: str):
    bad = ~np.isfinite(val) if isinstance(val, np.ndarray) else not math.isfinite(val)
    if np.any(bad):
        raise EvalError(f"non-finite result in {what}")
    return val


def _eval_node(e: Expr, x, y, domain):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Pi):
        return math.pi
    if isinstance(e, Var):
        if e.name == "x":
            return x
        if y is None:
            raise EvalError("variable 'y' used in a 1D context")
        return y
    if isinstance(e, Neg):
        return -_eval_node(e.operand, x, y, domain)
    if isinstance(e, BinOp):
        a = _eval_node(e.left, x, y, domain)
        b = _eval_node(e.right, x, y, domain)
        with np.errstate(all="ignore"):
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                if np.any(b == 0):
                    raise EvalError("division by zero")
                return a / b
            # '^': real power; negative base with fractional exponent is a
            # domain error, not a NaN
            return _check_finite(np.power(a, b), "power")
    if isinstance(e, Call):
        args = [_eval_node(a, x, y, domain) for a in e.args]
        with np.errstate(all="ignore"):
            if e.func == "sin":
                return np.sin(args[0])
            if e.func == "cos":
                return np.cos(args[0])
            if e.func == "exp":
                return _check_finite(np.exp(args[0]), "exp")
            if e.func == "log":
                if np.any(np.asarray(args[0]) <= 0):
                    raise EvalError("log of a non-positive number")
                return np.log(args[0])
            if e.func == "abs":
                return np.abs(args[0])
            if e.func == "sqrt":
                if np.any(np.asarray(args[0]) < 0):
                    raise EvalError("sqrt of a negative number")
                return np.sqrt(args[0])
            if e.func == "pow":
                return _check_finite(np.power(args[0], args[1]), "pow")
            if e.func == "powplus":
                base = np.maximum(args[0], 0.0)
                return _check_finite(
                    np.where(base > 0, np.power(base, args[1]), 0.0), "powplus"
                )
            if e.func == "rho":
                if domain is None:
                    raise EvalError("rho() used without an ambient domain")
                if domain.dim == 1:
                    return np.asarray(domain.rho(args[0]), dtype=float)
                pts = np.stack(
                    np.broadcast_arrays(np.asarray(args[0], dtype=float), y), axis=-1
                )
                return np.asarray(domain.rho(pts), dtype=float)
    raise TypeError(f"not an Expr node: {e!r}")


def evaluate(e: Expr, point, domain=None):
    """Evaluate an expression at a point (or array of points).

    ``point`` is a scalar or array of x-values in 1D, or a pair / ``(n, 2)``
    array in 2D.  Scalar input gives a float; array input gives an array.
    Raises :class:`EvalError` on any domain error.
    """
    dim = 2 if (domain is not None and domain.dim == 2) else 1
    pt = np.asarray(point, dtype=float)
    if dim == 2:
        if pt.shape[-1] != 2:
            raise ValueError("2D evaluation needs points with a trailing axis of 2")
        x, y = pt[..., 0], pt[..., 1]
        scalar = pt.ndim == 1
    else:
        x, y = pt, None
        scalar = pt.ndim == 0
    val = _eval_node(e, x, y, domain)
    val = np.broadcast_to(np.asarray(val, dtype=float), np.shape(x))
    _check_finite(np.asarray(val), "expression")
    return float(val.reshape(())) if scalar else np.array(val, dtype=float)
