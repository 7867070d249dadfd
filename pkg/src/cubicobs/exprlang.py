"""Scalar expressions over state, delayed inputs, and delayed outputs.

Plant and observer nonlinearities are written in a tiny arithmetic language:

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ['-'] atom ['^' uint]
    atom   := number | var | func '(' expr ')' | '(' expr ')'
    var    := ('x' | 'u' | 'y') uint ['@' uint]
    func   := 'sin' | 'cos' | 'tanh' | 'exp' | 'abs'

``x3`` is state component 3, ``u1@2`` is input component 1 delayed by the
second entry of the input-delay list, ``y2`` is the undelayed output
component 2.  Delay slot 0 (or no ``@``) means undelayed; slots count
1-based into the model's delay lists.  State references cannot be delayed.
Powers bind tighter than unary minus, so ``-x1^2`` is ``-(x1^2)``.

Component indices and delay slots are checked against the declared model
dimensions at parse time, not at evaluation time.  Drive signals use the
same grammar with the single extra variable ``t`` (see
:func:`parse_input_signal`); model nonlinearities may not reference ``t``.

Evaluation is strict about arithmetic: division by zero, overflow, and any
non-finite result raise :class:`ExprEvalError` instead of propagating
``inf``/``nan`` into an integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence, Union

__all__ = [
    "SignalDims",
    "Num",
    "Var",
    "TimeVar",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "ExprRangeError",
    "ExprEvalError",
    "EvalEnv",
    "parse",
    "parse_input_signal",
    "evaluate",
    "unparse",
    "variables",
]

FUNCTIONS = ("sin", "cos", "tanh", "exp", "abs")

_FUNC_IMPL: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tanh": math.tanh,
    "exp": math.exp,
    "abs": abs,
}


class ExprError(ValueError):
    """Base class for expression-language failures."""


class ExprSyntaxError(ExprError):
    """Malformed expression text; carries the character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExprRangeError(ExprError):
    """A variable reference is outside the declared model dimensions."""


class ExprEvalError(ExprError):
    """Evaluation failed: division by zero, overflow, or non-finite result."""


@dataclass(frozen=True)
class SignalDims:
    """Dimensions an expression may reference.

    ``n`` states, ``n_u`` inputs, ``n_y`` outputs, plus the lengths of the
    input-delay and output-delay lists.
    """

    n: int
    n_u: int
    n_y: int
    n_delta: int = 0
    n_tau: int = 0


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" | "u" | "y"
    index: int  # 1-based component
    slot: int = 0  # 0 = undelayed, k >= 1 indexes the delay list


@dataclass(frozen=True)
class TimeVar:
    """Bare ``t``; only valid in drive-signal expressions."""


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # "+" | "-" | "*" | "/"
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int  # nonnegative literal


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, TimeVar, Neg, BinOp, Pow, Call]


# --- lexer ---------------------------------------------------------------

def _tokenize(text: str) -> list[tuple[str, object, int]]:
    tokens: list[tuple[str, object, int]] = []
    i, nchars = 0, len(text)
    while i < nchars:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^@":
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch == "(":
            tokens.append(("lparen", ch, i))
            i += 1
            continue
        if ch == ")":
            tokens.append(("rparen", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            start = i
            while i < nchars and text[i].isdigit():
                i += 1
            if i < nchars and text[i] == ".":
                i += 1
                while i < nchars and text[i].isdigit():
                    i += 1
            if text[start:i] == ".":
                raise ExprSyntaxError("malformed number", start)
            if i < nchars and text[i] in "eE":
                j = i + 1
                if j < nchars and text[j] in "+-":
                    j += 1
                if j >= nchars or not text[j].isdigit():
                    raise ExprSyntaxError("malformed number", start)
                i = j
                while i < nchars and text[i].isdigit():
                    i += 1
            tokens.append(("number", text[start:i], start))
            continue
        if ch.isalpha():
            start = i
            while i < nchars and text[i].isalpha():
                i += 1
            word = text[start:i]
            digit_start = i
            while i < nchars and text[i].isdigit():
                i += 1
            if i > digit_start:
                tokens.append(("var", (word, text[digit_start:i]), start))
            else:
                tokens.append(("word", word, start))
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("eof", "", nchars))
    return tokens


# --- parser --------------------------------------------------------------

class _Parser:
    def __init__(self, tokens, dims: SignalDims, allow_time: bool):
        self.tokens = tokens
        self.pos = 0
        self.dims = dims
        self.allow_time = allow_time

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        kind, _, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError("unexpected trailing input", pos)
        return e

    def expr(self) -> Expr:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        negate = False
        if kind == "op" and val == "-":
            self.advance()
            negate = True
        node = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            node = Pow(node, self.uint("power exponent"))
        return Neg(node) if negate else node

    def atom(self) -> Expr:
        kind, val, pos = self.advance()
        if kind == "number":
            return Num(float(val))
        if kind == "var":
            return self.var_ref(val, pos)
        if kind == "word":
            if val in FUNCTIONS:
                k, _, p = self.advance()
                if k != "lparen":
                    raise ExprSyntaxError(f"expected '(' after {val}", p)
                arg = self.expr()
                k, _, p = self.advance()
                if k != "rparen":
                    raise ExprSyntaxError("expected ')'", p)
                return Call(val, arg)
            if val == "t" and self.allow_time:
                return TimeVar()
            raise ExprSyntaxError(f"unknown function or variable {val!r}", pos)
        if kind == "lparen":
            e = self.expr()
            k, _, p = self.advance()
            if k != "rparen":
                raise ExprSyntaxError("expected ')'", p)
            return e
        raise ExprSyntaxError("expected a number, variable, or '('", pos)

    def uint(self, what: str) -> int:
        kind, val, pos = self.advance()
        if kind != "number" or not str(val).isdigit():
            raise ExprSyntaxError(f"{what} must be a nonnegative integer", pos)
        return int(val)

    def var_ref(self, val, pos: int) -> Expr:
        word, digits = val
        if word not in ("x", "u", "y"):
            raise ExprSyntaxError(f"unknown variable kind {word!r}", pos)
        index = int(digits)
        slot = 0
        kind, tok, _ = self.peek()
        if kind == "op" and tok == "@":
            self.advance()
            slot = self.uint("delay slot")
        ref = f"{word}{index}" + (f"@{slot}" if slot else "")
        dims = self.dims
        if index < 1:
            raise ExprRangeError(f"{ref}: component index must be >= 1")
        if word == "x":
            if index > dims.n:
                raise ExprRangeError(f"{ref}: state index out of range (n={dims.n})")
            if slot != 0:
                raise ExprRangeError(f"{ref}: state references cannot be delayed")
        elif word == "u":
            if index > dims.n_u:
                raise ExprRangeError(f"{ref}: input index out of range (n_u={dims.n_u})")
            if slot > dims.n_delta:
                raise ExprRangeError(
                    f"{ref}: input delay slot out of range ({dims.n_delta} configured)"
                )
        else:
            if index > dims.n_y:
                raise ExprRangeError(f"{ref}: output index out of range (n_y={dims.n_y})")
            if slot > dims.n_tau:
                raise ExprRangeError(
                    f"{ref}: output delay slot out of range ({dims.n_tau} configured)"
                )
        return Var(word, index, slot)


def parse(text: str, dims: SignalDims, *, allow_time: bool = False) -> Expr:
    """Parse ``text`` against the declared dimensions.

    Raises :class:`ExprSyntaxError` with a character position on malformed
    input and :class:`ExprRangeError` when a reference is out of range.
    """
    tokens = _tokenize(text)
    if tokens[0][0] == "eof":
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(tokens, dims, allow_time).parse()


def parse_input_signal(text: str) -> Expr:
    """Parse a drive signal: an expression in the single variable ``t``."""
    return parse(text, SignalDims(0, 0, 0), allow_time=True)


# --- evaluation ----------------------------------------------------------

@dataclass
class EvalEnv:
    """Bindings for one evaluation.

    ``u_at(slot)`` / ``y_at(slot)`` return the input/output vector at the
    given delay slot (0 = undelayed).  Leave them ``None`` for expressions
    that do not reference the corresponding signals.
    """

    x: Sequence[float] = ()
    u_at: Callable[[int], Sequence[float]] | None = None
    y_at: Callable[[int], Sequence[float]] | None = None
    t: float = 0.0


def evaluate(e: Expr, env: EvalEnv) -> float:
    """Evaluate ``e`` under ``env``; the result is always finite."""
    val = _eval(e, env)
    if not math.isfinite(val):
        raise ExprEvalError(f"non-finite value while evaluating {unparse(e)}")
    return val


def _eval(e: Expr, env: EvalEnv) -> float:
    match e:
        case Num(value):
            return value
        case TimeVar():
            return env.t
        case Var(kind, index, slot):
            if kind == "x":
                vec = env.x
            elif kind == "u":
                if env.u_at is None:
                    raise ExprEvalError("no input signal bound for u reference")
                vec = env.u_at(slot)
            else:
                if env.y_at is None:
                    raise ExprEvalError("no output signal bound for y reference")
                vec = env.y_at(slot)
            try:
                return float(vec[index - 1])
            except IndexError:
                raise ExprEvalError(
                    f"{kind}{index}: environment vector too short"
                ) from None
        case Neg(arg):
            return -_eval(arg, env)
        case BinOp(op, left, right):
            a = _eval(left, env)
            b = _eval(right, env)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if b == 0.0:
                raise ExprEvalError("division by zero")
            return a / b
        case Pow(base, exponent):
            try:
                return _eval(base, env) ** exponent
            except OverflowError:
                raise ExprEvalError("overflow in power") from None
        case Call(func, arg):
            v = _eval(arg, env)
            try:
                return _FUNC_IMPL[func](v)
            except (OverflowError, ValueError) as exc:
                raise ExprEvalError(f"{func} failed: {exc}") from None
    raise TypeError(f"not an expression node: {e!r}")


# --- printing ------------------------------------------------------------

def unparse(e: Expr) -> str:
    """Fully parenthesized text form; ``parse`` of the result rebuilds ``e``."""
    match e:
        case Num(value):
            return repr(value)
        case TimeVar():
            return "t"
        case Var(kind, index, slot):
            return f"{kind}{index}" + (f"@{slot}" if slot else "")
        case Neg(arg):
            return f"(-{unparse(arg)})"
        case BinOp(op, left, right):
            return f"({unparse(left)}{op}{unparse(right)})"
        case Pow(base, exponent):
            return f"({unparse(base)}^{exponent})"
        case Call(func, arg):
            return f"{func}({unparse(arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: Expr) -> Iterator[Var]:
    """Yield every variable reference in the tree (depth-first)."""
    match e:
        case Var():
            yield e
        case Neg(arg) | Call(_, arg) | Pow(arg, _):
            yield from variables(arg)
        case BinOp(_, left, right):
            yield from variables(left)
            yield from variables(right)
        case _:
            pass
