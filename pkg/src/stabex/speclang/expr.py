"""Expression trees for constraints, queries and objectives.

The surface syntax is a small Python-like language: numeric literals,
identifiers, ``+ - * / **``, unary ``-`` and ``~``, comparisons, the
bitwise connectives ``& ^ |`` (with ``and``/``or``/``not`` as aliases)
and the conditional ``a if c else b``. All numbers are exact rationals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Union

Number = Fraction
Value = Union[Fraction, bool]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int = -1):
        self.text = text
        self.pos = pos
        if pos >= 0:
            message = f"{message} at position {pos} in {text!r}"
        super().__init__(message)


class EvalError(ArithmeticError):
    pass


# -- tree nodes ---------------------------------------------------------------


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class Bool(Expr):
    value: bool


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * / ** & | ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class UnaryOp(Expr):
    op: str  # '-' or '~'
    operand: Expr


@dataclass(frozen=True)
class Compare(Expr):
    op: str  # one of == != < <= > >=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Cond(Expr):
    then: Expr
    guard: Expr
    orelse: Expr


TRUE = Bool(True)
FALSE = Bool(False)

ARITH_OPS = ("+", "-", "*", "/", "**")
LOGIC_OPS = ("&", "|", "^")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


def num(v) -> Num:
    return Num(to_fraction(v))


def to_fraction(v) -> Fraction:
    """Exact rational for ints, Fractions, floats and decimal strings.

    Floats convert through their shortest repr, so ``0.1`` gives ``1/10``.
    """
    if isinstance(v, bool):
        raise TypeError("boolean is not a number")
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        # shortest decimal that round-trips, i.e. the literal as written
        return Fraction(repr(v))
    if isinstance(v, str):
        return Fraction(v.strip())
    raise TypeError(f"cannot convert {type(v).__name__} to a rational")


def conj(*parts: Expr) -> Expr:
    """Conjunction dropping literal ``True`` operands."""
    items = [p for p in parts if p != TRUE]
    if any(p == FALSE for p in items):
        return FALSE
    if not items:
        return TRUE
    out = items[0]
    for p in items[1:]:
        out = BinOp("&", out, p)
    return out


def disj(*parts: Expr) -> Expr:
    items = [p for p in parts if p != FALSE]
    if any(p == TRUE for p in items):
        return TRUE
    if not items:
        return FALSE
    out = items[0]
    for p in items[1:]:
        out = BinOp("|", out, p)
    return out


def neg(e: Expr) -> Expr:
    if isinstance(e, Bool):
        return Bool(not e.value)
    return UnaryOp("~", e)


def implies(a: Expr, b: Expr) -> Expr:
    if a == TRUE:
        return b
    return disj(neg(a), b)


# -- tokenizer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|==|!=|<=|>=|[-+*/<>()&|^~])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not", "if", "else", "True", "False", "true", "false"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unsupported character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tok_text = m.group()
            if kind == "name" and tok_text in _KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, tok_text, pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    # precedence, loosest first: conditional, |, ^, &, not, comparison,
    # + -, * /, unary - ~, **

    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _accept(self, *texts: str) -> _Tok | None:
        t = self.tok
        if t.kind in ("op", "kw") and t.text in texts:
            self.i += 1
            return t
        return None

    def _expect(self, text: str) -> None:
        if self._accept(text) is None:
            self._fail(f"expected {text!r}")

    def _fail(self, msg: str):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"{msg}, found {found}", self.text, t.pos)

    def parse(self) -> Expr:
        e = self.conditional()
        if self.tok.kind != "end":
            self._fail("unexpected token")
        return e

    def conditional(self) -> Expr:
        e = self.or_()
        if self._accept("if"):
            guard = self.or_()
            self._expect("else")
            orelse = self.conditional()
            return Cond(e, guard, orelse)
        return e

    def or_(self) -> Expr:
        e = self.xor()
        while self._accept("|", "or"):
            e = BinOp("|", e, self.xor())
        return e

    def xor(self) -> Expr:
        e = self.and_()
        while self._accept("^"):
            e = BinOp("^", e, self.and_())
        return e

    def and_(self) -> Expr:
        e = self.not_()
        while self._accept("&", "and"):
            e = BinOp("&", e, self.not_())
        return e

    def not_(self) -> Expr:
        if self._accept("not"):
            return UnaryOp("~", self.not_())
        return self.comparison()

    def comparison(self) -> Expr:
        e = self.additive()
        t = self._accept(*CMP_OPS)
        if t is not None:
            e = Compare(t.text, e, self.additive())
            if self.tok.kind == "op" and self.tok.text in CMP_OPS:
                self._fail("chained comparisons are not supported")
        return e

    def additive(self) -> Expr:
        e = self.multiplicative()
        while True:
            t = self._accept("+", "-")
            if t is None:
                return e
            e = BinOp(t.text, e, self.multiplicative())

    def multiplicative(self) -> Expr:
        e = self.unary()
        while True:
            t = self._accept("*", "/")
            if t is None:
                return e
            e = BinOp(t.text, e, self.unary())

    def unary(self) -> Expr:
        t = self._accept("-", "~", "+")
        if t is not None:
            operand = self.unary()
            return operand if t.text == "+" else UnaryOp(t.text, operand)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self._accept("**"):
            return BinOp("**", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(Fraction(t.text))
        if t.kind == "name":
            self.i += 1
            return Var(t.text)
        if t.kind == "kw" and t.text in ("True", "true"):
            self.i += 1
            return TRUE
        if t.kind == "kw" and t.text in ("False", "false"):
            self.i += 1
            return FALSE
        if self._accept("("):
            e = self.conditional()
            self._expect(")")
            return e
        self._fail("expected an operand")


def parse_expr(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    >>> parse_expr("(y2**3+p2)/2>6")
    Compare(op='>', left=BinOp(op='/', ...), right=Num(value=Fraction(6, 1)))
    """
    if not isinstance(text, str):
        raise ExprSyntaxError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text).parse()


# -- printing -----------------------------------------------------------------


def _num_text(v: Fraction) -> str:
    if v.denominator == 1:
        s = str(v.numerator)
    else:
        d = v.denominator
        twos = fives = 0
        while d % 2 == 0:
            d //= 2
            twos += 1
        while d % 5 == 0:
            d //= 5
            fives += 1
        if d != 1:
            s = f"({abs(v.numerator)}/{v.denominator})"
        else:
            digits = max(twos, fives)
            scaled = abs(v) * 10**digits
            whole = str(scaled.numerator).rjust(digits + 1, "0")
            s = f"{whole[:-digits]}.{whole[-digits:]}"
        if v < 0:
            s = "-" + s
    return f"({s})" if v < 0 else s


def to_text(e: Expr) -> str:
    """Fully parenthesized text that parses back to an equal tree."""
    if isinstance(e, Num):
        return _num_text(e.value)
    if isinstance(e, Bool):
        return "True" if e.value else "False"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, UnaryOp):
        return f"({e.op}{to_text(e.operand)})"
    if isinstance(e, Compare):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Cond):
        return f"({to_text(e.then)} if {to_text(e.guard)} else {to_text(e.orelse)})"
    raise TypeError(f"not an expression: {e!r}")


# -- traversal ----------------------------------------------------------------


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (BinOp, Compare)):
        return (e.left, e.right)
    if isinstance(e, UnaryOp):
        return (e.operand,)
    if isinstance(e, Cond):
        return (e.then, e.guard, e.orelse)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def free_vars(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, Var)}


def rebuild(e: Expr, fn: Callable[[Expr], Expr | None]) -> Expr:
    """Bottom-up rewrite; ``fn`` returns a replacement or None to keep."""
    if isinstance(e, BinOp):
        e2 = BinOp(e.op, rebuild(e.left, fn), rebuild(e.right, fn))
    elif isinstance(e, Compare):
        e2 = Compare(e.op, rebuild(e.left, fn), rebuild(e.right, fn))
    elif isinstance(e, UnaryOp):
        e2 = UnaryOp(e.op, rebuild(e.operand, fn))
    elif isinstance(e, Cond):
        e2 = Cond(rebuild(e.then, fn), rebuild(e.guard, fn), rebuild(e.orelse, fn))
    else:
        e2 = e
    out = fn(e2)
    return e2 if out is None else out


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if not mapping:
        return e
    return rebuild(e, lambda n: mapping.get(n.name) if isinstance(n, Var) else None)


def is_boolean(e: Expr) -> bool:
    """Syntactic sort: True for formulas, False for numeric terms."""
    if isinstance(e, (Bool, Compare)):
        return True
    if isinstance(e, BinOp):
        return e.op in LOGIC_OPS
    if isinstance(e, UnaryOp):
        return e.op == "~"
    if isinstance(e, Cond):
        return is_boolean(e.then)
    return False


# -- exact evaluation -----------------------------------------------------------


def _as_number(v: Value, e: Expr) -> Fraction:
    if isinstance(v, bool):
        raise EvalError(f"boolean operand where a number is required in {to_text(e)}")
    return v


def _as_bool(v: Value, e: Expr) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"numeric operand where a boolean is required in {to_text(e)}")
    return v


def _pow(base: Fraction, exp: Fraction, e: Expr) -> Fraction:
    if exp.denominator != 1:
        raise EvalError(f"non-integer exponent {exp} in {to_text(e)}")
    if base == 0 and exp < 0:
        raise EvalError(f"division by zero in {to_text(e)}")
    return base ** int(exp)


def eval_expr(e: Expr, a: Mapping[str, Fraction]) -> Value:
    """Evaluate ``e`` exactly under the total assignment ``a``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Bool):
        return e.value
    if isinstance(e, Var):
        try:
            v = a[e.name]
        except KeyError:
            raise EvalError(f"variable {e.name!r} is not assigned") from None
        return v if isinstance(v, (bool, Fraction)) else to_fraction(v)
    if isinstance(e, Cond):
        if _as_bool(eval_expr(e.guard, a), e):
            return eval_expr(e.then, a)
        return eval_expr(e.orelse, a)
    if isinstance(e, UnaryOp):
        v = eval_expr(e.operand, a)
        if e.op == "-":
            return -_as_number(v, e)
        return not _as_bool(v, e)
    if isinstance(e, Compare):
        lv = _as_number(eval_expr(e.left, a), e)
        rv = _as_number(eval_expr(e.right, a), e)
        return _CMP[e.op](lv, rv)
    if isinstance(e, BinOp):
        if e.op in LOGIC_OPS:
            lb = _as_bool(eval_expr(e.left, a), e)
            rb = _as_bool(eval_expr(e.right, a), e)
            if e.op == "&":
                return lb and rb
            if e.op == "|":
                return lb or rb
            return lb != rb
        lv = _as_number(eval_expr(e.left, a), e)
        rv = _as_number(eval_expr(e.right, a), e)
        if e.op == "+":
            return lv + rv
        if e.op == "-":
            return lv - rv
        if e.op == "*":
            return lv * rv
        if e.op == "/":
            if rv == 0:
                raise EvalError(f"division by zero in {to_text(e)}")
            return lv / rv
        return _pow(lv, rv, e)
    raise TypeError(f"not an expression: {e!r}")


_CMP = {
    "==": lambda x, y: x == y,
    "!=": lambda x, y: x != y,
    "<": lambda x, y: x < y,
    "<=": lambda x, y: x <= y,
    ">": lambda x, y: x > y,
    ">=": lambda x, y: x >= y,
}
