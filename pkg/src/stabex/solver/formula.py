"""Compilation of boolean expressions into the kernel's normal form.

Numeric conditionals are lifted to the boolean level, negations are
pushed to the atoms, and every atom becomes ``term op 0`` with
``op`` in ``>=``, ``>``, ``==``. Terms are flattened into tapes for
fast interval evaluation and hull-consistency contraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from ..speclang.expr import (
    BinOp,
    Bool,
    Compare,
    Cond,
    EvalError,
    Expr,
    Num,
    UnaryOp,
    Var,
    eval_expr,
    free_vars,
    is_boolean,
    rebuild,
    walk,
)
from . import interval as iv


@dataclass(frozen=True)
class Atom:
    term: Expr  # numeric, conditional-free
    op: str  # '>=', '>', '=='
    tape: tuple
    # set when the atom is a bound "var op const" handled exactly
    bound_var: int | None = None
    bound_kind: str | None = None  # 'lo', 'hi', 'eq'
    bound_value: Fraction | None = None
    strict: bool = False

    def text(self) -> str:
        from ..speclang.expr import to_text

        return f"{to_text(self.term)} {self.op} 0"


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


Node = Union[Atom, And, Or, bool]


class Compiler:
    """Compiles expressions against a fixed variable order."""

    def __init__(self, variables: Sequence[str]):
        self.variables = list(variables)
        self.index = {v: i for i, v in enumerate(self.variables)}

    def compile(self, e: Expr) -> Node:
        unknown = free_vars(e) - set(self.index)
        if unknown:
            raise ValueError(f"formula variables {sorted(unknown)} are not in the box")
        return self._nnf(e, True)

    # -- boolean structure -------------------------------------------------------

    def _nnf(self, e: Expr, pos: bool) -> Node:
        if isinstance(e, Bool):
            return e.value if pos else not e.value
        if isinstance(e, UnaryOp) and e.op == "~":
            return self._nnf(e.operand, not pos)
        if isinstance(e, BinOp) and e.op in ("&", "|"):
            a = self._nnf(e.left, pos)
            b = self._nnf(e.right, pos)
            is_and = (e.op == "&") == pos
            return _mk_and([a, b]) if is_and else _mk_or([a, b])
        if isinstance(e, BinOp) and e.op == "^":
            # a ^ b == (a & ~b) | (~a & b); its negation is (a & b) | (~a & ~b)
            l, r = e.left, e.right
            if pos:
                return _mk_or([
                    _mk_and([self._nnf(l, True), self._nnf(r, False)]),
                    _mk_and([self._nnf(l, False), self._nnf(r, True)]),
                ])
            return _mk_or([
                _mk_and([self._nnf(l, True), self._nnf(r, True)]),
                _mk_and([self._nnf(l, False), self._nnf(r, False)]),
            ])
        if isinstance(e, Cond):
            g, t, f = e.guard, e.then, e.orelse
            return _mk_or([
                _mk_and([self._nnf(g, True), self._nnf(t, pos)]),
                _mk_and([self._nnf(g, False), self._nnf(f, pos)]),
            ])
        if isinstance(e, Compare):
            cond = _first_cond(e)
            if cond is not None:
                then_ = _replace(e, cond, cond.then)
                else_ = _replace(e, cond, cond.orelse)
                return _mk_or([
                    _mk_and([self._nnf(cond.guard, True), self._nnf(then_, pos)]),
                    _mk_and([self._nnf(cond.guard, False), self._nnf(else_, pos)]),
                ])
            return self._compare(e.op if pos else _NEGATE[e.op], e.left, e.right)
        raise ValueError(f"not a formula: {e}")

    def _compare(self, op: str, left: Expr, right: Expr) -> Node:
        if op == "!=":
            return _mk_or([self._compare("<", left, right), self._compare(">", left, right)])
        if op in ("<=", "<"):
            left, right = right, left
            op = ">=" if op == "<=" else ">"
        term = _difference(left, right)
        if not free_vars(term):
            try:
                v = eval_expr(term, {})
            except EvalError:
                return False
            return {">=": v >= 0, ">": v > 0, "==": v == 0}[op]
        return self._atom(term, op, left, right)

    def _atom(self, term: Expr, op: str, left: Expr, right: Expr) -> Atom:
        tape = tuple(self._tape(term))
        bound = _simple_bound(left, right, op)
        if bound is not None:
            name, kind, value, strict = bound
            return Atom(term, op, tape, self.index[name], kind, value, strict)
        return Atom(term, op, tape)

    def _tape(self, term: Expr) -> list:
        out: list = []

        def emit(e: Expr) -> int:
            if isinstance(e, Num):
                out.append(("c", iv.from_fraction(e.value)))
            elif isinstance(e, Var):
                out.append(("v", self.index[e.name]))
            elif isinstance(e, UnaryOp) and e.op == "-":
                i = emit(e.operand)
                out.append(("n", i))
            elif isinstance(e, BinOp) and e.op == "**":
                if not isinstance(e.right, Num) or e.right.value.denominator != 1:
                    exp = _const_value(e.right)
                    if exp is None or exp.denominator != 1:
                        raise ValueError(f"non-integer or non-constant exponent in {e}")
                else:
                    exp = e.right.value
                i = emit(e.left)
                out.append(("^", i, int(exp)))
            elif isinstance(e, BinOp) and e.op in "+-*/":
                i = emit(e.left)
                j = emit(e.right)
                out.append((e.op, i, j))
            else:
                raise ValueError(f"not a numeric term: {e}")
            return len(out) - 1

        emit(term)
        return out


_NEGATE = {"==": "!=", "!=": "==", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def _mk_and(parts) -> Node:
    flat = []
    for p in parts:
        if p is False:
            return False
        if p is True:
            continue
        flat.extend(p.parts if isinstance(p, And) else [p])
    if not flat:
        return True
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def _mk_or(parts) -> Node:
    flat = []
    for p in parts:
        if p is True:
            return True
        if p is False:
            continue
        flat.extend(p.parts if isinstance(p, Or) else [p])
    if not flat:
        return False
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def _first_cond(e: Expr) -> Cond | None:
    for n in walk(e):
        if isinstance(n, Cond) and not is_boolean(n):
            return n
    return None


def _replace(e: Expr, target: Expr, by: Expr) -> Expr:
    return rebuild(e, lambda n: by if n == target else None)


def _const_value(e: Expr) -> Fraction | None:
    if free_vars(e):
        return None
    try:
        v = eval_expr(e, {})
    except EvalError:
        return None
    return v if isinstance(v, Fraction) else None


def _difference(left: Expr, right: Expr) -> Expr:
    if isinstance(right, Num) and right.value == 0:
        return left
    if isinstance(left, Num) and left.value == 0:
        return UnaryOp("-", right)
    return BinOp("-", left, right)


def _simple_bound(left: Expr, right: Expr, op: str):
    """Recognize ``var >= c``, ``c >= var`` and equalities (after orientation)."""
    lc, rc = _const_value(left), _const_value(right)
    if isinstance(left, Var) and rc is not None:
        kind = {"==": "eq", ">=": "lo", ">": "lo"}[op]
        return left.name, kind, rc, op == ">"
    if isinstance(right, Var) and lc is not None:
        kind = {"==": "eq", ">=": "hi", ">": "hi"}[op]
        return right.name, kind, lc, op == ">"
    return None


# -- evaluation -------------------------------------------------------------------


def forward(tape, box: Sequence[iv.Interval]) -> list:
    """Interval value of every tape node; ``None`` marks an undefined node."""
    vals: list = [None] * len(tape)
    for k, ins in enumerate(tape):
        tag = ins[0]
        if tag == "c":
            vals[k] = ins[1]
        elif tag == "v":
            vals[k] = box[ins[1]]
        else:
            a = vals[ins[1]]
            if a is None:
                return vals
            if tag == "n":
                vals[k] = iv.neg(a)
            elif tag == "^":
                r = iv.powi(a, ins[2])
                if r is None:
                    return vals
                vals[k] = r
            else:
                b = vals[ins[2]]
                if b is None:
                    return vals
                if tag == "+":
                    vals[k] = iv.add(a, b)
                elif tag == "-":
                    vals[k] = iv.sub(a, b)
                elif tag == "*":
                    vals[k] = iv.mul(a, b)
                else:
                    r = iv.div(a, b)
                    if r is None:
                        return vals
                    vals[k] = r
    return vals


def hc4_revise(atom: Atom, box: list) -> bool:
    """Contract ``box`` (list of float intervals) in place; False if empty."""
    tape = atom.tape
    vals = forward(tape, box)
    root = vals[-1]
    if root is None:
        return False
    target = (0.0, 0.0) if atom.op == "==" else (0.0, iv.INF)
    r = iv.intersect(root, target)
    if r is None:
        return False
    vals[-1] = r
    for k in range(len(tape) - 1, -1, -1):
        ins = tape[k]
        tag = ins[0]
        v = vals[k]
        if tag == "c":
            if iv.intersect(v, ins[1]) is None:
                return False
            continue
        if tag == "v":
            j = ins[1]
            nb = iv.intersect(box[j], v)
            if nb is None:
                return False
            box[j] = nb
            continue
        i = ins[1]
        a = vals[i]
        if tag == "n":
            na = iv.intersect(a, iv.neg(v))
        elif tag == "^":
            kexp = ins[2]
            na = iv.inv_powi(v, a, kexp) if kexp >= 1 else a
        else:
            j = ins[2]
            b = vals[j]
            if tag == "+":
                na = iv.intersect(a, iv.sub(v, b))
                nb = iv.intersect(b, iv.sub(v, a)) if na is not None else None
            elif tag == "-":
                na = iv.intersect(a, iv.add(v, b))
                nb = iv.intersect(b, iv.sub(a, v)) if na is not None else None
            elif tag == "*":
                na = a
                if not iv.contains_zero(b):
                    q = iv.div(v, b)
                    na = iv.intersect(a, q) if q is not None else None
                nb = b
                if na is not None and not iv.contains_zero(na):
                    q = iv.div(v, na)
                    nb = iv.intersect(b, q) if q is not None else None
            else:  # '/'
                na = iv.intersect(a, iv.mul(v, b))
                nb = b
                if na is not None and not iv.contains_zero(v):
                    q = iv.div(na, v)
                    nb = iv.intersect(b, q) if q is not None else None
            if na is None or nb is None:
                return False
            vals[j] = nb
        if na is None:
            return False
        vals[i] = na
    return True


def atom_status(atom: Atom, box: Sequence[iv.Interval], delta: float) -> int:
    """-1 refuted on the whole box, 1 delta-true on the whole box, 0 undecided."""
    vals = forward(atom.tape, box)
    r = vals[-1]
    if r is None:
        return -1
    lo, hi = r
    if atom.op == ">=":
        if hi < 0:
            return -1
        return 1 if lo >= -delta else 0
    if atom.op == ">":
        if hi <= 0:
            return -1
        return 1 if lo > -delta else 0
    if lo > 0 or hi < 0:
        return -1
    return 1 if (lo >= -delta and hi <= delta) else 0


def atom_holds(atom: Atom, point: Mapping[str, Fraction], delta: Fraction) -> bool:
    """Exact delta-relaxed truth of ``atom`` at ``point``."""
    try:
        v = eval_expr(atom.term, point)
    except EvalError:
        return False
    if atom.op == ">=":
        return v >= -delta
    if atom.op == ">":
        return v > -delta
    return -delta <= v <= delta


def holds(node: Node, point: Mapping[str, Fraction], delta: Fraction) -> bool:
    if node is True or node is False:
        return node
    if isinstance(node, Atom):
        return atom_holds(node, point, delta)
    if isinstance(node, And):
        return all(holds(p, point, delta) for p in node.parts)
    return any(holds(p, point, delta) for p in node.parts)


def atoms(node: Node):
    if isinstance(node, Atom):
        yield node
    elif isinstance(node, (And, Or)):
        for p in node.parts:
            yield from atoms(p)


def relaxed_expr(node: Node, delta: Fraction, positive: bool = True) -> Expr:
    """Expression for the delta-relaxed reading of ``node`` (or its negation).

    A point satisfies ``relaxed_expr(n, d)`` exactly when ``holds(n, ., d)``
    is true; with ``positive=False`` exactly when it is false.
    """
    from ..speclang.expr import FALSE, TRUE, conj, disj

    if node is True or node is False:
        return TRUE if node == positive else FALSE
    if isinstance(node, Atom):
        t, lo, hi = node.term, Num(-delta), Num(delta)
        if node.op == ">=":
            return Compare(">=" if positive else "<", t, lo)
        if node.op == ">":
            return Compare(">" if positive else "<=", t, lo)
        if positive:
            return conj(Compare(">=", t, lo), Compare("<=", t, hi))
        return disj(Compare("<", t, lo), Compare(">", t, hi))
    parts = [relaxed_expr(p, delta, positive) for p in node.parts]
    if isinstance(node, And) == positive:
        return conj(*parts)
    return disj(*parts)
