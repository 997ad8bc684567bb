"""Delta-complete branch-and-prune satisfiability over boxes.

Soundness: ``Unsat`` is exact (every discarded region is refuted by
outward-rounded interval evaluation or exact evaluation at a point).
``DeltaSat`` witnesses satisfy every atom with each ``t >= 0`` relaxed
to ``t >= -delta`` and each ``t == 0`` relaxed to ``|t| <= delta``;
the witness is re-checked with exact rational arithmetic before it is
returned.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from ..speclang.expr import Expr, conj, neg, to_fraction
from . import interval as iv
from .formula import And, Atom, Compiler, Node, Or, atom_status, hc4_revise, holds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Box:
    bounds: Mapping[str, tuple[Fraction, Fraction]]
    integral: frozenset = frozenset()

    def __post_init__(self):
        for v, (lo, hi) in self.bounds.items():
            if lo is None or hi is None:
                raise ValueError(f"unbounded variable {v!r}; the kernel needs finite boxes")
            if lo > hi:
                raise ValueError(f"empty interval for {v!r}")

    @classmethod
    def of(cls, bounds: Mapping, integral=()) -> Box:
        return cls({v: (to_fraction(lo), to_fraction(hi)) for v, (lo, hi) in bounds.items()},
                   frozenset(integral))

    @property
    def variables(self) -> list[str]:
        return list(self.bounds)

    def contains(self, point: Mapping[str, Fraction]) -> bool:
        return all(lo <= point[v] <= hi for v, (lo, hi) in self.bounds.items())

    def center(self) -> dict[str, Fraction]:
        return {v: _center(lo, hi, v in self.integral) for v, (lo, hi) in self.bounds.items()}

    def restrict(self, bounds: Mapping) -> Box:
        """Copy with some variables' intervals replaced."""
        nb = dict(self.bounds)
        for v, (lo, hi) in bounds.items():
            nb[v] = (to_fraction(lo), to_fraction(hi))
        return Box(nb, self.integral)

    def point(self, values: Mapping) -> Box:
        return self.restrict({v: (x, x) for v, x in values.items()})


@dataclass(frozen=True)
class SolverConfig:
    delta: Fraction = Fraction(1, 10**9)
    epsilon: Fraction = Fraction(1, 20)
    max_splits: int = 200_000
    seed: int = 0
    trace: Callable[[str], None] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", to_fraction(self.delta))
        object.__setattr__(self, "epsilon", to_fraction(self.epsilon))
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def with_delta(self, delta) -> SolverConfig:
        return SolverConfig(delta, self.epsilon, self.max_splits, self.seed, self.trace)


@dataclass(frozen=True)
class DeltaSat:
    witness: dict[str, Fraction]


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str


SatResult = DeltaSat | Unsat | Unknown


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class CounterExample:
    point: dict[str, Fraction]


ValidResult = Valid | CounterExample | Unknown


def _center(lo: Fraction, hi: Fraction, integral: bool) -> Fraction:
    if integral:
        return Fraction(math.floor((lo + hi) / 2))
    return (lo + hi) / 2


class _Search:
    def __init__(self, node: Node, box: Box, cfg: SolverConfig):
        self.cfg = cfg
        self.names = box.variables
        self.node = node
        self.ints = [v in box.integral for v in self.names]
        self.width0 = [hi - lo for lo, hi in box.bounds.values()]
        self.delta_f = float(cfg.delta)
        self.splits = 0
        self.undecided_leaf = False
        self.trace = cfg.trace

    def _say(self, msg: str) -> None:
        if self.trace is not None:
            self.trace(msg)

    def run(self, box: Box) -> SatResult:
        if self.node is False:
            return Unsat()
        lo = [b[0] for b in box.bounds.values()]
        hi = [b[1] for b in box.bounds.values()]
        if not self._round_ints(lo, hi):
            return Unsat()
        parts = [] if self.node is True else (
            list(self.node.parts) if isinstance(self.node, And) else [self.node])
        stack = [(parts, lo, hi)]
        while stack:
            parts, lo, hi = stack.pop()
            res = self._process(parts, lo, hi, stack)
            if res is not None:
                return res
        if self.undecided_leaf:
            return Unknown("undecidable boxes at floating-point resolution")
        return Unsat()

    def _round_ints(self, lo, hi) -> bool:
        for i, is_int in enumerate(self.ints):
            if is_int:
                lo[i] = Fraction(math.ceil(lo[i]))
                hi[i] = Fraction(math.floor(hi[i]))
            if lo[i] > hi[i]:
                return False
        return True

    def _contract(self, parts, lo, hi) -> bool:
        atoms_ = [p for p in parts if isinstance(p, Atom)]
        if not atoms_:
            return True
        for _ in range(4):
            changed = False
            for a in atoms_:
                if a.bound_var is not None:
                    i, q = a.bound_var, a.bound_value
                    if a.bound_kind in ("lo", "eq") and q > lo[i]:
                        lo[i] = q
                        changed = True
                    if a.bound_kind in ("hi", "eq") and q < hi[i]:
                        hi[i] = q
                        changed = True
                    if lo[i] > hi[i]:
                        return False
                    if a.strict and lo[i] == hi[i] == q:
                        return False
                    continue
                fbox = [(iv.lower_float(l), iv.upper_float(h)) for l, h in zip(lo, hi)]
                before = list(fbox)
                if not hc4_revise(a, fbox):
                    return False
                for i, (nb, ob) in enumerate(zip(fbox, before)):
                    if nb[0] > ob[0]:
                        q = Fraction(nb[0])
                        if q > lo[i]:
                            lo[i] = q
                            changed = True
                    if nb[1] < ob[1]:
                        q = Fraction(nb[1])
                        if q < hi[i]:
                            hi[i] = q
                            changed = True
            if not self._round_ints(lo, hi):
                return False
            if not changed:
                break
        return True

    def _status(self, node, fbox) -> int:
        if isinstance(node, Atom):
            return atom_status(node, fbox, self.delta_f)
        if isinstance(node, And):
            worst = 1
            for p in node.parts:
                s = self._status(p, fbox)
                if s < 0:
                    return -1
                worst = min(worst, s)
            return worst
        best = -1
        for p in node.parts:
            s = self._status(p, fbox)
            if s > 0:
                return 1
            best = max(best, s)
        return best

    def _process(self, parts, lo, hi, stack):
        if not self._contract(parts, lo, hi):
            self._say(f"prune contraction {self._fmt(lo, hi)}")
            return None
        fbox = [(iv.lower_float(l), iv.upper_float(h)) for l, h in zip(lo, hi)]
        open_parts = []
        for p in parts:
            s = self._status(p, fbox)
            if s < 0:
                self._say(f"prune refuted {self._fmt(lo, hi)}")
                return None
            if s == 0:
                open_parts.append(p)
        if not open_parts:
            return self._accept(lo, hi, stack)
        disjunction = next((p for p in open_parts if isinstance(p, Or)), None)
        if disjunction is not None:
            rest = [p for p in open_parts if p is not disjunction]
            branches = []
            for d in disjunction.parts:
                if self._status(d, fbox) < 0:
                    continue
                extra = list(d.parts) if isinstance(d, And) else [d]
                branches.append((rest + extra, list(lo), list(hi)))
            self.splits += 1
            self._say(f"branch {len(branches)} disjuncts {self._fmt(lo, hi)}")
            stack.extend(reversed(branches))
            return None
        return self._split(open_parts, lo, hi, stack)

    def _split(self, parts, lo, hi, stack):
        best, best_w = None, Fraction(0)
        for i in range(len(lo)):
            w = hi[i] - lo[i]
            if w == 0 or self.width0[i] == 0:
                continue
            nw = w / self.width0[i]
            if nw > best_w:
                best, best_w = i, nw
        point = {n: _center(l, h, k) for n, l, h, k in zip(self.names, lo, hi, self.ints)}
        if best is None or self._too_narrow(lo[best], hi[best]):
            if holds(And(tuple(parts)) if len(parts) > 1 else parts[0], point, self.cfg.delta) \
                    and holds(self.node, point, self.cfg.delta):
                return DeltaSat(point)
            if best is not None:
                self.undecided_leaf = True
            return None
        i = best
        if self.splits >= self.cfg.max_splits:
            return Unknown(f"split budget of {self.cfg.max_splits} exhausted")
        self.splits += 1
        if self.ints[i]:
            m = Fraction(math.floor((lo[i] + hi[i]) / 2))
            left_hi, right_lo = m, m + 1
        else:
            m = (lo[i] + hi[i]) / 2
            left_hi = right_lo = m
        self._say(f"split {self.names[i]} at {float(m)!r}")
        hi_l = list(hi)
        hi_l[i] = left_hi
        lo_r = list(lo)
        lo_r[i] = right_lo
        stack.append((parts, lo_r, list(hi)))
        stack.append((parts, list(lo), hi_l))
        return None

    @staticmethod
    def _too_narrow(lo: Fraction, hi: Fraction) -> bool:
        m = float((lo + hi) / 2)
        scale = max(abs(m), 1e-300)
        return float(hi - lo) <= scale * 1e-15

    def _accept(self, lo, hi, stack):
        point = {n: _center(l, h, k) for n, l, h, k in zip(self.names, lo, hi, self.ints)}
        if holds(self.node, point, self.cfg.delta):
            self._say(f"accept {self._fmt(lo, hi)}")
            return DeltaSat(point)
        # rounding made the box look better than it is; keep refining
        return self._split([self.node] if self.node is not True else [], lo, hi, stack) \
            if self.node is not True else DeltaSat(point)

    def _fmt(self, lo, hi) -> str:
        return " ".join(f"{n}=[{float(l):.6g},{float(h):.6g}]" for n, l, h in zip(self.names, lo, hi))


def check_sat(f: Expr, b: Box, cfg: SolverConfig | None = None) -> SatResult:
    """Decide ``f`` over box ``b`` up to delta."""
    cfg = cfg or SolverConfig()
    node = Compiler(b.variables).compile(f)
    return _Search(node, b, cfg).run(b)


def check_valid(f: Expr, b: Box, cfg: SolverConfig | None = None) -> ValidResult:
    """Validity of ``f`` on ``b`` via satisfiability of its negation."""
    r = check_sat(neg(f), b, cfg)
    if isinstance(r, Unsat):
        return Valid()
    if isinstance(r, DeltaSat):
        return CounterExample(r.witness)
    return r


def exclude_region(b: Box, f: Expr, hole: Expr) -> Expr:
    """``f`` with the region described by ``hole`` removed."""
    from ..speclang.expr import free_vars

    extra = free_vars(hole) - set(b.variables)
    if extra:
        raise ValueError(f"hole mentions variables outside the box: {sorted(extra)}")
    return conj(f, neg(hole))


def enclose(term: Expr, b: Box) -> tuple[float, float]:
    """Outward-rounded range of a numeric term over ``b``.

    Conditionals contribute the hull of both branches; division by an
    interval containing zero yields the whole line.
    """
    from ..speclang.expr import BinOp, Cond, Num, UnaryOp, Var

    fbox = {v: (iv.lower_float(lo), iv.upper_float(hi)) for v, (lo, hi) in b.bounds.items()}

    def go(e):
        if isinstance(e, Num):
            return iv.from_fraction(e.value)
        if isinstance(e, Var):
            return fbox[e.name]
        if isinstance(e, UnaryOp) and e.op == "-":
            return iv.neg(go(e.operand))
        if isinstance(e, Cond):
            return iv.hull(go(e.then), go(e.orelse))
        if isinstance(e, BinOp):
            a = go(e.left)
            if e.op == "**":
                if not isinstance(e.right, Num) or e.right.value.denominator != 1:
                    return iv.ENTIRE
                return iv.powi(a, int(e.right.value)) or iv.ENTIRE
            c = go(e.right)
            if e.op == "+":
                return iv.add(a, c)
            if e.op == "-":
                return iv.sub(a, c)
            if e.op == "*":
                return iv.mul(a, c)
            if e.op == "/":
                return iv.div(a, c) or iv.ENTIRE
        raise ValueError(f"not a numeric term: {e!r}")

    return go(term)
