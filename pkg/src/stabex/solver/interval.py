"""Outward-rounded float interval arithmetic.

Intervals are ``(lo, hi)`` float pairs. Every operation widens its result
by one ulp on each side, so the true real-valued range is always
enclosed. ``None`` stands for the empty interval.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

INF = math.inf
ENTIRE = (-INF, INF)

Interval = tuple[float, float]


def down(x: float) -> float:
    return math.nextafter(x, -INF)


def up(x: float) -> float:
    return math.nextafter(x, INF)


@lru_cache(maxsize=65536)
def from_fraction(q: Fraction) -> Interval:
    f = float(q)
    if Fraction(f) == q:
        return (f, f)
    return (down(f), up(f))


def lower_float(q: Fraction) -> float:
    return from_fraction(q)[0]


def upper_float(q: Fraction) -> float:
    return from_fraction(q)[1]


def intersect(a: Interval, b: Interval) -> Interval | None:
    lo = a[0] if a[0] > b[0] else b[0]
    hi = a[1] if a[1] < b[1] else b[1]
    if lo > hi:
        return None
    return (lo, hi)


def hull(a: Interval | None, b: Interval | None) -> Interval | None:
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]))


def contains_zero(a: Interval) -> bool:
    return a[0] <= 0.0 <= a[1]


def add(a: Interval, b: Interval) -> Interval:
    return (down(a[0] + b[0]), up(a[1] + b[1]))


def sub(a: Interval, b: Interval) -> Interval:
    return (down(a[0] - b[1]), up(a[1] - b[0]))


def neg(a: Interval) -> Interval:
    return (-a[1], -a[0])


def _prod(x: float, y: float) -> float:
    if x == 0.0 or y == 0.0:
        return 0.0
    return x * y


def mul(a: Interval, b: Interval) -> Interval:
    if a[0] == a[1] == 0.0 or b[0] == b[1] == 0.0:
        return (0.0, 0.0)
    ps = (_prod(a[0], b[0]), _prod(a[0], b[1]), _prod(a[1], b[0]), _prod(a[1], b[1]))
    return (down(min(ps)), up(max(ps)))


def _quot(x: float, y: float) -> float:
    if x == 0.0:
        return 0.0
    if math.isinf(y):
        return 0.0 if not math.isinf(x) else math.copysign(INF, x) * math.copysign(1.0, y)
    return x / y


def div(a: Interval, b: Interval) -> Interval | None:
    """``a / b``; entire line when ``b`` straddles zero, empty when ``b == 0``."""
    if b[0] == b[1] == 0.0:
        return None
    if contains_zero(b):
        return ENTIRE
    qs = (_quot(a[0], b[0]), _quot(a[0], b[1]), _quot(a[1], b[0]), _quot(a[1], b[1]))
    return (down(min(qs)), up(max(qs)))


def _pow_down(x: float, k: int) -> float:
    try:
        v = x**k
    except OverflowError:
        return math.copysign(INF, x) if k % 2 else INF
    return v - abs(v) * 4e-16 - 5e-324 if not math.isinf(v) else v


def _pow_up(x: float, k: int) -> float:
    try:
        v = x**k
    except OverflowError:
        return math.copysign(INF, x) if k % 2 else INF
    return v + abs(v) * 4e-16 + 5e-324 if not math.isinf(v) else v


def powi(a: Interval, k: int) -> Interval | None:
    if k == 0:
        return (1.0, 1.0)
    if k < 0:
        p = powi(a, -k)
        return div((1.0, 1.0), p)
    if k == 1:
        return a
    lo, hi = a
    if k % 2:
        return (_pow_down(lo, k), _pow_up(hi, k))
    if lo >= 0:
        return (max(0.0, _pow_down(lo, k)), _pow_up(hi, k))
    if hi <= 0:
        return (max(0.0, _pow_down(-hi, k)), _pow_up(-lo, k))
    return (0.0, _pow_up(max(-lo, hi), k))


def _root_down(x: float, k: int) -> float:
    if math.isinf(x):
        return x
    r = math.copysign(abs(x) ** (1.0 / k), x)
    return r - abs(r) * 1e-12 - 5e-324


def _root_up(x: float, k: int) -> float:
    if math.isinf(x):
        return x
    r = math.copysign(abs(x) ** (1.0 / k), x)
    return r + abs(r) * 1e-12 + 5e-324


def inv_powi(v: Interval, base: Interval, k: int) -> Interval | None:
    """Contract ``base`` given ``base ** k`` lies in ``v`` (k >= 1)."""
    if k == 1:
        return intersect(base, v)
    if k % 2:
        return intersect(base, (_root_down(v[0], k), _root_up(v[1], k)))
    if v[1] < 0:
        return None
    r_hi = _root_up(v[1], k)
    if v[0] <= 0:
        return intersect(base, (-r_hi, r_hi))
    r_lo = _root_down(v[0], k)
    pos = intersect(base, (r_lo, r_hi))
    negp = intersect(base, (-r_hi, -r_lo))
    return hull(pos, negp)
