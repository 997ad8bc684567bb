"""Design-of-experiments matrices built from per-feature value grids."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import write_csv
from .speclang.expr import to_fraction

ALGORITHMS = ("full_factorial", "latin_hypercube", "sukharev", "uniform_random")


class DoeError(ValueError):
    pass


@dataclass(frozen=True)
class FactorGrid:
    factors: tuple[tuple[str, tuple[Fraction, ...]], ...]

    def __post_init__(self):
        labels = [lab for lab, _ in self.factors]
        if len(set(labels)) != len(labels):
            raise DoeError("duplicate feature labels in grid")
        for lab, vals in self.factors:
            if not vals:
                raise DoeError(f"feature {lab!r} has no levels")

    @classmethod
    def of(cls, levels: dict) -> FactorGrid:
        return cls(tuple((lab, tuple(to_fraction(v) for v in vals)) for lab, vals in levels.items()))

    @property
    def labels(self) -> list[str]:
        return [lab for lab, _ in self.factors]

    def bounds(self) -> list[tuple[Fraction, Fraction]]:
        return [(min(v), max(v)) for _, v in self.factors]


@dataclass(frozen=True)
class DoeMatrix:
    columns: tuple[str, ...]
    rows: tuple[tuple[Fraction, ...], ...]

    def __len__(self):
        return len(self.rows)


def full_factorial(g: FactorGrid) -> DoeMatrix:
    """Every combination of levels; the first feature varies fastest."""
    levels = [vals for _, vals in g.factors]
    rows = [tuple(reversed(c)) for c in itertools.product(*reversed(levels))]
    return DoeMatrix(tuple(g.labels), tuple(rows))


def latin_hypercube(g: FactorGrid, n: int, seed: int = 0) -> DoeMatrix:
    """``n`` rows; within each column no grid value is used twice."""
    shortest = min(len(v) for _, v in g.factors)
    if n > shortest:
        raise DoeError(f"latin hypercube needs n <= {shortest} (shortest level list), got {n}")
    if n < 0:
        raise DoeError("negative sample count")
    rng = np.random.default_rng(seed)
    cols = []
    for _, vals in g.factors:
        # pick n distinct strata of the level list, then one level per stratum
        edges = np.linspace(0, len(vals), n + 1)
        picks = [int(rng.integers(math.floor(edges[i]), max(math.floor(edges[i]) + 1, math.floor(edges[i + 1]))))
                 for i in range(n)]
        rng.shuffle(picks)
        cols.append([vals[i] for i in picks])
    return DoeMatrix(tuple(g.labels), tuple(zip(*cols)) if n else ())


def sukharev_grid(g: FactorGrid, n: int) -> DoeMatrix:
    """Cell centres of a ``k**d`` grid over the level bounds, ``k = floor(n**(1/d))``."""
    d = len(g.factors)
    k = int(math.floor(n ** (1.0 / d) + 1e-9)) if n > 0 else 0
    while (k + 1) ** d <= n:
        k += 1
    while k > 0 and k**d > n:
        k -= 1
    axes = []
    for lo, hi in g.bounds():
        axes.append([lo + (2 * i + 1) * (hi - lo) / (2 * k) for i in range(k)])
    rows = [tuple(reversed(c)) for c in itertools.product(*reversed(axes))] if k else []
    return DoeMatrix(tuple(g.labels), tuple(rows))


def uniform_random(g: FactorGrid, n: int, seed: int = 0) -> DoeMatrix:
    rng = np.random.default_rng(seed)
    bounds = g.bounds()
    rows = []
    for _ in range(n):
        row = []
        for lo, hi in bounds:
            u = Fraction(float(rng.random()))
            row.append(lo + u * (hi - lo))
        rows.append(tuple(row))
    return DoeMatrix(tuple(g.labels), tuple(rows))


def generate(algo: str, g: FactorGrid, n: int | None = None, seed: int = 0) -> DoeMatrix:
    if algo == "full_factorial":
        return full_factorial(g)
    if n is None:
        raise DoeError(f"{algo} needs a sample count")
    if algo == "latin_hypercube":
        return latin_hypercube(g, n, seed)
    if algo == "sukharev":
        return sukharev_grid(g, n)
    if algo == "uniform_random":
        return uniform_random(g, n, seed)
    raise DoeError(f"unsupported DOE algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")


def load_grid(path) -> FactorGrid:
    """Read a grid file: header of feature names, one column of levels each.

    Columns may have different lengths; blank cells are skipped.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DoeError(f"empty DOE grid file {path}")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DoeError(f"duplicate feature labels in {path}")
    levels: dict[str, list[Fraction]] = {h: [] for h in header}
    for r in rows[1:]:
        for h, cell in zip(header, r):
            cell = cell.strip()
            if cell:
                try:
                    levels[h].append(to_fraction(cell))
                except (ValueError, ZeroDivisionError):
                    raise DoeError(f"non-numeric level {cell!r} for {h!r}") from None
    return FactorGrid(tuple((h, tuple(v)) for h, v in levels.items()))


def save_matrix(m: DoeMatrix, path) -> None:
    write_csv(path, m.columns, m.rows)


def distinct_per_column(m: DoeMatrix) -> bool:
    return all(len(set(col)) == len(col) for col in zip(*m.rows)) if m.rows else True


def rows_within(m: DoeMatrix, g: FactorGrid) -> bool:
    bounds = g.bounds()
    return all(lo <= v <= hi for r in m.rows for v, (lo, hi) in zip(r, bounds))


__all__: Sequence[str] = [
    "FactorGrid", "DoeMatrix", "DoeError", "full_factorial", "latin_hypercube",
    "sukharev_grid", "uniform_random", "generate", "load_grid", "save_matrix",
]
