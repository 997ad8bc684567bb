"""Targeted model refinement around a solution's stability region.

The true system (any evaluable model, typically an expression model) is
sampled inside the stability region of a configuration. If a finding
made on the model does not hold on the samples, the samples are added
to the training data and the model is refitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np

from .model import Dataset, ModelDef, fit_polynomial, fit_tree, save_csv
from .speclang.expr import BinOp, Compare, EvalError, Expr, Num, eval_expr, rebuild, to_fraction
from .speclang.spec import ProblemSpec, VariableDecl


@dataclass(frozen=True)
class Confirmed:
    row: dict[str, Fraction]


@dataclass(frozen=True)
class NotConfirmed:
    pass


def sample_stability_region(system: ModelDef, center: Mapping[str, Fraction],
                            input_box: Mapping[str, tuple[Fraction, Fraction]],
                            theta: Mapping[str, tuple[Fraction, Fraction]], n: int,
                            seed: int = 0) -> Dataset:
    """``n`` uniform samples of perturbed knobs and inputs with system responses.

    ``theta`` maps each knob to its allowed interval around ``center``.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    knobs = list(theta)
    inputs = list(input_box)
    cols = knobs + inputs + list(system.outputs)
    recs = []
    for _ in range(n):
        rec: dict[str, Fraction] = {}
        for k in knobs:
            lo, hi = theta[k]
            rec[k] = to_fraction(center[k]) if lo == hi else lo + Fraction(float(rng.random())) * (hi - lo)
        for x in inputs:
            lo, hi = input_box[x]
            rec[x] = lo if lo == hi else lo + Fraction(float(rng.random())) * (hi - lo)
        rec.update(system.evaluate(rec))
        recs.append(rec)
    return Dataset.from_records(cols, recs, features=inputs + knobs, responses=system.outputs)


def confirm_counterexample(system: ModelDef, assertion: Expr, samples: Dataset):
    """Confirmed when some sample violates ``assertion`` on the system."""
    for rec in samples.records():
        point = dict(rec)
        point.update(system.evaluate(rec))
        try:
            ok = eval_expr(assertion, point)
        except EvalError:
            continue
        if not ok:
            return Confirmed(point)
    return NotConfirmed()


def replicate(samples: Dataset, weight: float) -> Dataset:
    """Rows repeated ``ceil(weight)`` times (weights realised by replication)."""
    if weight <= 0:
        raise ValueError("weight must be positive")
    k = math.ceil(weight)
    rows = tuple(r for r in samples.rows for _ in range(k))
    return Dataset(samples.columns, rows, samples.features, samples.responses)


def refine_model(old: Dataset, new: Dataset, kind: str = "dt", *, max_depth: int = 15,
                 degree: int = 2, weight: float = 1.0, knobs=(), per_response: bool = True) -> ModelDef:
    """Refit on the old data plus (weighted) new samples."""
    data = old.concat(replicate(new, weight)) if len(new) else old
    if kind == "dt":
        return fit_tree(data, max_depth, knobs=knobs, per_response=per_response)
    if kind == "poly":
        return fit_polynomial(data, degree, knobs=knobs).model
    raise ValueError(f"unknown model kind {kind!r}")


def save_refined(data: Dataset, original_path) -> Path:
    p = Path(original_path)
    name = p.name
    for suffix in (".gz", ".bz2", ".csv"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    out = p.with_name(f"{name}_refined.csv")
    save_csv(data, out)
    return out


def strengthen(assertion: Expr, offset: Fraction) -> Expr:
    """Tighten every comparison of ``assertion`` by ``offset``.

    ``a >= b`` becomes ``a >= b + offset`` and ``a <= b`` becomes
    ``a <= b - offset``; equalities are left alone.
    """
    off = Num(to_fraction(offset))

    def fn(e):
        if isinstance(e, Compare):
            if e.op in (">=", ">"):
                return Compare(e.op, e.left, BinOp("+", e.right, off))
            if e.op in ("<=", "<"):
                return Compare(e.op, e.left, BinOp("-", e.right, off))
        return None

    return rebuild(assertion, fn)


def scale_radii(spec: ProblemSpec, factor: Fraction) -> ProblemSpec:
    """Spec copy with every knob's stability radius multiplied by ``factor``."""
    factor = to_fraction(factor)
    if factor < 0:
        raise ValueError("radius scale must be nonnegative")
    out = []
    for v in spec.variables:
        if v.rad_abs is not None or v.rad_rel is not None:
            v = VariableDecl(v.label, v.interface, v.dtype, v.lo, v.hi,
                             None if v.rad_abs is None else v.rad_abs * factor,
                             None if v.rad_rel is None else v.rad_rel * factor, v.grid)
        out.append(v)
    return spec.replace(variables=tuple(out))
