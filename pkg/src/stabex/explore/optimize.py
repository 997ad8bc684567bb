"""Stable max-min optimization by binary search on objective thresholds.

Objectives are scaled affinely so that their minimum over the training
data maps to 0 and the maximum to 1. Each search step asks for a stable
configuration whose scaled objective stays at or above a threshold
everywhere in its stability region and for every legal input.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from ..solver import SolverConfig, enclose
from ..speclang.expr import BinOp, Compare, Expr, Num, conj, eval_expr
from .instance import ExploreError, GearInstance, find_stable, flag
from .modes import ModeReport, _globals, _point, synthesis_condition

log = logging.getLogger(__name__)

ProgressSink = Callable[[dict], None]


@dataclass(frozen=True)
class Scaling:
    lo: Fraction  # min_in_data
    hi: Fraction  # max_in_data

    @property
    def span(self) -> Fraction:
        # degenerate data range: shift only
        return self.hi - self.lo if self.hi != self.lo else Fraction(1)

    def scale(self, v: Fraction) -> Fraction:
        return (v - self.lo) / self.span

    def unscale(self, s: Fraction) -> Fraction:
        return self.lo + s * self.span

    def term(self, e: Expr) -> Expr:
        return BinOp("/", BinOp("-", e, Num(self.lo)), Num(self.span))


@dataclass
class ThresholdState:
    name: str
    scaling: Scaling
    lo_scaled: Fraction
    up_scaled: Fraction

    def __post_init__(self):
        if self.lo_scaled > self.up_scaled:
            raise ValueError("threshold bounds crossed")

    @property
    def lo(self) -> Fraction:
        return self.scaling.unscale(self.lo_scaled)

    @property
    def up(self) -> Fraction:
        return self.scaling.unscale(self.up_scaled)

    @property
    def gap(self) -> Fraction:
        return self.up_scaled - self.lo_scaled


@dataclass
class OptimizationResult:
    status: str  # PASS when an epsilon-solution was reached, FAIL if infeasible
    states: dict[str, ThresholdState] = field(default_factory=dict)
    knobs: dict[str, Fraction] | None = None
    inputs: dict[str, Fraction] | None = None
    last: str | None = None
    steps: int = 0
    reason: str = ""


_GRID = 10**6  # bracket endpoints are rounded outward to this resolution


def _bracket(inst: GearInstance, s_term: Expr) -> tuple[Fraction, Fraction]:
    """Sound initial bounds on a scaled objective over the whole domain."""
    lo, hi = enclose(inst.m(s_term), inst.box())
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ExploreError("objective is unbounded over the domain; cannot initialise the search")
    return (Fraction(math.floor(Fraction(lo) * _GRID), _GRID),
            Fraction(math.ceil(Fraction(hi) * _GRID), _GRID))


def _ge(term: Expr, z: Fraction) -> Expr:
    return Compare(">=", term, Num(z))


class _Search:
    def __init__(self, inst, cond, objectives, bounds, cfg, sink):
        self.inst = inst
        self.cond = cond
        self.cfg = cfg
        self.sink = sink
        self.scaled = {}
        self.states: dict[str, ThresholdState] = {}
        for name, e in objectives.items():
            if name not in bounds:
                raise ExploreError(f"no data bounds for objective {name!r}")
            sc = Scaling(*map(Fraction, bounds[name]))
            self.scaled[name] = sc.term(e)
            lo, up = _bracket(inst, self.scaled[name])
            self.states[name] = ThresholdState(name, sc, lo, up)
        self.knobs = None
        self.inputs = None
        self.steps = 0

    def emit(self, name: str) -> None:
        self.steps += 1
        if self.sink is None:
            return
        st = self.states[name]
        row = {"iteration": self.steps, "objective": name,
               "threshold_lo_scaled": st.lo_scaled, "threshold_up_scaled": st.up_scaled,
               "threshold_lo": st.lo, "threshold_up": st.up}
        if self.knobs is not None:
            row.update(self.knobs)
            pt = {**self.knobs, **self.inputs}
            row.update(self.inst.outputs_at(pt))
        self.sink(row)

    def held(self, skip: str | None) -> Expr:
        return conj(*(_ge(self.scaled[n], st.lo_scaled)
                      for n, st in self.states.items() if n != skip))

    def feasible(self):
        out = find_stable(self.inst, self.cond, per_witness=False, cfg=self.cfg)
        if out.status == "PASS":
            self.knobs, self.inputs = out.knobs, out.inputs
        return out

    def raise_threshold(self, name: str, others_held: bool) -> str:
        st = self.states[name]
        eps = self.cfg.epsilon
        d = self.cfg.delta
        while st.gap > eps:
            z = (st.lo_scaled + st.up_scaled) / 2
            # A PASS is only delta-stable, so ask for z + delta: the solution
            # then keeps the objective at or above z. A FAIL rules out any
            # configuration reaching z + delta.
            cond = conj(self.cond, _ge(self.scaled[name], z + d))
            if others_held:
                cond = conj(cond, self.held(name))
            out = find_stable(self.inst, cond, per_witness=False, cfg=self.cfg)
            if out.status == "PASS":
                st.lo_scaled = z
                self.knobs, self.inputs = out.knobs, out.inputs
            elif out.status == "FAIL":
                st.up_scaled = z + d
            else:
                return out.reason or "solver budget exhausted"
            log.info("%s: scaled threshold in [%s, %s]", name, float(st.lo_scaled), float(st.up_scaled))
            self.emit(name)
        return ""


def optimize(inst: GearInstance, objectives: Mapping[str, Expr] | None = None,
             bounds: Mapping[str, tuple[Fraction, Fraction]] | None = None,
             assertions: Mapping[str, Expr] | None = None, pareto: bool = True,
             delta: Fraction | None = None, sink: ProgressSink | None = None) -> tuple[ModeReport, OptimizationResult]:
    """Maximise the worst-case scaled objectives over stable configurations.

    ``assertions`` (optsyn) are conjoined with beta inside the stability
    requirement; ``optimize`` proper passes none. ``delta`` is the
    solver tolerance in scaled objective units.
    """
    objectives = inst.spec.objectives if objectives is None else objectives
    if not objectives:
        raise ExploreError("no objectives to optimize")
    if bounds is None:
        raise ExploreError("objective bounds from data are required for scaling")
    cfg = inst.cfg if delta is None else inst.cfg.with_delta(delta)
    if cfg.epsilon <= 2 * cfg.delta:
        # each step shrinks the gap to half plus delta; it must be able to reach epsilon
        raise ExploreError(f"epsilon ({cfg.epsilon}) must exceed twice the delta ({cfg.delta})")
    cond = synthesis_condition(inst, assertions)
    g, ok = _globals(inst)
    res = OptimizationResult("ERROR")
    search = None
    if ok:
        search = _Search(inst, cond, objectives, bounds, cfg, sink)
        res.states = search.states
        first = search.feasible()
        res.status = first.status
        res.reason = first.reason
        if first.status == "PASS":
            names = list(objectives)
            if pareto:
                reason = ""
                for name in names:
                    reason = search.raise_threshold(name, others_held=True)
                    res.last = name
                    if reason:
                        break
            else:
                reason = ""
                for name in names:
                    # independent searches; the reported point is the last one found
                    reason = search.raise_threshold(name, others_held=False)
                    res.last = name
                    if reason:
                        break
            if reason:
                res.status, res.reason = "UNKNOWN", reason
            res.knobs, res.inputs, res.steps = search.knobs, search.inputs, search.steps
    elif ok is None:
        res.status = "UNKNOWN"
    return _report(inst, objectives, res, g, search), res


def _report(inst, objectives, res: OptimizationResult, g, search) -> ModeReport:
    rep = ModeReport("optimize", globals=dict(g), flat=True)
    out: dict = {}
    pt = None
    if res.knobs is not None:
        pt = {**res.knobs, **res.inputs}
        outs = inst.outputs_at(pt)
        full = {**pt, **outs}
    for name, e in objectives.items():
        st = res.states.get(name)
        item = {"value_in_config": float(eval_expr(e, full)) if pt else None}
        if st is not None:
            item.update(threshold_scaled=float(st.lo_scaled), threshold=float(st.lo),
                        max_in_data=float(st.scaling.hi), min_in_data=float(st.scaling.lo))
        out[name] = item
    if pt is not None:
        system = inst.spec.system
        sys_vals = {y: eval_expr(system[y], pt) if y in system else outs[y] for y in outs}
        for y in inst.outputs:
            out[y] = {"value_in_config": float(outs[y]), "value_in_system": float(sys_vals[y])}
        for k, v in _point(res.knobs).items():
            out[k] = {"value_in_config": v}
        for k, v in _point(res.inputs).items():
            out[k] = {"value_in_config": v}
    last = res.last or (list(objectives)[-1] if objectives else None)
    st = res.states.get(last) if last else None
    if st is not None:
        if pt is not None:
            val = st.scaling.scale(eval_expr(objectives[last], full))
            out[f"{last}_scaled"] = {"value_in_config": float(val)}
        out["threshold_lo_scaled"] = {"value_in_config": float(st.lo_scaled)}
        out["threshold_lo"] = {"value_in_config": float(st.lo)}
        out["threshold_up_scaled"] = {"value_in_config": float(st.up_scaled)}
        out["threshold_up"] = {"value_in_config": float(st.up)}
        out["max_in_data"] = {"value_in_config": 1.0}
        out["min_in_data"] = {"value_in_config": 0.0}
    out.update(g)
    if res.knobs is not None:
        out["synthesis_feasible"] = "true"
    else:
        out["synthesis_feasible"] = "unknown" if res.status == "UNKNOWN" else "false"
    rep.items["optimization"] = out
    rep.globals = {}
    return rep


def optsyn(inst: GearInstance, assertions: Mapping[str, Expr] | None = None, **kw):
    """Optimization with the assertions required throughout the stability region."""
    assertions = inst.spec.assertions if assertions is None else assertions
    return optimize(inst, assertions=assertions, **kw)
