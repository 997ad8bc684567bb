"""Problem instances for the exploration modes.

An instance bundles the derived domain constraints, the model terms and
the variable boxes. Model outputs never become solver variables: every
output reference is replaced by the model's term over inputs and knobs,
so a formula over ``(p, x, y)`` turns into one over ``(p, x)``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from ..model import ModelDef
from ..solver.formula import Compiler, relaxed_expr
from ..solver import Box, DeltaSat, SatResult, SolverConfig, Unknown, Unsat, check_sat
from ..speclang.expr import (
    TRUE,
    BinOp,
    Compare,
    Cond,
    EvalError,
    Expr,
    Num,
    Var,
    conj,
    disj,
    eval_expr,
    free_vars,
    neg,
    substitute,
    to_fraction,
)
from ..speclang.spec import ProblemSpec, derive_domain_constraints, theta_box

log = logging.getLogger(__name__)

# absolute delta used outside of optimization threshold queries
DEFAULT_DELTA = Fraction(1, 10**9)


class ExploreError(ValueError):
    """Raised when a mode has to abort (bad witness, unbounded domain, ...)."""


def _as_bool(v) -> str:
    return "true" if v else "false"


def flag(v: bool | None) -> str:
    """Report encoding of a check outcome; ``None`` means undecided."""
    return "unknown" if v is None else _as_bool(v)


@dataclass
class GearInstance:
    spec: ProblemSpec
    model: ModelDef
    alpha: Expr  # alpha_full
    eta: Expr  # eta_full
    knob_bounds: dict[str, tuple[Fraction, Fraction]]
    input_bounds: dict[str, tuple[Fraction, Fraction]]
    integral: frozenset
    terms: dict[str, Expr]
    cfg: SolverConfig
    max_iterations: int = 400

    @property
    def knobs(self) -> list[str]:
        return list(self.knob_bounds)

    @property
    def inputs(self) -> list[str]:
        return list(self.input_bounds)

    @property
    def outputs(self) -> list[str]:
        return self.spec.outputs

    # -- formula plumbing -------------------------------------------------------

    def m(self, e: Expr) -> Expr:
        """Replace output references by model terms."""
        return substitute(e, self.terms) if free_vars(e) & set(self.terms) else e

    def fix(self, e: Expr, values: Mapping[str, Fraction]) -> Expr:
        used = free_vars(e)
        return substitute(e, {k: Num(to_fraction(v)) for k, v in values.items() if k in used})

    def box(self, knobs=None, inputs=None, knob_integral=True) -> Box:
        bounds = dict(self.knob_bounds)
        bounds.update(knobs or {})
        ib = dict(self.input_bounds)
        ib.update(inputs or {})
        bounds.update(ib)
        integral = self.integral if knob_integral else self.integral - set(self.knob_bounds)
        return Box.of(bounds, integral)

    def sat(self, f: Expr, b: Box, cfg: SolverConfig | None = None) -> SatResult:
        return check_sat(f, b, cfg or self.cfg)

    def outputs_at(self, point: Mapping[str, Fraction]) -> dict[str, Fraction]:
        a = {k: point[k] for k in self.knobs + self.inputs}
        return {y: eval_expr(t, a) for y, t in self.terms.items()}

    def theta(self, center: Mapping[str, Fraction]) -> dict[str, tuple[Fraction, Fraction]]:
        return theta_box(self.spec, center)

    def preimage(self, pc: Mapping[str, Fraction], slack: Fraction = Fraction(0)) -> Expr:
        """Knob values ``p`` whose stability region contains ``pc``.

        With ``slack`` the radius of every knob is enlarged by it.
        """
        parts = []
        for k in self.knobs:
            v = self.spec.var(k)
            p, c = Var(k), Num(pc[k])
            if v.rad_rel is not None:
                absp = Cond(p, Compare(">=", p, Num(Fraction(0))), BinOp("-", Num(Fraction(0)), p))
                r: Expr = BinOp("*", Num(v.rad_rel), absp)
                if slack:
                    r = BinOp("+", r, Num(slack))
            else:
                r = Num((v.rad_abs or Fraction(0)) + slack)
            parts.append(Compare("<=", BinOp("-", p, c), r))
            parts.append(Compare("<=", BinOp("-", c, p), r))
        return conj(*parts)

    def region_corners(self, with_inputs: bool = False, limit: int = 16) -> list[dict[str, Expr]]:
        """Corners of the stability region as expressions in the knobs.

        Knobs with zero radius have a single value and add no corners.
        ``with_inputs`` also takes the corners of the input box when that
        keeps the count within ``limit``. Returns nothing when even the
        knob corners alone exceed it.
        """
        sides = []
        for k in self.knobs:
            v = self.spec.var(k)
            p = Var(k)
            if v.rad_rel:
                absp = Cond(p, Compare(">=", p, Num(Fraction(0))), BinOp("-", Num(Fraction(0)), p))
                r: Expr = BinOp("*", Num(v.rad_rel), absp)
            elif v.rad_abs:
                r = Num(v.rad_abs)
            else:
                continue
            lo, hi = BinOp("-", p, r), BinOp("+", p, r)
            if v.lo is not None:
                lo = Cond(lo, Compare(">=", lo, Num(v.lo)), Num(v.lo))
            if v.hi is not None:
                hi = Cond(hi, Compare("<=", hi, Num(v.hi)), Num(v.hi))
            sides.append((k, (lo, hi)))
        if not sides or 2 ** len(sides) > limit:
            return []
        if with_inputs:
            extra = [(k, (Num(lo), Num(hi))) for k, (lo, hi) in self.input_bounds.items() if lo != hi]
            if 2 ** (len(sides) + len(extra)) <= limit:
                sides += extra
        return [dict(zip([k for k, _ in sides], pick)) for pick in itertools.product(*(s for _, s in sides))]

    def tightened(self, f: Expr, cfg: SolverConfig | None = None) -> Expr:
        """``f`` tightened by delta; the solver's delta slack then restores it exactly."""
        d = (cfg or self.cfg).delta
        return relaxed_expr(Compiler(self.knobs + self.inputs).compile(f), -d)

    def violation(self, f: Expr, cfg: SolverConfig | None = None) -> Expr:
        """``not f`` tightened by delta, the formula of a stability check.

        A delta-sat witness of the result violates ``f`` exactly, while
        Unsat means ``f`` fails nowhere by more than delta.
        """
        return self.tightened(neg(self.m(f)), cfg)

    def near(self, point: Mapping[str, Fraction], labels) -> Expr:
        """Box of half-width delta around ``point`` on ``labels``."""
        d = self.cfg.delta
        parts = []
        for k in labels:
            c = point[k]
            parts.append(Compare(">=", Var(k), Num(c - d)))
            parts.append(Compare("<=", Var(k), Num(c + d)))
        return conj(*parts)


def exact_truth(e: Expr, point: Mapping[str, Fraction]) -> bool | None:
    try:
        return bool(eval_expr(e, point))
    except (EvalError, KeyError):
        return None


def _bounds(spec: ProblemSpec, labels) -> dict[str, tuple[Fraction, Fraction]]:
    out = {}
    for lab in labels:
        v = spec.var(lab)
        if not v.bounded:
            raise ExploreError(
                f"variable {lab!r} has an unbounded range; exploration needs finite ranges")
        out[lab] = (v.lo, v.hi)
    return out


def build_instance(spec: ProblemSpec, model: ModelDef, cfg: SolverConfig | None = None,
                   max_iterations: int = 400) -> GearInstance:
    """Combine a spec and a model into an exploration instance."""
    for f in model.features:
        if f not in spec.inputs + spec.knobs:
            raise ExploreError(f"model feature {f!r} is not a declared input or knob")
    terms = model.terms()
    missing = [y for y in spec.outputs if y not in terms]
    if missing:
        raise ExploreError(f"model does not define declared output(s) {missing}")
    extra = [y for y in terms if y not in spec.outputs]
    if extra:
        raise ExploreError(f"model defines undeclared output(s) {extra}")
    alpha, eta = derive_domain_constraints(spec)
    alpha = conj(alpha, model.domain_constraint())
    integral = frozenset(v.label for v in spec.variables
                         if v.dtype == "int" and v.interface in ("input", "knob"))
    return GearInstance(
        spec=spec,
        model=model,
        alpha=alpha,
        eta=eta,
        knob_bounds=_bounds(spec, spec.knobs),
        input_bounds=_bounds(spec, spec.inputs),
        integral=integral,
        terms=terms,
        cfg=cfg or SolverConfig(delta=DEFAULT_DELTA),
        max_iterations=max_iterations,
    )


def _decided(r: SatResult) -> bool | None:
    if isinstance(r, Unknown):
        return None
    return isinstance(r, DeltaSat)


def interface_consistent(inst: GearInstance) -> bool | None:
    """Satisfiability of alpha and eta together."""
    return _decided(inst.sat(conj(inst.alpha, inst.eta), inst.box()))


def model_consistent(inst: GearInstance) -> bool | None:
    """Satisfiability of alpha, eta and the model constraints.

    The model is total on its domain, so this only differs from the
    interface check through the model's own domain condition.
    """
    return _decided(inst.sat(conj(inst.alpha, inst.eta, inst.model.domain_constraint()), inst.box()))


def infer_values(inst: GearInstance, labels, what: str) -> dict[str, Fraction]:
    """Values forced by point ranges or singleton grids, else abort."""
    out = {}
    for lab in labels:
        v = inst.spec.var(lab)
        if v.grid is not None and len(v.grid) == 1:
            out[lab] = v.grid[0]
        elif v.lo is not None and v.lo == v.hi:
            out[lab] = v.lo
        else:
            raise ExploreError(
                f"no {what} given and no unique value can be inferred for {lab!r} "
                "from its range or grid")
    return out


# -- stable search ------------------------------------------------------------


@dataclass
class SearchOutcome:
    status: str  # PASS / FAIL / UNKNOWN
    feasible: bool | None
    knobs: dict[str, Fraction] | None = None
    inputs: dict[str, Fraction] | None = None
    iterations: int = 0
    reason: str = ""


def find_stable(inst: GearInstance, cond: Expr, per_witness: bool, extra: Expr = TRUE,
                cfg: SolverConfig | None = None) -> SearchOutcome:
    """Counterexample-guided search for a stable knob configuration.

    ``cond`` is the requirement over inputs, knobs and outputs. With
    ``per_witness`` the inputs belong to the solution (a stable witness
    pair); otherwise the configuration must work for every legal input.
    ``extra`` is a knob/input side condition on the candidate only.
    """
    cfg = cfg or inst.cfg
    cond_m = inst.m(cond)
    # "outside alpha" must hold exactly, or the solver's slack lets a point a
    # hair outside the legal inputs or knob ranges escape the condition
    refuted = disj(inst.tightened(neg(inst.alpha), cfg), cond_m)
    # a stable candidate meets the condition at its region corners too (for
    # every input unless the inputs are part of the solution); these
    # necessary conditions prune most candidates before any stability check
    corners = [substitute(refuted, c) for c in inst.region_corners(with_inputs=not per_witness)]
    base = conj(inst.eta, inst.alpha, cond_m, inst.m(extra), *corners)
    full = inst.box()
    learned: list[Expr] = []
    feasible = None
    for it in range(1, inst.max_iterations + 1):
        r = inst.sat(conj(base, *learned), full, cfg)
        if isinstance(r, Unknown):
            return SearchOutcome("UNKNOWN", feasible, iterations=it, reason=r.reason)
        if isinstance(r, Unsat):
            if feasible is None and corners:
                # the corner conditions hid plain feasibility; ask for it directly
                plain = inst.sat(conj(inst.eta, inst.alpha, cond_m, inst.m(extra)), full, cfg)
                feasible = None if isinstance(plain, Unknown) else isinstance(plain, DeltaSat)
                return SearchOutcome("FAIL", feasible, iterations=it)
            return SearchOutcome("FAIL", bool(feasible), iterations=it)
        feasible = True
        w = r.witness
        p_star = {k: w[k] for k in inst.knobs}
        x_star = {k: w[k] for k in inst.inputs}
        region = inst.theta(p_star)
        pinned = {k: (v, v) for k, v in x_star.items()} if per_witness else None
        region_box = inst.box(region, pinned, knob_integral=False)
        s = inst.sat(conj(inst.alpha, inst.violation(cond_m, cfg)), region_box, cfg)
        if isinstance(s, Unknown):
            return SearchOutcome("UNKNOWN", True, p_star, x_star, it, s.reason)
        if isinstance(s, Unsat):
            log.debug("stable solution after %d candidate(s)", it)
            return SearchOutcome("PASS", True, p_star, x_star, it)
        pc = {k: s.witness[k] for k in inst.knobs}
        xc = {k: s.witness[k] for k in inst.inputs}
        # The counterexample violates the condition exactly, so every
        # candidate whose region reaches it can be dropped for good.
        # tightened, or the solver's slack would keep proposing candidates
        # just inside the hole
        outside = inst.tightened(neg(inst.preimage(pc)), cfg)
        if per_witness:
            # candidates whose region reaches pc must survive there
            learned.append(disj(outside, inst.fix(refuted, pc)))
        else:
            learned.append(outside)
            # a stable configuration also survives at its own knobs and at
            # its region corners for xc
            learned.append(inst.fix(conj(refuted, *corners), xc))
        log.debug("candidate %d at %s rejected; counterexample at %s", it, p_star, pc)
    return SearchOutcome("UNKNOWN", feasible, iterations=inst.max_iterations,
                         reason=f"iteration budget of {inst.max_iterations} exhausted")
