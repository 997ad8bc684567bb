"""Problem specification files (JSON, suffix ``.spec``)."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .expr import (
    TRUE,
    Compare,
    Expr,
    ExprSyntaxError,
    Num,
    Var,
    conj,
    disj,
    free_vars,
    parse_expr,
    to_fraction,
)

log = logging.getLogger(__name__)

INTERFACES = ("input", "knob", "output")
DTYPES = ("real", "int")

KNOWN_KEYS = {
    "version", "variables", "alpha", "beta", "eta", "assertions", "queries",
    "objectives", "witnesses", "configurations", "system",
}
VAR_KEYS = {"label", "interface", "type", "range", "rad-abs", "rad-rel", "grid"}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class VariableDecl:
    label: str
    interface: str
    dtype: str = "real"
    lo: Fraction | None = None  # None is unbounded
    hi: Fraction | None = None
    rad_abs: Fraction | None = None
    rad_rel: Fraction | None = None
    grid: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if self.interface not in INTERFACES:
            raise SpecError(f"{self.label}: unknown interface {self.interface!r}")
        if self.dtype not in DTYPES:
            raise SpecError(f"{self.label}: unknown type {self.dtype!r}")
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise SpecError(f"{self.label}: empty range [{self.lo}, {self.hi}]")
        if self.rad_abs is not None and self.rad_rel is not None:
            raise SpecError(f"{self.label}: only one of rad-abs/rad-rel may be given")
        for r in (self.rad_abs, self.rad_rel):
            if r is not None and r < 0:
                raise SpecError(f"{self.label}: negative radius")
        if self.interface != "knob":
            if self.rad_abs is not None or self.rad_rel is not None:
                raise SpecError(f"{self.label}: radius on non-knob variable")
            if self.grid is not None:
                raise SpecError(f"{self.label}: grid on non-knob variable")
        if self.dtype == "int":
            for v in (self.lo, self.hi):
                if v is not None and v.denominator != 1:
                    raise SpecError(f"{self.label}: int variable with non-integer range endpoint {v}")
        if self.grid is not None:
            if not self.grid:
                raise SpecError(f"{self.label}: empty grid")
            if list(self.grid) != sorted(set(self.grid)):
                raise SpecError(f"{self.label}: grid must be strictly ascending")
            for g in self.grid:
                if not self.in_range(g):
                    raise SpecError(f"{self.label}: grid value outside range: {g}")
                if self.dtype == "int" and g.denominator != 1:
                    raise SpecError(f"{self.label}: int variable with non-integer grid value {g}")

    def in_range(self, v: Fraction) -> bool:
        return (self.lo is None or v >= self.lo) and (self.hi is None or v <= self.hi)

    @property
    def bounded(self) -> bool:
        return self.lo is not None and self.hi is not None

    def radius(self, center: Fraction) -> Fraction:
        if self.rad_abs is not None:
            return self.rad_abs
        if self.rad_rel is not None:
            return self.rad_rel * abs(center)
        return Fraction(0)


@dataclass(frozen=True)
class ProblemSpec:
    version: str
    variables: tuple[VariableDecl, ...]
    alpha: Expr = TRUE
    beta: Expr = TRUE
    eta: Expr = TRUE
    assertions: Mapping[str, Expr] = field(default_factory=dict)
    queries: Mapping[str, Expr] = field(default_factory=dict)
    objectives: Mapping[str, Expr] = field(default_factory=dict)
    witnesses: Mapping[str, Mapping[str, Fraction]] = field(default_factory=dict)
    configurations: Mapping[str, Mapping[str, Fraction]] = field(default_factory=dict)
    system: Mapping[str, Expr] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for v in self.variables:
            if v.label in seen:
                raise SpecError(f"duplicate variable label {v.label!r}")
            seen.add(v.label)
        self._check_slot("eta", self.eta, self.knobs)
        self._check_slot("alpha", self.alpha, self.inputs + self.knobs)
        every = self.inputs + self.knobs + self.outputs
        self._check_slot("beta", self.beta, every)
        for kind in ("assertions", "queries", "objectives"):
            for name, e in getattr(self, kind).items():
                self._check_slot(f"{kind}[{name}]", e, every)
        for name, e in self.system.items():
            if name not in self.outputs:
                raise SpecError(f"system expression for undeclared output {name!r}")
            self._check_slot(f"system[{name}]", e, self.inputs + self.knobs)
        self._check_values("witnesses", self.witnesses, self.queries, self.knobs + self.inputs)
        self._check_values("configurations", self.configurations, self.assertions, self.knobs)

    def _check_slot(self, slot: str, e: Expr, legal: list[str]) -> None:
        bad = free_vars(e) - set(legal)
        if bad:
            declared = {v.label for v in self.variables}
            kind = "undeclared" if bad - declared else "illegal"
            raise SpecError(f"{slot}: {kind} variable(s) {sorted(bad)}")

    def _check_values(self, kind, table, names, required) -> None:
        for key, values in table.items():
            if key not in names:
                raise SpecError(f"{kind}: {key!r} is not a known name")
            extra = set(values) - set(required)
            if extra:
                raise SpecError(f"{kind}[{key}]: assigns undeclared or illegal variable(s) {sorted(extra)}")
            missing = set(required) - set(values)
            if missing:
                raise SpecError(f"{kind}[{key}]: missing value(s) for {sorted(missing)}")

    def _labels(self, interface: str) -> list[str]:
        return [v.label for v in self.variables if v.interface == interface]

    @property
    def inputs(self) -> list[str]:
        return self._labels("input")

    @property
    def knobs(self) -> list[str]:
        return self._labels("knob")

    @property
    def outputs(self) -> list[str]:
        return self._labels("output")

    def var(self, label: str) -> VariableDecl:
        for v in self.variables:
            if v.label == label:
                return v
        raise KeyError(label)

    def replace(self, **changes) -> ProblemSpec:
        """Copy with fields replaced; used for command-line overrides."""
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ProblemSpec(**fields)


def _opt_number(v, what: str) -> Fraction | None:
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float, str, Fraction)):
        raise SpecError(f"{what}: expected a number, got {v!r}")
    try:
        return to_fraction(v)
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"{what}: {exc}") from None


def _variable(d: Mapping) -> VariableDecl:
    if not isinstance(d, Mapping) or "label" not in d:
        raise SpecError(f"variable entry without label: {d!r}")
    label = d["label"]
    for k in set(d) - VAR_KEYS:
        log.warning("variable %s: ignoring unsupported key %r", label, k)
    lo = hi = None
    if d.get("range") is not None:
        rng = d["range"]
        if not isinstance(rng, list) or len(rng) != 2:
            raise SpecError(f"{label}: range must be a two-element list")
        lo = _opt_number(rng[0], f"{label} range")
        hi = _opt_number(rng[1], f"{label} range")
    grid = None
    if d.get("grid") is not None:
        grid = tuple(_opt_number(g, f"{label} grid") for g in d["grid"])
    return VariableDecl(
        label=label,
        interface=d.get("interface", ""),
        dtype=d.get("type", "real"),
        lo=lo,
        hi=hi,
        rad_abs=_opt_number(d.get("rad-abs"), f"{label} rad-abs"),
        rad_rel=_opt_number(d.get("rad-rel"), f"{label} rad-rel"),
        grid=grid,
    )


def _expr(v, what: str) -> Expr:
    if v is None:
        return TRUE
    if isinstance(v, bool):
        return TRUE if v else parse_expr("False")
    try:
        return parse_expr(str(v))
    except ExprSyntaxError as exc:
        raise SpecError(f"{what}: {exc}") from None


def _named(d, what: str) -> dict[str, Expr]:
    if d is None:
        return {}
    if not isinstance(d, Mapping):
        raise SpecError(f"{what} must be a dictionary")
    return {name: _expr(text, f"{what}[{name}]") for name, text in d.items()}


def _values(d, what: str) -> dict[str, dict[str, Fraction]]:
    if d is None:
        return {}
    return {
        key: {lab: _opt_number(v, f"{what}[{key}][{lab}]") for lab, v in vals.items()}
        for key, vals in d.items()
    }


def spec_from_dict(d: Mapping) -> ProblemSpec:
    if not isinstance(d, Mapping):
        raise SpecError("spec must be a JSON object")
    for k in set(d) - KNOWN_KEYS:
        log.warning("ignoring unsupported spec key %r", k)
    return ProblemSpec(
        version=str(d.get("version", "")),
        variables=tuple(_variable(v) for v in d.get("variables", [])),
        alpha=_expr(d.get("alpha"), "alpha"),
        beta=_expr(d.get("beta"), "beta"),
        eta=_expr(d.get("eta"), "eta"),
        assertions=_named(d.get("assertions"), "assertions"),
        queries=_named(d.get("queries"), "queries"),
        objectives=_named(d.get("objectives"), "objectives"),
        witnesses=_values(d.get("witnesses"), "witnesses"),
        configurations=_values(d.get("configurations"), "configurations"),
        system=_named(d.get("system"), "system"),
    )


def parse_spec(text: str) -> ProblemSpec:
    """Parse and validate a JSON spec document."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed JSON: {exc}") from None
    return spec_from_dict(d)


def load_spec(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


def range_constraint(v: VariableDecl, name: str | None = None) -> Expr:
    x = Var(name or v.label)
    parts = []
    if v.lo is not None:
        parts.append(Compare(">=", x, Num(v.lo)))
    if v.hi is not None:
        parts.append(Compare("<=", x, Num(v.hi)))
    return conj(*parts)


def grid_constraint(v: VariableDecl) -> Expr:
    if v.grid is None:
        return TRUE
    return disj(*(Compare("==", Var(v.label), Num(g)) for g in v.grid))


def derive_domain_constraints(spec: ProblemSpec) -> tuple[Expr, Expr]:
    """Return ``(alpha_full, eta_full)``.

    Input and knob ranges are conjoined to alpha, knob grids to eta.
    Output ranges are recorded on the variable but never enforced.
    """
    alpha = conj(
        spec.alpha,
        *(range_constraint(v) for v in spec.variables if v.interface in ("input", "knob")),
    )
    eta = conj(spec.eta, *(grid_constraint(v) for v in spec.variables if v.interface == "knob"))
    return alpha, eta


def theta_box(spec: ProblemSpec, center: Mapping[str, Fraction]) -> dict[str, tuple[Fraction, Fraction]]:
    """Interval of allowed perturbed values per knob around ``center``."""
    box = {}
    for label in spec.knobs:
        v = spec.var(label)
        c = to_fraction(center[label])
        r = v.radius(c)
        lo, hi = c - r, c + r
        if v.lo is not None:
            lo = max(lo, v.lo)
        if v.hi is not None:
            hi = min(hi, v.hi)
        box[label] = (lo, hi)
    return box


def theta_constraint(spec: ProblemSpec, center: Mapping[str, Fraction]) -> Expr:
    """Stability region around ``center`` as bounds on the perturbed knobs.

    The perturbed knob values are written with the knob labels themselves;
    callers substitute them where a perturbed copy is needed.
    """
    parts = []
    for label, (lo, hi) in theta_box(spec, center).items():
        if lo == hi:
            parts.append(Compare("==", Var(label), Num(lo)))
        else:
            parts.append(conj(Compare(">=", Var(label), Num(lo)), Compare("<=", Var(label), Num(hi))))
    return conj(*parts)
