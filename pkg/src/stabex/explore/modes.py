"""Certification, querying, verification and synthesis with stability."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from ..solver import DeltaSat, Unknown, Unsat
from ..speclang.expr import Expr, conj, neg
from .instance import (
    ExploreError,
    GearInstance,
    find_stable,
    flag,
    infer_values,
    interface_consistent,
    model_consistent,
)

log = logging.getLogger(__name__)

STATUSES = ("PASS", "FAIL", "ERROR", "UNKNOWN")


@dataclass
class ModeReport:
    mode: str
    items: dict[str, dict] = field(default_factory=dict)
    globals: dict[str, str] = field(default_factory=dict)
    flat: bool = False  # item fields live at top level (synthesize, optimize)

    def to_dict(self) -> dict:
        if self.flat:
            out = dict(self.globals)
            for payload in self.items.values():
                out.update(payload)
            return out
        out = dict(self.items)
        out.update(self.globals)
        return out


def number(v: Fraction | None):
    return None if v is None else float(v)


def _point(values: Mapping[str, Fraction]) -> dict[str, float]:
    return {k: float(v) for k, v in values.items()}


def _globals(inst: GearInstance) -> tuple[dict[str, str], bool | None]:
    ic = interface_consistent(inst)
    mc = model_consistent(inst) if ic else False if ic is False else None
    g = {"smlp_execution": "completed", "interface_consistent": flag(ic),
         "model_consistent": flag(mc)}
    ok = None if (ic is None or mc is None) else bool(ic and mc)
    return g, ok


def _sat_flag(r) -> bool | None:
    if isinstance(r, Unknown):
        return None
    return isinstance(r, DeltaSat)


# -- certify ----------------------------------------------------------------------


def certify(inst: GearInstance, queries: Mapping[str, Expr] | None = None,
            witnesses: Mapping[str, Mapping[str, Fraction]] | None = None) -> ModeReport:
    """Check given witnesses for stability against their queries."""
    queries = inst.spec.queries if queries is None else queries
    witnesses = inst.spec.witnesses if witnesses is None else witnesses
    g, ok = _globals(inst)
    rep = ModeReport("certify", globals=g)
    for name, q in queries.items():
        w = witnesses.get(name)
        if w is None:
            w = infer_values(inst, inst.knobs + inst.inputs, "witness")
        bad = set(w) - set(inst.knobs + inst.inputs)
        if bad:
            raise ExploreError(f"witness for {name!r} assigns undeclared variable(s) {sorted(bad)}")
        missing = set(inst.knobs + inst.inputs) - set(w)
        if missing:
            raise ExploreError(f"witness for {name!r} misses value(s) for {sorted(missing)}")
        rep.items[name] = _certify_one(inst, q, w, ok)
    return rep


def _certify_one(inst: GearInstance, q: Expr, w: Mapping[str, Fraction], ok: bool | None) -> dict:
    item = {"witness_consistent": "false", "witness_feasible": "false",
            "witness_stable": "false", "witness_status": "ERROR"}
    if ok is None:
        item["witness_status"] = "UNKNOWN"
        return item
    if not ok:
        return item
    p = {k: w[k] for k in inst.knobs}
    x = {k: w[k] for k in inst.inputs}
    at = inst.box({k: (v, v) for k, v in p.items()}, {k: (v, v) for k, v in x.items()})
    base = conj(inst.alpha, inst.eta)
    consistent = _sat_flag(inst.sat(base, at))
    item["witness_consistent"] = flag(consistent)
    if consistent is None:
        item["witness_status"] = "UNKNOWN"
        return item
    if not consistent:
        return item
    qm = inst.m(q)
    feasible = _sat_flag(inst.sat(conj(base, qm), at))
    item["witness_feasible"] = flag(feasible)
    if feasible is None:
        item["witness_status"] = "UNKNOWN"
        return item
    region = inst.box(inst.theta(p), {k: (v, v) for k, v in x.items()}, knob_integral=False)
    r = inst.sat(conj(inst.alpha, inst.violation(qm)), region)
    if isinstance(r, Unknown):
        item["witness_status"] = "UNKNOWN"
        return item
    stable = isinstance(r, Unsat)
    item["witness_stable"] = flag(stable)
    item["witness_status"] = "PASS" if feasible and stable else "FAIL"
    return item


# -- query --------------------------------------------------------------------------


def query(inst: GearInstance, queries: Mapping[str, Expr] | None = None) -> ModeReport:
    """Search a stable witness (knobs and inputs) for each query."""
    queries = inst.spec.queries if queries is None else queries
    g, ok = _globals(inst)
    rep = ModeReport("query", globals=g)
    for name, q in queries.items():
        item = {"query_feasible": "false", "query_stable": "false",
                "query_status": "ERROR", "query_result": None}
        if ok is None:
            item["query_status"] = "UNKNOWN"
        elif ok:
            out = find_stable(inst, q, per_witness=True)
            item["query_feasible"] = flag(out.feasible)
            item["query_stable"] = flag(out.status == "PASS")
            item["query_status"] = out.status
            if out.status == "PASS":
                pt = {**out.knobs, **out.inputs}
                outs = inst.outputs_at(pt)
                item["query_result"] = {**_point(out.knobs), **_point(outs)}
            if out.reason:
                log.info("query %s: %s", name, out.reason)
        rep.items[name] = item
    return rep


# -- verify -------------------------------------------------------------------------


def verify(inst: GearInstance, assertions: Mapping[str, Expr] | None = None,
           configurations: Mapping[str, Mapping[str, Fraction]] | None = None) -> ModeReport:
    """Verify each assertion at its configuration under stability."""
    assertions = inst.spec.assertions if assertions is None else assertions
    configurations = inst.spec.configurations if configurations is None else configurations
    g, ok = _globals(inst)
    rep = ModeReport("verify", globals=g)
    for name, a in assertions.items():
        c = configurations.get(name)
        if c is None:
            c = infer_values(inst, inst.knobs, "configuration")
        bad = set(c) - set(inst.knobs)
        if bad:
            raise ExploreError(
                f"configuration for {name!r} assigns non-knob variable(s) {sorted(bad)}")
        missing = set(inst.knobs) - set(c)
        if missing:
            raise ExploreError(f"configuration for {name!r} misses value(s) for {sorted(missing)}")
        rep.items[name] = _verify_one(inst, a, c, ok)
    return rep


def _verify_one(inst: GearInstance, a: Expr, c: Mapping[str, Fraction], ok: bool | None) -> dict:
    item = {"configuration_consistent": "false", "assertion_status": "ERROR",
            "counter_example": None, "assertion_feasible": "false"}
    if ok is None:
        item["assertion_status"] = "UNKNOWN"
        return item
    if not ok:
        return item
    at = inst.box({k: (v, v) for k, v in c.items()})
    base = conj(inst.alpha, inst.eta)
    consistent = _sat_flag(inst.sat(base, at))
    item["configuration_consistent"] = flag(consistent)
    if not consistent:
        if consistent is None:
            item["assertion_status"] = "UNKNOWN"
        return item
    am = inst.m(a)
    feasible = _sat_flag(inst.sat(conj(base, am), at))
    item["assertion_feasible"] = flag(feasible)
    if feasible is None:
        item["assertion_status"] = "UNKNOWN"
        return item
    region = inst.box(inst.theta(c), knob_integral=False)
    r = inst.sat(conj(inst.alpha, inst.violation(am)), region)
    if isinstance(r, Unknown):
        item["assertion_status"] = "UNKNOWN"
        return item
    if isinstance(r, Unsat):
        item["assertion_status"] = "PASS" if feasible else "FAIL"
        return item
    pt = {k: r.witness[k] for k in inst.knobs + inst.inputs}
    item["assertion_status"] = "FAIL"
    item["counter_example"] = {**_point(pt), **_point(inst.outputs_at(pt))}
    return item


# -- synthesize -----------------------------------------------------------------------


def synthesis_condition(inst: GearInstance, assertions: Mapping[str, Expr] | None) -> Expr:
    parts = [inst.spec.beta]
    if assertions:
        parts.extend(assertions.values())
    return conj(*parts)


def synthesize(inst: GearInstance, assertions: Mapping[str, Expr] | None = None) -> ModeReport:
    """Find a knob configuration keeping beta and the assertions stable."""
    assertions = inst.spec.assertions if assertions is None else assertions
    g, ok = _globals(inst)
    rep = ModeReport("synthesize", globals=g, flat=True)
    item = {"configuration_feasible": "false", "configuration_stable": "false",
            "synthesis_status": "ERROR", "synthesis_result": None}
    if ok is None:
        item["synthesis_status"] = "UNKNOWN"
    elif ok:
        out = find_stable(inst, synthesis_condition(inst, assertions), per_witness=False)
        item["configuration_feasible"] = flag(out.feasible)
        item["configuration_stable"] = flag(out.status == "PASS")
        item["synthesis_status"] = out.status
        if out.status == "PASS":
            item["synthesis_result"] = _point(out.knobs)
        if out.reason:
            log.info("synthesis: %s", out.reason)
    rep.items["synthesis"] = item
    return rep
