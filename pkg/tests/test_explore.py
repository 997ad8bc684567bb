import json
from fractions import Fraction

import pytest

from conftest import running_instance, system_instance
from oracles import (
    CERTIFY_ITEM_KEYS,
    GLOBAL_KEYS,
    QUERY_ITEM_KEYS,
    SYNTH_KEYS,
    TOY_BASIC_SPEC,
    VERIFY_ITEM_KEYS,
    running_f,
)
from stabex.explore import (
    ExploreError,
    build_instance,
    certify,
    interface_consistent,
    model_consistent,
    query,
    synthesize,
    verify,
)
from stabex.model import ExpressionModel
from stabex.speclang import eval_expr, parse_expr, spec_from_dict

F = Fraction
Q = {"q": parse_expr("y <= 0")}


def toy_model(spec):
    return ExpressionModel(tuple(spec.inputs), tuple(spec.knobs), ("y1", "y2"),
                           {"y1": parse_expr("x1 + p1"), "y2": parse_expr("p2 * x2 + 8")})


def test_interface_consistency_fig3():
    spec = spec_from_dict(json.loads(TOY_BASIC_SPEC))
    inst = build_instance(spec, toy_model(spec))
    assert interface_consistent(inst) is True
    assert model_consistent(inst) is True


def test_interface_inconsistent_reports_error():
    d = json.loads(TOY_BASIC_SPEC)
    d["variables"][4]["grid"] = [2, 7]
    d["eta"] = "p1==4"
    d["queries"] = {"q": "y1 > 0"}
    spec = spec_from_dict(d)
    inst = build_instance(spec, toy_model(spec))
    assert interface_consistent(inst) is False
    rep = certify(inst, witnesses={"q": {"x1": 10, "x2": 0, "p1": 4, "p2": 4}}).to_dict()
    assert rep["interface_consistent"] == "false" and rep["model_consistent"] == "false"
    assert rep["q"]["witness_status"] == "ERROR"


def test_empty_constraints_consistent():
    inst = running_instance(0)
    assert interface_consistent(inst) and model_consistent(inst)


def test_certify_four_way(witness_toy):
    rep = certify(witness_toy).to_dict()
    assert list(rep) == list(witness_toy.spec.queries) + GLOBAL_KEYS
    for name in witness_toy.spec.queries:
        assert list(rep[name]) == CERTIFY_ITEM_KEYS
    got = {k: rep[k]["witness_status"] for k in witness_toy.spec.queries}
    assert got == {"query_stable_witness": "PASS", "query_grid_conflict": "ERROR",
                   "query_unstable_witness": "FAIL", "query_infeasible_witness": "FAIL"}
    assert rep["query_grid_conflict"]["witness_consistent"] == "false"
    assert rep["query_unstable_witness"]["witness_feasible"] == "true"
    assert rep["query_unstable_witness"]["witness_stable"] == "false"
    assert rep["query_infeasible_witness"]["witness_feasible"] == "false"


def test_verify_four_way(witness_toy):
    rep = verify(witness_toy).to_dict()
    for name in witness_toy.spec.assertions:
        assert list(rep[name]) == VERIFY_ITEM_KEYS
    got = {k: rep[k]["assertion_status"] for k in witness_toy.spec.assertions}
    assert got == {"assert_stable_config": "PASS", "assert_grid_conflict": "ERROR",
                   "assert_unstable_config": "FAIL", "assert_infeasible": "FAIL"}
    ce = rep["assert_unstable_config"]["counter_example"]
    assert set(ce) == {"p1", "p2", "x", "y1", "y2"}
    assert ce["y1"] < -10 + 1e-6
    assert rep["assert_infeasible"]["assertion_feasible"] == "false"
    assert rep["assert_stable_config"]["counter_example"] is None


@pytest.mark.parametrize("r, p, x, status", [
    (F(1, 2), -1, F(-1, 2), "PASS"),
    (F(1, 10), 0, F(-1, 2), "FAIL"),
    (F(1, 2), 0, F(-1, 2), "FAIL"),
    (0, 0, F(-1, 2), "PASS"),
    (F(1, 10), 1, F(-1, 2), "FAIL"),
    (F(1, 10), -1, F(1, 2), "FAIL"),
    (F(1, 10), 1, F(1, 2), "FAIL"),
])
def test_certify_running_example(r, p, x, status):
    rep = certify(running_instance(r), Q, {"q": {"p": p, "x": x}}).to_dict()
    assert rep["q"]["witness_status"] == status


def test_certify_unstable_flags():
    item = certify(running_instance(F(1, 10)), Q, {"q": {"p": 0, "x": F(-1, 2)}}).to_dict()["q"]
    assert item == {"witness_consistent": "true", "witness_feasible": "true",
                    "witness_stable": "false", "witness_status": "FAIL"}


def test_certify_witness_inference():
    inst = running_instance(0, pr=(-1, -1), xr=(F(-1, 2), F(-1, 2)))
    assert certify(inst, Q, {}).to_dict()["q"]["witness_status"] == "PASS"
    with pytest.raises(ExploreError, match="inferred"):
        certify(running_instance(0), Q, {})
    with pytest.raises(ExploreError, match="undeclared"):
        certify(running_instance(0), Q, {"q": {"p": 0, "x": 0, "z": 1}})


@pytest.mark.parametrize("r", [F(1, 10), F(1, 2), F(1)])
def test_verify_stable_at_minus_one(r):
    rep = verify(running_instance(r, xr=(-1, 0)), Q, {"q": {"p": -1}}).to_dict()
    assert rep["q"]["assertion_status"] == "PASS"


def test_verify_fails_at_zero():
    item = verify(running_instance(F(1, 10), xr=(-1, 0)), Q, {"q": {"p": 0}}).to_dict()["q"]
    assert item["assertion_status"] == "FAIL"
    ce = item["counter_example"]
    assert ce["p"] > 0 and abs(ce["p"]) <= 0.1
    # the counterexample really violates the assertion on the model
    assert running_f(F(ce["p"]), F(ce["x"])) > 0


def test_verify_configuration_inference():
    with pytest.raises(ExploreError, match="inferred"):
        verify(running_instance(0), Q, {})


def test_query_running_example():
    rep = query(running_instance(F(3, 10)), Q).to_dict()
    item = rep["q"]
    assert list(item) == QUERY_ITEM_KEYS
    assert item["query_status"] == "PASS"
    assert item["query_result"]["p"] <= -0.3
    assert set(item["query_result"]) == {"p", "y"}


def test_query_infeasible():
    # f >= -2 everywhere, so y <= -3 has no solution
    item = query(running_instance(F(1, 10)), {"q": parse_expr("y <= -3")}).to_dict()["q"]
    assert item == {"query_feasible": "false", "query_stable": "false",
                    "query_status": "FAIL", "query_result": None}


def test_query_feasible_but_unstable():
    # y == 0 only holds at p <= 0, x <= 0 or x == 0; with a huge radius no p is safe
    item = query(running_instance(F(5)), {"q": parse_expr("y >= 1/2 and x <= 0")}).to_dict()["q"]
    assert item["query_feasible"] == "true"
    assert item["query_status"] == "FAIL"


def test_synthesize_running_example():
    rep = synthesize(running_instance(F(1, 5), beta="y<=0")).to_dict()
    assert list(rep) == SYNTH_KEYS
    assert rep["synthesis_status"] == "FAIL"
    rep = synthesize(running_instance(F(1, 5), xr=(-1, 0), beta="y<=0")).to_dict()
    assert rep["synthesis_status"] == "PASS"
    assert rep["synthesis_result"]["p"] <= -0.2


def test_synthesize_with_assertions(witness_toy):
    rep = synthesize(witness_toy, {"a": parse_expr("y2 <= 90")}).to_dict()
    assert rep["synthesis_status"] == "PASS"
    p = rep["synthesis_result"]
    assert p["p1"] in (2.0, 4.0, 7.0)


def test_iteration_budget_unknown():
    # every region dips to y = 0 at p = 0 while its corners look fine, so the
    # first candidate survives the corner conditions and a second round is needed
    d = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [-1, 1], "rad-abs": 1},
        {"label": "y", "interface": "output", "type": "real"}], "system": {"y": "p*p"}}
    inst = system_instance(d)
    inst.max_iterations = 1
    item = query(inst, {"q": parse_expr("y >= 1/4")}).to_dict()["q"]
    assert item["query_status"] == "UNKNOWN" and item["query_result"] is None


def test_unbounded_rejected():
    d = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [None, 1]},
        {"label": "y", "interface": "output", "type": "real"}], "system": {"y": "p"}}
    with pytest.raises(ExploreError, match="unbounded"):
        system_instance(d)


def test_model_interface_mismatch():
    spec = spec_from_dict(json.loads(TOY_BASIC_SPEC))
    bad = ExpressionModel(("x1",), (), ("y1",), {"y1": parse_expr("x1")})
    with pytest.raises(ExploreError, match="output"):
        build_instance(spec, bad)


def test_certify_pass_implies_query_at_witness(witness_toy):
    rep = certify(witness_toy).to_dict()
    w = witness_toy.spec.witnesses["query_stable_witness"]
    pt = dict(w)
    pt.update(witness_toy.outputs_at(w))
    assert rep["query_stable_witness"]["witness_status"] == "PASS"
    assert eval_expr(witness_toy.spec.queries["query_stable_witness"], pt)
