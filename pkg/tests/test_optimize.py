from fractions import Fraction

import pytest

from conftest import running_instance, system_instance
from oracles import optimize_keys
from stabex.explore import ExploreError, optimize, optsyn
from stabex.explore.optimize import Scaling
from stabex.speclang import parse_expr

F = Fraction
DELTA = F(1, 10000)
EPS = F(1, 20)


def two_knob_instance(**extra):
    d = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [0, 1], "rad-abs": 0},
        {"label": "y1", "interface": "output", "type": "real"},
        {"label": "y2", "interface": "output", "type": "real"}],
        "system": {"y1": "p", "y2": "1 - p"},
        "objectives": {"o1": "y1", "o2": "y2"}}
    d.update(extra)
    return system_instance(d)


BOUNDS01 = {"o1": (F(0), F(1)), "o2": (F(0), F(1))}


def test_scaling_round_trip():
    s = Scaling(F(-2), F(6))
    assert s.scale(F(-2)) == 0 and s.scale(F(6)) == 1
    assert s.unscale(s.scale(F(7, 3))) == F(7, 3)
    flat = Scaling(F(3), F(3))
    assert flat.span == 1 and flat.scale(F(3)) == 0


def test_running_example_optimum():
    # max over p of min over x of y is 0 (scaled 1/2 with data range [-2, 2])
    rep, res = optimize(running_instance(0), {"o": parse_expr("y")}, {"o": (F(-2), F(2))}, delta=DELTA)
    st = res.states["o"]
    assert res.status == "PASS"
    assert st.lo_scaled <= F(1, 2) <= st.up_scaled + 2 * DELTA
    assert st.gap <= EPS
    assert st.lo == -2 + 4 * st.lo_scaled
    item = rep.to_dict()
    assert item["synthesis_feasible"] == "true"
    assert item["o"]["min_in_data"] == -2.0 and item["o"]["max_in_data"] == 2.0


def test_constant_model_degenerate_range():
    d = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [0, 1], "rad-abs": 0.1},
        {"label": "y", "interface": "output", "type": "real"}], "system": {"y": "3"}}
    _, res = optimize(system_instance(d), {"o": parse_expr("y")}, {"o": (F(3), F(3))}, delta=DELTA)
    st = res.states["o"]
    assert res.status == "PASS"
    # scaled value is exactly 0 everywhere
    assert st.lo_scaled <= 0 <= st.up_scaled + 2 * DELTA and st.gap <= EPS
    assert abs(st.lo - 3) <= EPS


def test_progress_is_monotone():
    rows = []
    optimize(running_instance(F(1, 10)), {"o": parse_expr("y")}, {"o": (F(-2), F(2))},
             delta=DELTA, sink=rows.append)
    assert rows
    assert [r["iteration"] for r in rows] == list(range(1, len(rows) + 1))
    for a, b in zip(rows, rows[1:]):
        assert b["threshold_lo_scaled"] >= a["threshold_lo_scaled"]
        assert b["threshold_up_scaled"] <= a["threshold_up_scaled"]
    assert list(rows[-1])[:6] == ["iteration", "objective", "threshold_lo_scaled",
                                  "threshold_up_scaled", "threshold_lo", "threshold_up"]


def test_report_keys():
    inst = two_knob_instance()
    rep, _ = optimize(inst, bounds=BOUNDS01, delta=DELTA)
    assert set(rep.to_dict()) == optimize_keys(["o1", "o2"], ["y1", "y2"], ["p"])


def test_pareto_holds_earlier_objectives():
    _, res = optimize(two_knob_instance(), bounds=BOUNDS01, delta=DELTA)
    s1, s2 = res.states["o1"], res.states["o2"]
    assert s1.lo_scaled >= 1 - EPS - 2 * DELTA
    # o2 = 1 - o1 cannot rise while o1 is held near 1
    assert s2.lo_scaled <= EPS + 2 * DELTA
    assert res.knobs["p"] >= s1.lo_scaled


def test_independent_objectives():
    _, res = optimize(two_knob_instance(), bounds=BOUNDS01, delta=DELTA, pareto=False)
    assert res.states["o1"].lo_scaled >= 1 - EPS - 2 * DELTA
    assert res.states["o2"].lo_scaled >= 1 - EPS - 2 * DELTA


def test_optsyn_true_assertion_matches_optimize():
    inst = two_knob_instance()
    a, _ = optimize(inst, bounds=BOUNDS01, delta=DELTA)
    b, _ = optsyn(inst, {"a": parse_expr("y1 >= 0")}, bounds=BOUNDS01, delta=DELTA)
    assert a.to_dict() == b.to_dict()


def test_optsyn_assertion_caps_objective():
    _, res = optsyn(two_knob_instance(), {"a": parse_expr("y1 <= 1/2")}, bounds=BOUNDS01, delta=DELTA)
    st = res.states["o1"]
    assert st.lo_scaled <= F(1, 2) and st.up_scaled >= F(1, 2) - 2 * DELTA
    assert res.knobs["p"] <= F(1, 2)


def test_optsyn_incompatible():
    rep, res = optsyn(two_knob_instance(), {"a": parse_expr("y1 > 2")}, bounds=BOUNDS01, delta=DELTA)
    assert res.status == "FAIL"
    item = rep.to_dict()
    assert item["synthesis_feasible"] == "false"
    assert item["o1"]["value_in_config"] is None


def test_threshold_tie_terminates():
    # the optimum sits exactly on a bisection midpoint (scaled 1/4)
    d = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [0, 1], "rad-abs": 0.5},
        {"label": "x", "interface": "input", "type": "real", "range": [-1, 1]},
        {"label": "y", "interface": "output", "type": "real"}], "system": {"y": "-2*p - x - 1"}}
    _, res = optimize(system_instance(d), {"o": parse_expr("y")}, {"o": (F(-5), F(3))}, delta=F(1, 1000))
    st = res.states["o"]
    assert res.status == "PASS"
    assert st.lo_scaled <= F(1, 4) <= st.up_scaled


def test_tie_at_domain_edge_terminates():
    # only p = 1 reaches the optimum (scaled 5/8), which is also the first midpoint
    d = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [0, 1], "rad-abs": 0.5},
        {"label": "x", "interface": "input", "type": "real", "range": [-1, 1]},
        {"label": "y", "interface": "output", "type": "real"}], "system": {"y": "p + 1"}}
    _, res = optimize(system_instance(d), {"o": parse_expr("y")}, {"o": (F(-1), F(3))}, delta=F(1, 1000))
    st = res.states["o"]
    assert res.status == "PASS"
    assert st.lo_scaled <= F(5, 8) <= st.up_scaled + F(2, 1000)


def test_errors():
    inst = two_knob_instance()
    with pytest.raises(ExploreError, match="bounds"):
        optimize(inst)
    with pytest.raises(ExploreError, match="o2"):
        optimize(inst, bounds={"o1": (F(0), F(1))})
    with pytest.raises(ExploreError, match="twice the delta"):
        optimize(inst, bounds=BOUNDS01, delta=F(1, 40))
    with pytest.raises(ExploreError, match="no objectives"):
        optimize(inst, {}, bounds=BOUNDS01)
    d = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [-1, 1], "rad-abs": 0},
        {"label": "y", "interface": "output", "type": "real"}], "system": {"y": "1/p"}}
    with pytest.raises(ExploreError, match="unbounded"):
        optimize(system_instance(d), {"o": parse_expr("y")}, {"o": (F(0), F(1))})
