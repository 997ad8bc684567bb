from fractions import Fraction

import pytest

from oracles import TOY_BASIC_SPEC
from stabex.speclang import (
    BinOp,
    Compare,
    EvalError,
    ExprSyntaxError,
    Num,
    SpecError,
    Var,
    derive_domain_constraints,
    eval_expr,
    free_vars,
    parse_expr,
    parse_spec,
    spec_from_dict,
    theta_box,
    theta_constraint,
    to_text,
)


def test_toy_spec_shape(toy_spec):
    assert len(toy_spec.variables) == 6
    assert toy_spec.knobs == ["p1", "p2"]
    p1 = toy_spec.var("p1")
    assert p1.grid == (2, 4, 7) and p1.rad_rel == Fraction(1, 10)
    assert toy_spec.var("p2").rad_abs == Fraction(1, 5)
    assert list(toy_spec.assertions) == ["assert1", "assert2", "assert3"]
    assert list(toy_spec.objectives) == ["objective1", "objective2"]


def test_defaults_are_true():
    s = spec_from_dict({"version": "1", "variables": [{"label": "y", "interface": "output", "type": "real"}]})
    assert eval_expr(s.alpha, {}) is True
    assert eval_expr(s.beta, {}) is True
    assert eval_expr(s.eta, {}) is True


def test_grid_outside_range_rejected():
    text = TOY_BASIC_SPEC.replace('"grid":[2,4,7]', '"grid":[2,4,12]')
    with pytest.raises(SpecError, match="grid value outside range"):
        parse_spec(text)


@pytest.mark.parametrize("bad, msg", [
    ('{"version":"1","variables":[{"label":"a","interface":"bogus","type":"real"}]}', "interface"),
    ('{"version":"1","variables":[{"label":"a","interface":"input","type":"real","rad-abs":1}]}', "radius"),
    ('{"version":"1","variables":[{"label":"a","interface":"input","type":"real"}],"beta":"b>0"}', "undeclared"),
    ('{"version":"1","variables":[{"label":"a","interface":"input","type":"real"}],"eta":"a>0"}', "illegal"),
    ('{"version":"1","variables":[{"label":"a","interface":"input"},{"label":"a","interface":"input"}]}',
     "duplicate"),
    ("{not json", "malformed"),
])
def test_spec_errors(bad, msg):
    with pytest.raises(SpecError, match=msg):
        parse_spec(bad)


def test_unknown_keys_warn(caplog):
    s = spec_from_dict({"version": "1", "variables": [], "plots": True})
    assert s.version == "1"
    assert "plots" in caplog.text


def test_null_range_is_unbounded():
    s = spec_from_dict({"version": "1", "variables": [
        {"label": "x", "interface": "input", "type": "real", "range": [None, 3]}]})
    v = s.var("x")
    assert v.lo is None and v.hi == 3 and not v.bounded


def test_parse_fig3_assertion():
    e = parse_expr("(y2**3+p2)/2>6")
    assert e == Compare(">", BinOp("/", BinOp("+", BinOp("**", Var("y2"), Num(Fraction(3))), Var("p2")),
                                    Num(Fraction(2))), Num(Fraction(6)))


def test_parse_keywords_and_atom():
    e = parse_expr("p1==4 or (p1==8 and p2 > 3)")
    assert isinstance(e, BinOp) and e.op == "|"
    assert isinstance(e.right, BinOp) and e.right.op == "&"
    assert parse_expr("x") == Var("x")


def test_precedence():
    assert eval_expr(parse_expr("2**3**2"), {}) == 512
    assert eval_expr(parse_expr("-2**2"), {}) == -4
    assert eval_expr(parse_expr("1 + 2 * 3"), {}) == 7
    assert eval_expr(parse_expr("1 if 2 > 3 else 5 + 1"), {}) == 6


def test_decimal_literals_exact():
    assert parse_expr("0.1") == Num(Fraction(1, 10))


@pytest.mark.parametrize("text", ["1 +", "a < b < c", "f(x)", "x $ 2", "(a"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse_expr(text)


def test_eval_examples():
    e = parse_expr("(y2**3+p2)/2>6")
    assert eval_expr(e, {"y2": Fraction(2), "p2": Fraction(4)}) is False
    beta = parse_expr("y1>=4 and y2>=8")
    assert eval_expr(beta, {"y1": Fraction("5.0233"), "y2": Fraction(8)}) is True
    with pytest.raises(EvalError):
        eval_expr(parse_expr("1/ (x1 - x1)"), {"x1": Fraction(3)})
    with pytest.raises(EvalError):
        eval_expr(parse_expr("2 ** x"), {"x": Fraction(1, 2)})
    with pytest.raises(EvalError):
        eval_expr(parse_expr("(x > 1) + 1"), {"x": Fraction(2)})


def test_round_trip_text():
    e = parse_expr("p1==4 or (p1==8 and p2 > 3)")
    assert parse_expr(to_text(e)) == e


def test_domain_constraints_fig3(toy_spec):
    alpha, eta = derive_domain_constraints(toy_spec)
    ok = {"p1": Fraction(4), "p2": Fraction(4)}
    assert eval_expr(eta, ok)
    # p1 == 8 satisfies the user eta but not the grid
    assert not eval_expr(eta, {"p1": Fraction(8), "p2": Fraction(4)})
    assert not eval_expr(eta, {"p1": Fraction(2), "p2": Fraction(4)})
    pt = {"x1": Fraction(10), "x2": Fraction(0), "p1": Fraction(4), "p2": Fraction(4)}
    assert eval_expr(alpha, pt)
    assert not eval_expr(alpha, {**pt, "x1": Fraction(11)})
    # outputs are not constrained
    assert free_vars(alpha) <= {"x1", "x2", "p1", "p2"}


def test_no_grids_eta_true():
    s = spec_from_dict({"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [0, 1]}]})
    assert eval_expr(derive_domain_constraints(s)[1], {"p": Fraction(1, 2)}) is True


def test_theta_examples(toy_spec):
    box = theta_box(toy_spec, {"p1": Fraction(7), "p2": Fraction(6)})
    assert box["p2"] == (Fraction(29, 5), Fraction(31, 5))
    assert box["p1"] == (Fraction(63, 10), Fraction(77, 10))
    s = spec_from_dict({"version": "1", "variables": [
        {"label": "k", "interface": "knob", "type": "real", "range": [0, 5]}]})
    assert theta_box(s, {"k": Fraction(2)}) == {"k": (Fraction(2), Fraction(2))}
    c = theta_constraint(toy_spec, {"p1": Fraction(7), "p2": Fraction(6)})
    assert eval_expr(c, {"p1": Fraction(77, 10), "p2": Fraction(6)})
    assert not eval_expr(c, {"p1": Fraction(78, 10), "p2": Fraction(6)})


def test_theta_clipped_to_range(toy_spec):
    box = theta_box(toy_spec, {"p1": Fraction(10), "p2": Fraction(7)})
    assert box["p1"] == (Fraction(9), Fraction(10))
    assert box["p2"] == (Fraction(34, 5), Fraction(7))


def test_witness_table_validation():
    base = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [0, 1]},
        {"label": "x", "interface": "input", "type": "real", "range": [0, 1]}],
        "queries": {"q": "x > 0"}}
    with pytest.raises(SpecError, match="missing"):
        spec_from_dict({**base, "witnesses": {"q": {"p": 0.5}}})
    with pytest.raises(SpecError, match="not a known name"):
        spec_from_dict({**base, "witnesses": {"other": {"p": 0.5, "x": 0.5}}})
