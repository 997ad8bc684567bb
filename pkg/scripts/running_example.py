"""Stability of the piecewise running example across radii.

The system is y = 0 when p <= 0 and x <= 0, y = x when x > 0 and y = p
otherwise. The script certifies witnesses, verifies configurations and
runs query/synthesis for the requirement y <= 0, printing one table per mode.

    python3 scripts/running_example.py
"""

import argparse
from fractions import Fraction

from stabex.explore import build_instance, certify, query, synthesize, verify
from stabex.model import ExpressionModel
from stabex.speclang import parse_expr, spec_from_dict

MODEL = "0 if (p<=0 and x<=0) else (x if x>0 else p)"


def instance(radius, x_range=(-1, 1), beta=None):
    d = {"version": "1", "variables": [
        {"label": "p", "interface": "knob", "type": "real", "range": [-2, 2], "rad-abs": str(radius)},
        {"label": "x", "interface": "input", "type": "real", "range": list(x_range)},
        {"label": "y", "interface": "output", "type": "real"}],
        "system": {"y": MODEL}}
    if beta:
        d["beta"] = beta
    spec = spec_from_dict(d)
    return build_instance(spec, ExpressionModel(("x",), ("p",), ("y",), dict(spec.system)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radii", default="0,1/10,1/2,1", help="comma separated knob radii")
    args = ap.parse_args()
    radii = [Fraction(r) for r in args.radii.split(",")]
    req = {"q": parse_expr("y <= 0")}

    print("certify y <= 0 at witness (p, x)")
    witnesses = [(-1, Fraction(-1, 2)), (0, Fraction(-1, 2)), (1, Fraction(-1, 2)), (-1, Fraction(1, 2))]
    print("radius  " + "  ".join(f"({p},{x})".ljust(9) for p, x in witnesses))
    for r in radii:
        row = [certify(instance(r), req, {"q": {"p": p, "x": x}}).to_dict()["q"]["witness_status"]
               for p, x in witnesses]
        print(f"{str(r):<8}" + "  ".join(s.ljust(9) for s in row))

    print("\nverify y <= 0 for every x in [-1, 0] at configuration p")
    configs = [-2, -1, Fraction(-1, 2), 0, 1]
    print("radius  " + "  ".join(str(p).ljust(6) for p in configs))
    for r in radii:
        row = [verify(instance(r, (-1, 0)), req, {"q": {"p": p}}).to_dict()["q"]["assertion_status"]
               for p in configs]
        print(f"{str(r):<8}" + "  ".join(s.ljust(6) for s in row))

    print("\nquery and synthesis for y <= 0")
    for r in radii:
        q = query(instance(r), req).to_dict()["q"]
        s_all = synthesize(instance(r, beta="y<=0")).to_dict()
        s_neg = synthesize(instance(r, (-1, 0), beta="y<=0")).to_dict()
        print(f"radius {r}: query {q['query_status']} {q['query_result']}, "
              f"synthesis over x in [-1,1] {s_all['synthesis_status']}, "
              f"over x in [-1,0] {s_neg['synthesis_status']} {s_neg['synthesis_result']}")


if __name__ == "__main__":
    main()
