"""Sweep of the optimizer against a brute-force max-min oracle.

Each instance has one or two knobs on [0, 1] with a peaked objective
(quadratic or absolute-value) plus a linear input term. The oracle takes
the best grid knob value of the windowed minimum at pitch 1/1000, which
is exact for these families because centres and radii lie on that grid.

    python3 scripts/epsilon_accuracy.py --instances 20 --seed 2024
"""

import argparse
import random
import time
from fractions import Fraction

import numpy as np

from stabex.explore import build_instance, optimize
from stabex.model import ExpressionModel
from stabex.solver import SolverConfig
from stabex.speclang import parse_expr, spec_from_dict

PITCH = 1000


def window_min(values, half, axis):
    if half == 0:
        return values
    out = np.empty_like(values)
    v, o = np.moveaxis(values, axis, 0), np.moveaxis(out, axis, 0)
    for i in range(values.shape[axis]):
        o[i] = v[max(0, i - half): i + half + 1].min(axis=0)
    return out


def random_instance(rng):
    nk = rng.choice([1, 2])
    family = rng.choice(["quad", "abs"])
    b = Fraction(rng.randint(0, 5), 10)
    knobs, terms, fns, cells = [], [], [], []
    for i in range(nk):
        a = Fraction(rng.randint(5, 20), 10)
        c = Fraction(rng.randint(0, PITCH), PITCH)
        r = Fraction(rng.randint(0, 200), PITCH)
        name = f"p{i}"
        knobs.append({"label": name, "interface": "knob", "type": "real", "range": [0, 1], "rad-abs": float(r)})
        if family == "quad":
            terms.append(f"{a}*({name} - {c})**2")
            fns.append(lambda v, a=float(a), c=float(c): a * (v - c) ** 2)
        else:
            terms.append(f"{a}*({name} - {c} if {name} >= {c} else {c} - {name})")
            fns.append(lambda v, a=float(a), c=float(c): a * np.abs(v - c))
        cells.append(int(r * PITCH))
    expr = f"(1 - {' - '.join(terms)}) / {nk} + {b}*x"
    d = {"version": "1", "variables": knobs + [
        {"label": "x", "interface": "input", "type": "real", "range": [-1, 1]},
        {"label": "y", "interface": "output", "type": "real"}], "system": {"y": expr}}

    axes = np.meshgrid(*[np.linspace(0, 1, PITCH + 1)] * nk, indexing="ij")
    vals = (1 - sum(f(v) for f, v in zip(fns, axes))) / nk
    for ax, half in enumerate(cells):
        vals = window_min(vals, half, ax)
    return d, float(vals.max()) - float(b), family


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--epsilon", type=Fraction, default=Fraction(1, 100))
    ap.add_argument("--delta", type=Fraction, default=Fraction(1, 10**4))
    args = ap.parse_args()
    rng = random.Random(args.seed)
    slack = float(args.epsilon + 2 * args.delta)
    print("idx family knobs status      lower     oracle       gap  steps   secs")
    worst = 0.0
    for i in range(args.instances):
        d, opt, family = random_instance(rng)
        spec = spec_from_dict(d)
        model = ExpressionModel(("x",), tuple(spec.knobs), ("y",), dict(spec.system))
        inst = build_instance(spec, model, SolverConfig(delta=args.delta, epsilon=args.epsilon))
        t = time.time()
        _, res = optimize(inst, {"o": parse_expr("y")}, {"o": (Fraction(0), Fraction(1))}, delta=args.delta)
        lo = float(res.states["o"].lo_scaled)
        gap = opt - lo
        worst = max(worst, gap)
        ok = res.status == "PASS" and -1e-9 <= gap < slack
        print(f"{i:>3} {family:>6} {len(spec.knobs):>5} {res.status:<7} {lo:>9.5f} {opt:>10.5f} "
              f"{gap:>9.5f} {res.steps:>6} {time.time() - t:>6.2f}{'' if ok else '  <-- outside contract'}")
    print(f"largest gap {worst:.5f} (contract: below {slack})")


if __name__ == "__main__":
    main()
