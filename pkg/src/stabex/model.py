"""Models ``M(p, x) = y``: evaluation, constraint encoding, fitting and I/O.

Three kinds are supported: per-output expression systems, polynomials
and regression trees. All coefficients, thresholds and leaf values are
exact rationals, so a model's encoding agrees with its evaluation.
"""

from __future__ import annotations

import bz2
import csv
import gzip
import io
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .speclang.expr import (
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
    parse_expr,
    to_fraction,
    to_text,
)


class ModelError(ValueError):
    pass


# -- data -------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    columns: tuple[str, ...]
    rows: tuple[tuple[Fraction, ...], ...]
    features: tuple[str, ...] = ()
    responses: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ModelError("duplicate column labels")
        for i, r in enumerate(self.rows):
            if len(r) != len(self.columns):
                raise ModelError(f"row {i} has {len(r)} values, expected {len(self.columns)}")
        for c in self.features + self.responses:
            if c not in self.columns:
                raise ModelError(f"unknown column {c!r}")

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, label: str) -> list[Fraction]:
        j = self.columns.index(label)
        return [r[j] for r in self.rows]

    def records(self) -> list[dict[str, Fraction]]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def select(self, features: Sequence[str], responses: Sequence[str]) -> Dataset:
        return Dataset(self.columns, self.rows, tuple(features), tuple(responses))

    @classmethod
    def from_records(cls, columns, records, features=(), responses=()) -> Dataset:
        rows = tuple(tuple(to_fraction(rec[c]) for c in columns) for rec in records)
        return cls(tuple(columns), rows, tuple(features), tuple(responses))

    def concat(self, other: Dataset) -> Dataset:
        if set(other.columns) != set(self.columns):
            raise ModelError("datasets have different columns")
        idx = [other.columns.index(c) for c in self.columns]
        extra = tuple(tuple(r[j] for j in idx) for r in other.rows)
        return Dataset(self.columns, self.rows + extra, self.features, self.responses)


def _open_text(path: Path, mode: str = "rt"):
    name = path.name
    if name.endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8", newline="")
    if name.endswith(".bz2"):
        return bz2.open(path, mode, encoding="utf-8", newline="")
    return open(path, mode.replace("t", ""), encoding="utf-8", newline="")


def resolve_data_path(path) -> Path:
    """Data paths may omit the ``.csv`` suffix."""
    p = Path(path)
    if p.exists():
        return p
    for suffix in (".csv", ".csv.gz", ".csv.bz2"):
        q = p.with_name(p.name + suffix)
        if q.exists():
            return q
    raise FileNotFoundError(f"data file not found: {path}")


def load_csv(path, features=(), responses=()) -> Dataset:
    p = resolve_data_path(path)
    with _open_text(p) as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header and header[0] == "":
            # pandas-style index column
            header = header[1:]
            skip = 1
        else:
            skip = 0
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            vals = row[skip:]
            try:
                rows.append(tuple(Fraction(v.strip()) for v in vals))
            except ValueError:
                raise ModelError(f"{p}:{lineno}: non-numeric or missing value") from None
    return Dataset(tuple(header), tuple(rows), tuple(features), tuple(responses))


def format_number(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return repr(float(v))


def write_csv(path, columns: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_number(v) if isinstance(v, Fraction) else v for v in r])


def save_csv(d: Dataset, path) -> None:
    write_csv(path, d.columns, d.rows)


# -- models -----------------------------------------------------------------------


@dataclass(frozen=True)
class ModelDef:
    inputs: tuple[str, ...]
    knobs: tuple[str, ...]
    outputs: tuple[str, ...]

    kind = ""

    @property
    def features(self) -> tuple[str, ...]:
        return self.inputs + self.knobs

    def terms(self) -> dict[str, Expr]:
        """Output label -> term over inputs and knobs."""
        raise NotImplementedError

    def evaluate(self, a: Mapping[str, Fraction]) -> dict[str, Fraction]:
        missing = [f for f in self.features if f not in a]
        if missing:
            raise ModelError(f"missing feature value(s) {missing}")
        point = {f: to_fraction(a[f]) for f in self.features}
        return {y: eval_expr(t, point) for y, t in self.terms().items()}

    def domain_constraint(self) -> Expr:
        """Condition under which the model is defined (always true here)."""
        return TRUE

    def _check(self):
        feats = set(self.features)
        for y, t in self.terms().items():
            if y not in self.outputs:
                raise ModelError(f"undeclared output {y!r}")
            bad = free_vars(t) - feats
            if bad:
                raise ModelError(f"output {y!r} references unknown feature(s) {sorted(bad)}")
        missing = set(self.outputs) - set(self.terms())
        if missing:
            raise ModelError(f"no definition for output(s) {sorted(missing)}")


@dataclass(frozen=True)
class ExpressionModel(ModelDef):
    expressions: Mapping[str, Expr] = field(default_factory=dict)

    kind = "expression"

    def __post_init__(self):
        self._check()

    def terms(self):
        return dict(self.expressions)


Monomial = tuple[int, ...]


@dataclass(frozen=True)
class PolynomialModel(ModelDef):
    variables: tuple[str, ...] = ()
    coefficients: Mapping[str, tuple[tuple[Monomial, Fraction], ...]] = field(default_factory=dict)

    kind = "polynomial"

    def __post_init__(self):
        for y, terms in self.coefficients.items():
            for exps, _ in terms:
                if len(exps) != len(self.variables) or any(e < 0 for e in exps):
                    raise ModelError(f"bad monomial {exps} for output {y!r}")
        self._check()

    def terms(self):
        out = {}
        for y, terms in self.coefficients.items():
            acc = None
            for exps, c in terms:
                t: Expr = Num(c)
                for v, e in zip(self.variables, exps):
                    if e == 1:
                        t = BinOp("*", t, Var(v))
                    elif e > 1:
                        t = BinOp("*", t, BinOp("**", Var(v), Num(Fraction(e))))
                acc = t if acc is None else BinOp("+", acc, t)
            out[y] = acc if acc is not None else Num(Fraction(0))
        return out

    def evaluate(self, a):
        missing = [f for f in self.variables if f not in a]
        if missing:
            raise ModelError(f"missing feature value(s) {missing}")
        point = [to_fraction(a[v]) for v in self.variables]
        out = {}
        for y, terms in self.coefficients.items():
            s = Fraction(0)
            for exps, c in terms:
                m = c
                for x, e in zip(point, exps):
                    if e:
                        m *= x**e
                s += m
            out[y] = s
        return out


@dataclass(frozen=True)
class Leaf:
    values: tuple[Fraction, ...]


@dataclass(frozen=True)
class Split:
    feature: str
    threshold: Fraction
    left: "Leaf | Split"  # taken when value <= threshold
    right: "Leaf | Split"


Node = "Leaf | Split"


def _leaves(node, path=()):
    if isinstance(node, Leaf):
        yield path, node
        return
    yield from _leaves(node.left, path + ((node.feature, node.threshold, True),))
    yield from _leaves(node.right, path + ((node.feature, node.threshold, False),))


def tree_depth(node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


@dataclass(frozen=True)
class TreeModel(ModelDef):
    # one tree per group of outputs; leaves carry one value per output of the group
    trees: tuple[tuple[tuple[str, ...], Leaf | Split], ...] = ()

    kind = "tree"

    def __post_init__(self):
        feats = set(self.features)
        for outs, root in self.trees:
            for path, leaf in _leaves(root):
                if len(leaf.values) != len(outs):
                    raise ModelError("leaf arity does not match its outputs")
                lo: dict[str, Fraction] = {}
                hi: dict[str, Fraction] = {}
                for f, t, is_left in path:
                    if f not in feats:
                        raise ModelError(f"tree splits on unknown feature {f!r}")
                    if is_left:
                        hi[f] = min(hi.get(f, t), t)
                    else:
                        lo[f] = max(lo.get(f, t), t)
                    if f in lo and f in hi and lo[f] >= hi[f]:
                        raise ModelError(f"inconsistent tree path on feature {f!r}")
        self._check()

    def terms(self):
        out = {}
        for outs, root in self.trees:
            for i, y in enumerate(outs):
                out[y] = _node_term(root, i)
        return out

    def evaluate(self, a):
        missing = [f for f in self.features if f not in a]
        if missing:
            raise ModelError(f"missing feature value(s) {missing}")
        out = {}
        for outs, node in self.trees:
            while isinstance(node, Split):
                node = node.left if to_fraction(a[node.feature]) <= node.threshold else node.right
            out.update(zip(outs, node.values))
        return out

    def depth(self) -> int:
        return max((tree_depth(r) for _, r in self.trees), default=0)


def _node_term(node, i: int) -> Expr:
    if isinstance(node, Leaf):
        return Num(node.values[i])
    return Cond(
        _node_term(node.left, i),
        Compare("<=", Var(node.feature), Num(node.threshold)),
        _node_term(node.right, i),
    )


def eval_model(m: ModelDef, a: Mapping[str, Fraction]) -> dict[str, Fraction]:
    return m.evaluate(a)


def encode_model(m: ModelDef) -> Expr:
    """Constraint linking inputs and knobs to the output variables.

    A point satisfies it exactly when its outputs equal ``eval_model``.
    """
    if isinstance(m, TreeModel):
        parts = []
        for outs, root in m.trees:
            branches = []
            for path, leaf in _leaves(root):
                guard = conj(*(
                    Compare("<=" if is_left else ">", Var(f), Num(t)) for f, t, is_left in path
                ))
                eqs = conj(*(Compare("==", Var(y), Num(v)) for y, v in zip(outs, leaf.values)))
                branches.append(conj(guard, eqs))
            parts.append(disj(*branches))
        return conj(*parts)
    return conj(*(
        Compare("==", BinOp("-", Var(y), t), Num(Fraction(0))) for y, t in m.terms().items()
    ))


# -- fitting ---------------------------------------------------------------------------


def _split_features(features, knobs):
    knobs = tuple(f for f in features if f in set(knobs))
    inputs = tuple(f for f in features if f not in set(knobs))
    return inputs, knobs


def monomials(nvars: int, degree: int) -> list[Monomial]:
    out = []
    for deg in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), deg):
            exps = [0] * nvars
            for j in combo:
                exps[j] += 1
            out.append(tuple(exps))
    return out


def _solve_exact(a: list[list[Fraction]], b: list[list[Fraction]]) -> list[list[Fraction]]:
    """Gauss-Jordan on square ``a`` with several right-hand sides."""
    n = len(a)
    m = [row[:] + rhs[:] for row, rhs in zip(a, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise ModelError("rank-deficient design matrix")
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [v - f * w for v, w in zip(m[r], m[col])]
    return [row[n:] for row in m]


@dataclass(frozen=True)
class PolynomialFit:
    model: PolynomialModel
    residual: dict[str, Fraction]  # sum of squared training residuals


def fit_polynomial(d: Dataset, degree: int, features=None, responses=None, knobs=()) -> PolynomialFit:
    """Exact least-squares fit of a total-degree polynomial per response."""
    features = tuple(features or d.features)
    responses = tuple(responses or d.responses)
    if degree < 0:
        raise ModelError("degree must be nonnegative")
    monos = monomials(len(features), degree)
    if len(d) < len(monos):
        raise ModelError(f"rank-deficient design matrix: {len(d)} rows for {len(monos)} monomials")
    fidx = [d.columns.index(f) for f in features]
    ridx = [d.columns.index(r) for r in responses]
    design = []
    for row in d.rows:
        xs = [row[j] for j in fidx]
        vals = []
        for exps in monos:
            v = Fraction(1)
            for x, e in zip(xs, exps):
                if e:
                    v *= x**e
            vals.append(v)
        design.append(vals)
    k = len(monos)
    ata = [[sum(r[i] * r[j] for r in design) for j in range(k)] for i in range(k)]
    aty = [[sum(r[i] * row[j] for r, row in zip(design, d.rows)) for j in ridx] for i in range(k)]
    sol = _solve_exact(ata, aty)
    coeffs = {}
    residual = {}
    for c, y in enumerate(responses):
        coefs = [sol[i][c] for i in range(k)]
        coeffs[y] = tuple((m, v) for m, v in zip(monos, coefs) if v != 0)
        res = Fraction(0)
        for r, row in zip(design, d.rows):
            pred = sum(v * w for v, w in zip(r, coefs))
            res += (row[ridx[c]] - pred) ** 2
        residual[y] = res
    inputs, knobs_ = _split_features(features, knobs)
    model = PolynomialModel(inputs, knobs_, responses, features, coeffs)
    return PolynomialFit(model, residual)


def _sse(rows, ridx) -> Fraction:
    n = len(rows)
    total = Fraction(0)
    for j in ridx:
        s = sum(r[j] for r in rows)
        sq = sum(r[j] * r[j] for r in rows)
        total += sq - s * s / n
    return total


def _grow(rows, fidx, fnames, ridx, depth, max_depth):
    n = len(rows)
    means = tuple(sum(r[j] for r in rows) / n for j in ridx)
    if depth >= max_depth or n < 2 or _sse(rows, ridx) == 0:
        return Leaf(means)
    best = None  # (sse, feature order, threshold)
    for order, j in enumerate(fidx):
        srt = sorted(rows, key=lambda r: r[j])
        sums = [Fraction(0)] * len(ridx)
        sqs = [Fraction(0)] * len(ridx)
        tot = [sum(r[k] for r in rows) for k in ridx]
        totsq = [sum(r[k] * r[k] for r in rows) for k in ridx]
        for i in range(1, n):
            prev = srt[i - 1]
            for c, k in enumerate(ridx):
                sums[c] += prev[k]
                sqs[c] += prev[k] * prev[k]
            if srt[i][j] == prev[j]:
                continue
            nl, nr = i, n - i
            sse = Fraction(0)
            for c in range(len(ridx)):
                sse += sqs[c] - sums[c] * sums[c] / nl
                rs = tot[c] - sums[c]
                sse += (totsq[c] - sqs[c]) - rs * rs / nr
            thr = (prev[j] + srt[i][j]) / 2
            key = (sse, order, thr)
            if best is None or key < best:
                best = key
    if best is None:
        return Leaf(means)
    _, order, thr = best
    j = fidx[order]
    left = [r for r in rows if r[j] <= thr]
    right = [r for r in rows if r[j] > thr]
    return Split(
        fnames[order],
        thr,
        _grow(left, fidx, fnames, ridx, depth + 1, max_depth),
        _grow(right, fidx, fnames, ridx, depth + 1, max_depth),
    )


def fit_tree(d: Dataset, max_depth: int, features=None, responses=None, knobs=(),
             per_response: bool = True) -> TreeModel:
    """CART regression tree(s) minimizing the summed squared error.

    Ties go to the lowest feature index, then the smallest threshold.
    """
    if len(d) == 0:
        raise ModelError("cannot fit a tree to an empty dataset")
    if max_depth < 0:
        raise ModelError("max_depth must be nonnegative")
    features = tuple(features or d.features)
    responses = tuple(responses or d.responses)
    fidx = [d.columns.index(f) for f in features]
    groups = [(y,) for y in responses] if per_response else [responses]
    trees = []
    for outs in groups:
        ridx = [d.columns.index(y) for y in outs]
        trees.append((outs, _grow(list(d.rows), fidx, features, ridx, 0, max_depth)))
    inputs, knobs_ = _split_features(features, knobs)
    return TreeModel(inputs, knobs_, responses, tuple(trees))


def objective_bounds(d: Dataset, objectives: Mapping[str, Expr]) -> dict[str, tuple[Fraction, Fraction]]:
    """Exact (min, max) of each objective over the dataset rows."""
    cols = set(d.columns)
    out = {}
    recs = d.records()
    if not recs:
        raise ModelError("objective bounds need at least one data row")
    for name, e in objectives.items():
        bad = free_vars(e) - cols
        if bad:
            raise ModelError(f"objective {name!r} references non-column variable(s) {sorted(bad)}")
        vals = [eval_expr(e, r) for r in recs]
        out[name] = (min(vals), max(vals))
    return out


def prediction_metrics(m: ModelDef, d: Dataset) -> dict[str, dict[str, float]]:
    """Mean squared error and r2 score per response."""
    recs = d.records()
    preds = [m.evaluate(r) for r in recs]
    out = {}
    for y in m.outputs:
        if y not in d.columns:
            continue
        actual = [r[y] for r in recs]
        pred = [p[y] for p in preds]
        n = len(actual)
        mse = sum((a - b) ** 2 for a, b in zip(actual, pred)) / n
        mean = sum(actual) / n
        var = sum((a - mean) ** 2 for a in actual) / n
        r2 = 1 - mse / var if var != 0 else (Fraction(1) if mse == 0 else Fraction(0))
        out[y] = {"msqe": float(mse), "r2_score": float(r2)}
    return out


# -- persistence ------------------------------------------------------------------------


def _q(v: Fraction):
    return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _node_to_json(node):
    if isinstance(node, Leaf):
        return {"leaf": [_q(v) for v in node.values]}
    return {
        "feature": node.feature,
        "threshold": _q(node.threshold),
        "left": _node_to_json(node.left),
        "right": _node_to_json(node.right),
    }


def _node_from_json(d):
    if "leaf" in d:
        return Leaf(tuple(to_fraction(v) for v in d["leaf"]))
    return Split(d["feature"], to_fraction(d["threshold"]),
                 _node_from_json(d["left"]), _node_from_json(d["right"]))


def model_to_dict(m: ModelDef) -> dict:
    d = {"kind": m.kind, "inputs": list(m.inputs), "knobs": list(m.knobs), "outputs": list(m.outputs)}
    if isinstance(m, ExpressionModel):
        d["expressions"] = {y: to_text(e) for y, e in m.expressions.items()}
    elif isinstance(m, PolynomialModel):
        d["variables"] = list(m.variables)
        d["terms"] = {y: [[list(e), _q(c)] for e, c in ts] for y, ts in m.coefficients.items()}
    elif isinstance(m, TreeModel):
        d["trees"] = [{"outputs": list(outs), "root": _node_to_json(r)} for outs, r in m.trees]
    else:
        raise ModelError(f"cannot serialize {type(m).__name__}")
    return d


def model_from_dict(d: Mapping) -> ModelDef:
    try:
        kind = d["kind"]
        common = dict(inputs=tuple(d["inputs"]), knobs=tuple(d["knobs"]), outputs=tuple(d["outputs"]))
        if kind == "expression":
            return ExpressionModel(**common, expressions={
                y: parse_expr(t) for y, t in d["expressions"].items()})
        if kind == "polynomial":
            return PolynomialModel(**common, variables=tuple(d["variables"]), coefficients={
                y: tuple((tuple(int(e) for e in exps), to_fraction(c)) for exps, c in ts)
                for y, ts in d["terms"].items()})
        if kind == "tree":
            return TreeModel(**common, trees=tuple(
                (tuple(t["outputs"]), _node_from_json(t["root"])) for t in d["trees"]))
    except (KeyError, TypeError, ValueError, EvalError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"model schema violation: {exc!r}") from None
    raise ModelError(f"unsupported model kind {kind!r}")


def save_model(m: ModelDef, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m), indent=2) + "\n", encoding="utf-8")


def load_model(path) -> ModelDef:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed model file: {exc}") from None
    return model_from_dict(d)
