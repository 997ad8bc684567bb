"""Command-line driver: flag parsing, output naming and report writing."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import doe as doe_mod
from .explore import ExploreError, build_instance, certify, optimize, optsyn, query, synthesize, verify
from .model import (
    Dataset,
    ExpressionModel,
    ModelDef,
    ModelError,
    fit_polynomial,
    fit_tree,
    load_csv,
    load_model,
    objective_bounds,
    prediction_metrics,
    save_model,
    write_csv,
)
from .solver import SolverConfig
from .speclang import ExprSyntaxError, SpecError, load_spec, parse_expr

log = logging.getLogger("stabex")

EXPLORE_MODES = ("certify", "query", "verify", "synthesize", "optimize", "optsyn")
MODES = ("train", "predict", "doe", "subgroups") + EXPLORE_MODES
MODEL_KINDS = {"dt": "dt", "dt_sklearn": "dt", "poly": "poly", "poly_sklearn": "poly", "system": "system"}

PROGRESS_BASE = ("iteration", "objective", "threshold_lo_scaled", "threshold_up_scaled",
                 "threshold_lo", "threshold_up")


class UsageError(Exception):
    """Bad or missing command-line flags."""


def truth(v: str) -> bool:
    s = v.strip().lower()
    if s in ("t", "true", "1", "yes"):
        return True
    if s in ("f", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected t or f, got {v!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stabex", allow_abbrev=False,
                                 description="Stability-aware exploration of ML models.")
    ap.add_argument("-mode", choices=MODES)
    ap.add_argument("-data")
    ap.add_argument("-new_data")
    ap.add_argument("-spec")
    ap.add_argument("-out_dir")
    ap.add_argument("-pref", default="")
    ap.add_argument("-resp")
    ap.add_argument("-feat")
    ap.add_argument("-model", default="dt", choices=sorted(MODEL_KINDS))
    ap.add_argument("-dt_sklearn_max_depth", type=int, default=15)
    ap.add_argument("-poly_degree", type=int, default=2)
    ap.add_argument("-model_per_response", type=truth, default=True)
    ap.add_argument("-pareto", type=truth, default=True)
    ap.add_argument("-epsilon", type=Fraction, default=Fraction(1, 20))
    ap.add_argument("-delta_rel", type=Fraction, default=Fraction(1, 100))
    ap.add_argument("-seed", type=int, default=0)
    ap.add_argument("-alpha")
    ap.add_argument("-beta")
    ap.add_argument("-eta")
    for kind in ("asrt", "quer", "objv"):
        ap.add_argument(f"-{kind}_names")
        ap.add_argument(f"-{kind}_exprs")
    ap.add_argument("-doe_spec")
    ap.add_argument("-doe_algo", default="full_factorial")
    ap.add_argument("-doe_num_samples", type=int)
    ap.add_argument("-save_model", type=truth, default=False)
    ap.add_argument("-use_model", type=truth, default=False)
    ap.add_argument("-model_name")
    ap.add_argument("-max_iterations", type=int, default=400)
    ap.add_argument("-log_time", type=truth, default=False)
    ap.add_argument("-log_level", default="info", choices=["debug", "info", "warning", "error"])
    return ap


@dataclass
class RunContext:
    mode: str
    out_dir: Path
    prefix: str

    def path(self, suffix: str) -> Path:
        return self.out_dir / f"{self.prefix}_{suffix}"


def _stem(path) -> str:
    name = Path(path).name
    for suffix in (".gz", ".bz2", ".csv", ".spec", ".json"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    return name


def resolve_output_dir(args) -> Path:
    """-out_dir, else the data, new data or DOE spec directory."""
    if args.out_dir:
        return Path(args.out_dir)
    for src in (args.data, args.new_data, args.doe_spec):
        if src:
            return Path(src).resolve().parent
    raise UsageError("cannot determine the output directory: give -out_dir, -data, -new_data or -doe_spec")


def file_prefix(args) -> str:
    if args.mode == "doe":
        name = _stem(args.doe_spec)
    elif args.data:
        name = _stem(args.data)
    elif args.new_data:
        name = _stem(args.new_data)
    elif args.model_name:
        name = _stem(args.model_name)
    elif args.spec:
        name = _stem(args.spec)
    else:
        raise UsageError("cannot derive a file name prefix: no data, model or spec given")
    return f"{args.pref}_{name}" if args.pref else name


def _named_exprs(names: str | None, exprs: str | None, flag: str) -> dict | None:
    if names is None and exprs is None:
        return None
    if names is None or exprs is None:
        raise UsageError(f"-{flag}_names and -{flag}_exprs must be given together")
    ns = [n.strip() for n in names.split(",") if n.strip()]
    es = [e.strip() for e in exprs.split(";") if e.strip()]
    if len(ns) != len(es):
        raise UsageError(f"-{flag}_names lists {len(ns)} name(s) but -{flag}_exprs has {len(es)}")
    return {n: parse_expr(e) for n, e in zip(ns, es)}


def apply_overrides(spec, args):
    """Command-line conditions replace the ones from the problem file."""
    changes = {}
    for key in ("alpha", "beta", "eta"):
        text = getattr(args, key)
        if text is not None:
            changes[key] = parse_expr(text)
    for flag, key in (("asrt", "assertions"), ("quer", "queries"), ("objv", "objectives")):
        d = _named_exprs(getattr(args, f"{flag}_names"), getattr(args, f"{flag}_exprs"), flag)
        if d is not None:
            changes[key] = d
    if "assertions" in changes:
        changes["configurations"] = {k: v for k, v in spec.configurations.items() if k in changes["assertions"]}
    if "queries" in changes:
        changes["witnesses"] = {k: v for k, v in spec.witnesses.items() if k in changes["queries"]}
    return spec.replace(**changes) if changes else spec


def _labels(text: str | None, default) -> list[str]:
    if text is None:
        return list(default)
    return [t.strip() for t in text.split(",") if t.strip()]


def _load_data(args, spec=None) -> Dataset:
    feats = _labels(args.feat, spec.inputs + spec.knobs if spec else [])
    resp = _labels(args.resp, spec.outputs if spec else [])
    d = load_csv(args.data)
    if not feats:
        feats = [c for c in d.columns if c not in resp]
    missing = [c for c in feats + resp if c not in d.columns]
    if missing:
        raise UsageError(f"data file lacks column(s) {missing}")
    return Dataset(d.columns, d.rows, tuple(feats), tuple(resp))


def _model_file(name: str) -> Path:
    p = Path(name)
    return p if p.suffix == ".json" else p.with_name(p.name + ".json")


def obtain_model(args, ctx: RunContext, spec=None, data: Dataset | None = None) -> ModelDef:
    kind = MODEL_KINDS[args.model]
    if args.use_model:
        if not args.model_name:
            raise UsageError("-use_model needs -model_name")
        m = load_model(_model_file(args.model_name))
        log.info("loaded model from %s", _model_file(args.model_name))
        return m
    if kind == "system":
        if spec is None or not spec.system:
            raise UsageError("-model system needs a spec with a 'system' section")
        return ExpressionModel(tuple(spec.inputs), tuple(spec.knobs), tuple(spec.outputs), dict(spec.system))
    if data is None:
        raise UsageError("training a model needs -data (or -use_model t, or -model system)")
    knobs = spec.knobs if spec else ()
    if kind == "dt":
        m = fit_tree(data, args.dt_sklearn_max_depth, knobs=knobs, per_response=args.model_per_response)
    else:
        m = fit_polynomial(data, args.poly_degree, knobs=knobs).model
    log.info("trained %s model on %d row(s)", kind, len(data))
    if args.save_model:
        if not args.model_name:
            raise UsageError("-save_model t needs -model_name")
        out = ctx.out_dir / _model_file(Path(args.model_name).name)
        save_model(m, out)
        log.info("saved model to %s", out)
    return m


# -- report writing -------------------------------------------------------------------


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=4) + "\n", encoding="utf-8")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return repr(float(v))
    return v


def write_progress(rows: list[dict], knobs, outputs, ctx: RunContext) -> None:
    columns = list(PROGRESS_BASE) + list(knobs) + list(outputs)
    write_csv(ctx.path("optimization_progress.csv"), columns,
              ([_cell(r.get(c)) for c in columns] for r in rows))
    js = [{c: (float(r[c]) if isinstance(r.get(c), Fraction) else r.get(c)) for c in columns} for r in rows]
    dump_json(js, ctx.path("optimization_progress.json"))


def _flatten(report: dict) -> tuple[list[str], list]:
    cols, vals = [], []
    for k, v in report.items():
        if isinstance(v, dict):
            for f, x in v.items():
                cols.append(f"{k}_{f}")
                vals.append(x)
        else:
            cols.append(k)
            vals.append(v)
    return cols, vals


def write_predictions(model: ModelDef, d: Dataset, ctx: RunContext, kind: str) -> None:
    recs = d.records()
    outs = list(model.outputs)
    have = [y for y in outs if y in d.columns]
    columns = list(model.features) + have + [f"{y}_pred" for y in outs]
    rows = []
    for r in recs:
        pred = model.evaluate(r)
        rows.append([r[f] for f in model.features] + [r[y] for y in have] + [pred[y] for y in outs])
    write_csv(ctx.path(f"{kind}_predictions_summary.csv"), columns, rows)
    if have:
        metrics = prediction_metrics(model, d)
        write_csv(ctx.path(f"{kind}_prediction_precisions.csv"), ["response", "msqe", "r2_score"],
                  ([y, repr(m["msqe"]), repr(m["r2_score"])] for y, m in metrics.items()))


# -- modes ------------------------------------------------------------------------------


def run_doe(args, ctx: RunContext) -> None:
    grid = doe_mod.load_grid(args.doe_spec)
    m = doe_mod.generate(args.doe_algo, grid, args.doe_num_samples, args.seed)
    doe_mod.save_matrix(m, ctx.path("doe.csv"))
    log.info("wrote %d DOE row(s) to %s", len(m), ctx.path("doe.csv"))


def run_training(args, ctx: RunContext) -> None:
    spec = load_spec(args.spec) if args.spec else None
    data = _load_data(args, spec) if args.data else None
    if not args.use_model and data is not None and not data.responses:
        raise UsageError("training needs -resp (or a spec declaring outputs)")
    model = obtain_model(args, ctx, spec, data)
    if data is not None:
        write_predictions(model, data, ctx, "training")
    if args.mode == "predict":
        if not args.new_data:
            raise UsageError("-mode predict needs -new_data")
        new = load_csv(args.new_data)
        write_predictions(model, new, ctx, "new")


def run_exploration(args, ctx: RunContext) -> None:
    if not args.spec:
        raise UsageError(f"-mode {args.mode} needs -spec")
    spec = apply_overrides(load_spec(args.spec), args)
    data = _load_data(args, spec) if args.data else None
    model = obtain_model(args, ctx, spec, data)
    cfg = SolverConfig(epsilon=args.epsilon, seed=args.seed)
    inst = build_instance(spec, model, cfg, max_iterations=args.max_iterations)
    if args.mode in ("optimize", "optsyn"):
        if data is not None:
            bounds = objective_bounds(load_csv(args.data), spec.objectives)
        else:
            log.warning("no -data: objectives are not rescaled")
            bounds = {n: (Fraction(0), Fraction(1)) for n in spec.objectives}
        rows: list[dict] = []
        fn = optimize if args.mode == "optimize" else optsyn
        rep, res = fn(inst, bounds=bounds, pareto=args.pareto, delta=args.delta_rel, sink=rows.append)
        write_progress(rows, inst.knobs, inst.outputs, ctx)
        out = rep.to_dict()
        dump_json(out, ctx.path("optimization_results.json"))
        cols, vals = _flatten(out)
        write_csv(ctx.path("optimization_results.csv"), cols, [[_cell(v) for v in vals]])
        log.info("%s finished with status %s", args.mode, res.status)
        return
    runner = {"certify": certify, "query": query, "verify": verify, "synthesize": synthesize}[args.mode]
    rep = runner(inst)
    dump_json(rep.to_dict(), ctx.path(f"{args.mode}_results.json"))
    log.info("wrote %s", ctx.path(f"{args.mode}_results.json"))


def _setup_logging(args) -> None:
    fmt = "%(asctime)s %(levelname)s %(message)s" if args.log_time else "%(levelname)s %(message)s"
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter(fmt))
    log.handlers[:] = [handler]
    log.setLevel(args.log_level.upper())
    log.propagate = False


def run(argv=None) -> int:
    ap = build_parser()
    args, unknown = ap.parse_known_args(argv)
    _setup_logging(args)
    if unknown:
        log.warning("ignoring unsupported argument(s): %s", " ".join(unknown))
    try:
        if args.mode is None:
            raise UsageError("-mode is required")
        if args.mode == "subgroups":
            raise UsageError("mode 'subgroups' is not supported")
        if args.mode == "doe" and not args.doe_spec:
            raise UsageError("-mode doe needs -doe_spec")
        if args.mode in EXPLORE_MODES and not args.spec:
            raise UsageError(f"-mode {args.mode} needs -spec")
        ctx = RunContext(args.mode, resolve_output_dir(args), file_prefix(args))
        ctx.out_dir.mkdir(parents=True, exist_ok=True)
        if args.mode == "doe":
            run_doe(args, ctx)
        elif args.mode in ("train", "predict"):
            run_training(args, ctx)
        else:
            run_exploration(args, ctx)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ExploreError, SpecError, ModelError, ExprSyntaxError, doe_mod.DoeError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
