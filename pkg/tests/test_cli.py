import argparse
import json

import pytest

from oracles import optimize_keys
from stabex.cli import build_parser, file_prefix, resolve_output_dir, run, truth


def parse(*argv):
    return build_parser().parse_args(list(argv))


def test_truth_values():
    assert truth("t") and truth("True") and not truth("f")
    with pytest.raises(argparse.ArgumentTypeError):
        truth("maybe")


def test_output_dir_precedence(tmp_path):
    a = parse("-mode", "train", "-data", str(tmp_path / "d" / "x.csv"), "-out_dir", str(tmp_path / "o"))
    assert resolve_output_dir(a) == tmp_path / "o"
    a = parse("-mode", "predict", "-new_data", str(tmp_path / "n" / "new.csv"),
              "-doe_spec", str(tmp_path / "g" / "g.csv"))
    assert resolve_output_dir(a) == (tmp_path / "n").resolve()


def test_prefix():
    assert file_prefix(parse("-mode", "optimize", "-data", "a/toy.csv.gz", "-pref", "T1")) == "T1_toy"
    assert file_prefix(parse("-mode", "doe", "-doe_spec", "g/grid.csv", "-data", "d.csv")) == "grid"
    assert file_prefix(parse("-mode", "certify", "-spec", "s/w.spec")) == "w"


def test_missing_spec_is_usage_error(toy_dir, capsys):
    code = run(["-mode", "verify", "-data", str(toy_dir / "smlp_toy_basic.csv")])
    assert code == 2
    assert "-spec" in capsys.readouterr().err


def test_missing_mode_and_subgroups(capsys):
    assert run([]) == 2
    assert run(["-mode", "subgroups", "-out_dir", "."]) == 2
    assert "subgroups" in capsys.readouterr().err


def test_doe_command(toy_dir):
    code = run(["-mode", "doe", "-doe_spec", str(toy_dir / "doe_four_levels_real.csv"), "-pref", "Test34"])
    assert code == 0
    out = (toy_dir / "Test34_doe_four_levels_real_doe.csv").read_text().splitlines()
    assert out[0] == "a,b,c" and len(out) == 49


def test_train_and_predict(toy_dir):
    data = str(toy_dir / "smlp_toy_basic.csv")
    base = ["-data", data, "-feat", "x1,x2,p1,p2", "-resp", "y1,y2", "-pref", "T"]
    assert run(["-mode", "train", *base, "-model", "dt_sklearn", "-save_model", "t",
                "-model_name", "toy_tree"]) == 0
    assert (toy_dir / "T_smlp_toy_basic_training_predictions_summary.csv").exists()
    prec = (toy_dir / "T_smlp_toy_basic_training_prediction_precisions.csv").read_text().splitlines()
    assert prec[0] == "response,msqe,r2_score" and prec[1].startswith("y1,0.0")
    assert (toy_dir / "toy_tree.json").exists()
    code = run(["-mode", "predict", *base, "-new_data", data, "-use_model", "t",
                "-model_name", str(toy_dir / "toy_tree")])
    assert code == 0
    summary = (toy_dir / "T_smlp_toy_basic_new_predictions_summary.csv").read_text().splitlines()
    assert summary[0] == "x1,x2,p1,p2,y1,y2,y1_pred,y2_pred" and len(summary) == 11


def test_predict_needs_new_data(toy_dir):
    code = run(["-mode", "predict", "-data", str(toy_dir / "smlp_toy_basic.csv"), "-resp", "y1,y2"])
    assert code == 2


def test_certify_with_system_model(toy_dir):
    code = run(["-mode", "certify", "-spec", str(toy_dir / "witness_toy.spec"), "-model", "system",
                "-out_dir", str(toy_dir), "-pref", "C"])
    assert code == 0
    rep = json.loads((toy_dir / "C_witness_toy_certify_results.json").read_text())
    assert rep["query_stable_witness"]["witness_status"] == "PASS"
    assert rep["query_grid_conflict"]["witness_status"] == "ERROR"


def test_query_overrides(toy_dir):
    code = run(["-mode", "query", "-spec", str(toy_dir / "witness_toy.spec"), "-model", "system",
                "-out_dir", str(toy_dir), "-quer_names", "q1,q2", "-quer_exprs", "y2 >= 30; y1 > 1000"])
    assert code == 0
    rep = json.loads((toy_dir / "witness_toy_query_results.json").read_text())
    assert rep["q1"]["query_status"] == "PASS" and rep["q2"]["query_feasible"] == "false"
    code = run(["-mode", "query", "-spec", str(toy_dir / "witness_toy.spec"), "-model", "system",
                "-out_dir", str(toy_dir), "-quer_names", "q1,q2", "-quer_exprs", "y2 >= 60"])
    assert code == 2


def test_verify_inference_error(toy_dir, capsys):
    spec = json.loads((toy_dir / "witness_toy.spec").read_text())
    del spec["configurations"]
    (toy_dir / "nocfg.spec").write_text(json.dumps(spec))
    code = run(["-mode", "verify", "-spec", str(toy_dir / "nocfg.spec"), "-model", "system",
                "-out_dir", str(toy_dir)])
    assert code == 1 and "inferred" in capsys.readouterr().err


def test_optimize_toy(toy_dir):
    code = run(["-mode", "optimize", "-data", str(toy_dir / "smlp_toy_basic.csv"),
                "-spec", str(toy_dir / "smlp_toy_basic.spec"), "-pref", "Test113",
                "-model", "dt_sklearn", "-epsilon", "0.05", "-delta_rel", "0.01"])
    assert code == 0
    rep = json.loads((toy_dir / "Test113_smlp_toy_basic_optimization_results.json").read_text())
    assert set(rep) == optimize_keys(["objective1", "objective2"], ["y1", "y2"], ["p1", "p2"], ["x1", "x2"])
    assert rep["objective2"]["min_in_data"] == 0.24 and rep["objective2"]["max_in_data"] == 10.7007
    assert rep["synthesis_feasible"] == "true"
    progress = (toy_dir / "Test113_smlp_toy_basic_optimization_progress.csv").read_text().splitlines()
    assert progress[0] == ("iteration,objective,threshold_lo_scaled,threshold_up_scaled,"
                           "threshold_lo,threshold_up,p1,p2,y1,y2")
    assert (toy_dir / "Test113_smlp_toy_basic_optimization_results.csv").exists()
    assert (toy_dir / "Test113_smlp_toy_basic_optimization_progress.json").exists()


def test_bad_expression_exit_code(toy_dir, capsys):
    code = run(["-mode", "query", "-spec", str(toy_dir / "witness_toy.spec"), "-model", "system",
                "-out_dir", str(toy_dir), "-quer_names", "q", "-quer_exprs", "y1 >"])
    assert code == 1


def test_unknown_flag_warns(toy_dir, capsys):
    code = run(["-mode", "doe", "-doe_spec", str(toy_dir / "doe_four_levels_real.csv"), "-plots", "t"])
    assert code == 0
    assert "-plots" in capsys.readouterr().out
