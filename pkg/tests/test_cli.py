import csv
import json

import numpy as np
import pytest

from smoothnb.classifier import NaiveBayesModel, predict_codes
from smoothnb.cli import main
from smoothnb.core import load_csv, load_schema
from smoothnb.experiments import fixture_paths


@pytest.fixture
def paths():
    return tuple(str(p) for p in fixture_paths("fixture-mixed"))


def test_train_predict_round_trip(tmp_path, paths, capsys):
    data, schema = paths
    model = tmp_path / "m.json"
    assert main(["train", "--data", data, "--schema", schema, "--mode", "smooth", "--epsilon", "2",
                 "--seed", "5", "--out", str(model)]) == 0
    assert "seed: 5" in capsys.readouterr().out
    out = tmp_path / "p.csv"
    assert main(["predict", "--model", str(model), "--data", data, "--scores", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    m = NaiveBayesModel.from_json(model.read_text())
    codes, scores = predict_codes(m, load_csv(data, load_schema(schema)).columns)
    assert [r["label"] for r in rows] == [m.schema.class_labels[c] for c in codes]
    got = np.array([[float(r["log_score_neg"]), float(r["log_score_pos"])] for r in rows])
    np.testing.assert_array_equal(got, scores)


def test_train_prints_os_seed(tmp_path, paths, capsys):
    data, schema = paths
    assert main(["train", "--data", data, "--schema", schema, "--mode", "global", "--epsilon", "1",
                 "--out", str(tmp_path / "m.json"), "--explain"]) == 0
    out = capsys.readouterr().out
    first, rest = out.split("\n", 1)
    assert first.startswith("seed: ")
    doc = json.loads(rest)
    assert doc["budget"]["epsilon"] == "1"
    assert doc["provenance"][0]["noise"]["family"] == "laplace"


def test_sensitivity_example(capsys):
    assert main(["sensitivity", "--values", "0.4,0.5,0.6", "--lower", "0", "--upper", "1",
                 "--statistic", "mean", "--beta", "0.1"]) == 0
    out = capsys.readouterr().out
    line = next(x for x in out.splitlines() if x.startswith("smooth sensitivity"))
    assert float(line.split(":")[1]) == pytest.approx(0.30161, abs=1e-5)


def test_sensitivity_from_data_json(paths, capsys):
    data, schema = paths
    assert main(["sensitivity", "--data", data, "--schema", schema, "--attribute", "num0", "--class", "pos",
                 "--statistic", "trimmed_mean", "--trim", "2", "--beta", "0.2", "--json", "--max-rows", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["statistic"] == "trimmed_mean" and len(doc["at_distance"]) == 3


def test_usage_errors(capsys):
    assert main(["train", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main(["frobnicate"]) == 2
    assert main([]) == 2
    assert main(["sensitivity", "--values", "1,2", "--statistic", "mean", "--beta", "-1"]) == 2
    assert main(["sensitivity", "--values", "1,2", "--statistic", "mean", "--beta", "1"]) == 2


def test_epsilon_required_before_reading(tmp_path, capsys):
    rc = main(["train", "--data", "missing.csv", "--schema", "missing.json", "--mode", "smooth",
               "--out", str(tmp_path / "m")])
    assert rc == 2


def test_validation_error_exit_1(tmp_path, paths, capsys):
    _, schema = paths
    bad = tmp_path / "bad.csv"
    bad.write_text("num0,num1,num2,cat0,cat1,label\n500,1,1,v0,v0,neg\n")
    assert main(["train", "--data", str(bad), "--schema", schema, "--mode", "plain", "--out",
                 str(tmp_path / "m")]) == 1
    assert "OutOfBounds" in capsys.readouterr().err
    assert not (tmp_path / "m").exists()
    assert main(["predict", "--model", str(bad), "--data", str(bad)]) == 1


def test_evaluate_writes_outputs(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"dataset": "fixture-mixed", "methods": ["plain", "majority", "smooth"],
                                "epsilons": [1.0], "folds": 3, "repetitions": 1}))
    out_csv, out_json = tmp_path / "r.csv", tmp_path / "r.json"
    args = ["evaluate", "--spec", str(spec), "--out-csv", str(out_csv), "--out-json", str(out_json)]
    assert main(args) == 2  # --seed is mandatory
    assert main(args + ["--seed", "4"]) == 0
    assert len(list(csv.DictReader(out_csv.open()))) == 9
    assert json.loads(out_json.read_text())["spec"]["seed"] == 4


def test_synth_and_bench(tmp_path):
    d, s = tmp_path / "d.csv", tmp_path / "s.json"
    assert main(["synth", "--rows", "40", "--numeric", "2", "--categorical", "1", "--out", str(d),
                 "--schema-out", str(s)]) == 0
    assert load_csv(d, load_schema(s)).n == 40
    out = tmp_path / "b.csv"
    assert main(["bench", "--sizes", "100,200", "--repeats", "1", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "n,global_seconds,smooth_seconds"
    assert main(["bench", "--sizes", "200,100"]) == 2
