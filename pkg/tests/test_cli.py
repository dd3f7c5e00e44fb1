import json

import numpy as np
import pandas as pd
import pytest

from app.data.synthetic import load_model_constants, sample_model, save_model_constants
from main import main

HAND_CSV = "x,treatment,response\n0,0,2\n1,1,4\n2,0,6\n3,1,8\n"


@pytest.fixture
def small_constants(tmp_path):
    path = tmp_path / "small.json"
    save_model_constants(sample_model(5, d=6, m=4, calibration_draws=5000), path)
    return path


@pytest.fixture
def synthetic_csv(tmp_path, small_constants):
    out = tmp_path / "train.csv"
    assert main(["synth", "--seed", "1", "--from-constants", str(small_constants), "--n-per-treatment", "100",
                 "--out", str(out), "--constants", str(tmp_path / "pinned.json")]) == 0
    return out


def test_synth_writes_dataset_and_constants(tmp_path):
    out, constants = tmp_path / "d.csv", tmp_path / "c.json"
    assert main(["synth", "--seed", "7", "--n-per-treatment", "500", "--out", str(out),
                 "--constants", str(constants)]) == 0
    frame = pd.read_csv(out)
    assert len(frame) == 2000
    assert frame["treatment"].value_counts().sort_index().tolist() == [500, 500, 500, 500]
    assert load_model_constants(constants).d == 50
    assert (tmp_path / "d.csv.config.json").is_file()

    again = tmp_path / "again.csv"
    assert main(["synth", "--seed", "7", "--n-per-treatment", "500", "--out", str(again),
                 "--constants", str(tmp_path / "c2.json")]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_train_predict_round_trip(tmp_path, synthetic_csv):
    model = tmp_path / "model.json"
    assert main(["train", "--data", str(synthetic_csv), "--model", str(model), "--ntree", "5",
                 "--min-split", "20", "--seed", "3"]) == 0
    predictions = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model), "--data", str(synthetic_csv), "--out", str(predictions)]) == 0
    frame = pd.read_csv(predictions, float_precision="round_trip")
    assert len(frame) == 400
    assert list(frame.columns) == ["row", "chosen", "estimate_0", "estimate_1", "estimate_2", "estimate_3"]
    scores = frame[["estimate_0", "estimate_1", "estimate_2", "estimate_3"]].to_numpy()
    assert frame["chosen"].tolist() == np.argmax(scores, axis=1).tolist()


def test_effective_config_reproduces_the_run(tmp_path, synthetic_csv):
    first = tmp_path / "first.json"
    assert main(["train", "--data", str(synthetic_csv), "--model", str(first), "--ntree", "3",
                 "--min-split", "30", "--seed", "9"]) == 0
    config = tmp_path / "first.json.config.json"
    second = tmp_path / "second.json"
    assert main(["train", "--config", str(config), "--data", str(synthetic_csv), "--model", str(second)]) == 0
    assert second.read_bytes() == first.read_bytes()


def test_evaluate_hand_example(tmp_path, capsys):
    data = tmp_path / "hand.csv"
    data.write_text(HAND_CSV)
    assert main(["evaluate", "--constant", "1", "--data", str(data), "--probs", "0.5,0.5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["estimate"] == 6.0
    assert report["n"] == 4


def test_evaluate_trained_baseline_on_hand_example(tmp_path, capsys):
    data = tmp_path / "hand.csv"
    data.write_text(HAND_CSV)
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"algorithm": "sma-rf",
                                 "sma": {"ntree": 1, "min_samples_leaf": 5, "bootstrap": False}}))
    model = tmp_path / "sma.json"
    assert main(["train", "--config", str(config), "--data", str(data), "--model", str(model)]) == 0
    capsys.readouterr()
    out = tmp_path / "report.json"
    assert main(["evaluate", "--model", str(model), "--data", str(data), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["estimate"] == 6.0


def test_curve_starts_at_all_control(tmp_path, synthetic_csv, capsys):
    model = tmp_path / "model.json"
    assert main(["train", "--data", str(synthetic_csv), "--model", str(model), "--ntree", "3",
                 "--min-split", "20"]) == 0
    curve = tmp_path / "curve.csv"
    assert main(["curve", "--model", str(model), "--data", str(synthetic_csv), "--out", str(curve)]) == 0
    frame = pd.read_csv(curve, float_precision="round_trip")
    assert frame["fraction"].iloc[0] == 0.0 and frame["fraction"].iloc[-1] == 1.0
    assert len(frame) == 21

    capsys.readouterr()
    assert main(["evaluate", "--constant", "0", "--data", str(synthetic_csv)]) == 0
    control = json.loads(capsys.readouterr().out)
    assert frame["estimate"].iloc[0] == control["estimate"]

    assert main(["evaluate", "--model", str(model), "--data", str(synthetic_csv)]) == 0
    full = json.loads(capsys.readouterr().out)
    assert frame["estimate"].iloc[-1] == full["estimate"]


def test_tune_writes_score_table(tmp_path, synthetic_csv, capsys):
    scores = tmp_path / "scores.csv"
    assert main(["tune", "--data", str(synthetic_csv), "--grid", "20,40", "--folds", "2", "--ntree", "3",
                 "--out", str(scores)]) == 0
    table = pd.read_csv(scores, float_precision="round_trip")
    assert list(table.columns) == ["value", "fold", "score"]
    assert len(table) == 4
    best = int(capsys.readouterr().out.strip().split("=")[1])
    means = table.groupby("value")["score"].mean()
    assert means[best] == means.max()
    config = json.loads((tmp_path / "scores.csv.config.json").read_text())
    assert config["cts"]["tree"]["min_split"] == best


def test_benchmark_emits_reference_rows(tmp_path, small_constants):
    out = tmp_path / "bench.csv"
    assert main(["benchmark", "--constants", str(small_constants), "--sizes", "50", "--replications", "2",
                 "--algorithms", "cts,sma-rf", "--mc-draws", "20000", "--ntree", "3", "--out", str(out)]) == 0
    results = pd.read_csv(out)
    references = results[results["size"].isna()].set_index("policy")["value"]
    assert sorted(references.index) == ["constant_1", "constant_2", "constant_3", "constant_4", "oracle"]
    constants = references[[f"constant_{t}" for t in range(1, 5)]]
    assert constants.max() - constants.min() < 0.1
    assert references["oracle"] - constants.max() == pytest.approx(0.6, abs=0.05)
    assert len(results[results["size"].notna()]) == 4

    summary = pd.read_csv(tmp_path / "bench.csv.summary.csv")
    assert sorted(summary["policy"]) == ["cts", "sma-rf"]
    assert summary["replications"].tolist() == [2, 2]


def test_library_errors_exit_with_one_line(tmp_path, capsys, synthetic_csv):
    model = tmp_path / "model.json"
    assert main(["train", "--data", str(synthetic_csv), "--model", str(model), "--ntree", "2"]) == 0
    doc = json.loads(model.read_text())
    doc["format_version"] = "2"
    model.write_text(json.dumps(doc))
    capsys.readouterr()
    assert main(["predict", "--model", str(model), "--data", str(synthetic_csv),
                 "--out", str(tmp_path / "p.csv")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith("error: model_version: ")


def test_missing_input_is_a_dataset_error(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "absent.csv"), "--model", str(tmp_path / "m.json")]) == 2
    assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error: dataset_invalid: missing file")


def test_unwritable_output_is_an_io_error(tmp_path, capsys, small_constants):
    out = tmp_path / "no-such-dir" / "d.csv"
    assert main(["synth", "--from-constants", str(small_constants), "--n-per-treatment", "10",
                 "--out", str(out), "--constants", str(tmp_path / "c.json")]) == 3
    assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error: io: ")


def test_unknown_algorithm_rejected(tmp_path, synthetic_csv, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"algorithm": "upliftRF"}))
    assert main(["train", "--config", str(config), "--data", str(synthetic_csv),
                 "--model", str(tmp_path / "m.json")]) == 2
    assert "error: config_invalid: " in capsys.readouterr().err


def last_error(capsys) -> str:
    return capsys.readouterr().err.strip().splitlines()[-1]


def test_undecodable_csv_is_a_dataset_error(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_bytes(b"x,treatment,response\n0,0,2\n\xff,1,4\n")
    assert main(["train", "--data", str(data), "--model", str(tmp_path / "m.json")]) == 2
    assert last_error(capsys).startswith("error: dataset_invalid: cannot parse")


def test_undecodable_model_is_malformed(tmp_path, capsys):
    data, model = tmp_path / "d.csv", tmp_path / "m.json"
    data.write_text(HAND_CSV)
    model.write_bytes(b'{"format_version": "\xff"}')
    assert main(["predict", "--model", str(model), "--data", str(data), "--out", str(tmp_path / "p.csv")]) == 2
    assert last_error(capsys).startswith("error: model_malformed: ")


@pytest.mark.parametrize("option", ["--config", "--from-constants"])
def test_undecodable_json_inputs_are_config_errors(tmp_path, capsys, option):
    bad = tmp_path / "bad.json"
    bad.write_bytes(b'{"seed": "\xff"}')
    assert main(["synth", option, str(bad), "--n-per-treatment", "10",
                 "--out", str(tmp_path / "d.csv"), "--constants", str(tmp_path / "c.json")]) == 2
    assert last_error(capsys).startswith("error: config_invalid: ")


def test_missing_config_file_is_a_config_error(tmp_path, capsys, synthetic_csv):
    assert main(["train", "--data", str(synthetic_csv), "--model", str(tmp_path / "m.json"),
                 "--config", str(tmp_path / "absent.json")]) == 2
    assert last_error(capsys).startswith("error: config_invalid: missing config file")
