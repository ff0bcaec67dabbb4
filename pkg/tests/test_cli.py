import csv
import json

import pytest

from happyfair.cli import main


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


FOREST = ("--trees", 5, "--max-depth", 6)


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "d.csv"
    assert run("generate", "--count", 1500, "--seed", 7, "--out", path) == 0
    return path


def test_generate_full_size(tmp_path):
    out = tmp_path / "full.csv"
    assert run("generate", "--count", 48842, "--seed", 7, "--out", out) == 0
    with open(out) as fh:
        assert sum(1 for _ in fh) == 48843
    manifest = json.loads((tmp_path / "full.csv.manifest.json").read_text())
    assert manifest["command"] == "generate" and manifest["config"]["seed"] == 7
    assert set(manifest["versions"]) == {"happyfair", "numpy", "python"}


def test_generate_is_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run("generate", "--count", 300, "--seed", 1, "--out", tmp_path / name) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize("argv", [
    ("generate", "--count", 0),
    ("bound", "--gamma", 0.01, "--delta", 0, "--C", 1, "--n", 2, "--labels", 2),
    ("bound", "--gamma", 1.5, "--delta", 0.02, "--C", 1, "--n", 2, "--labels", 2),
    ("sweep", "--data", "x.csv", "--mode", "beta"),
    ("frobnicate",),
])
def test_usage_errors(argv):
    assert run(*argv) == 2


def test_bound(capsys):
    assert run("bound", "--gamma", 0.01, "--delta", 0.02, "--C", 1, "--n", 2, "--labels", 2) == 0
    assert capsys.readouterr().out.strip() == "10596"


def test_unknown_criterion_lists_names(data, capsys):
    assert run("sweep", "--data", data, "--criterion", "fairness-please") == 2
    err = capsys.readouterr().err
    assert "equalized-odds" in err and "statistical-parity" in err and "expr:<text>" in err


def test_bad_expression_is_a_usage_error(data, tmp_path):
    assert run("sweep", "--data", data, *FOREST, "--criterion", "expr:yhat * (1 +",
               "--out-dir", tmp_path) == 2
    assert run("sweep", "--data", data, *FOREST, "--criterion", "expr:yhat * salary",
               "--out-dir", tmp_path) == 2


def test_missing_input_is_a_runtime_failure(tmp_path, capsys):
    assert run("sweep", "--data", tmp_path / "nope.csv") == 1
    assert "error" in capsys.readouterr().err


def test_train_predict_sweep_evaluate(data, tmp_path):
    model = tmp_path / "m.npz"
    preds = tmp_path / "p.csv"
    assert run("train", "--data", data, *FOREST, "--out", model) == 0
    assert run("predict", "--data", data, "--model", model, "--out", preds) == 0
    with open(preds) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["p_0", "p_1"] and len(rows) == 1501

    for source in (("--model", model), ("--predictions", preds)):
        out = tmp_path / source[0].strip("-")
        assert run("sweep", "--data", data, *source, "--criterion", "statistical-parity",
                   "--measure", "equal-funding", "--grid-size", 5, "--out-dir", out) == 0
        with open(out / "curve_validation.csv") as fh:
            curve = list(csv.DictReader(fh))
        assert len(curve) == 6 and all(r["dataset_tag"] == "validation" for r in curve)
        assert json.loads((out / "manifest.json").read_text())["config"]["criterion"] == "statistical-parity"
    assert (tmp_path / "model" / "curve_test.csv").read_bytes() == \
        (tmp_path / "predictions" / "curve_test.csv").read_bytes()

    report = tmp_path / "eval.csv"
    assert run("evaluate", "--data", data, "--predictions", preds, "--criterion", "equalized-odds",
               "--measure", "equal-funding", "--value", 0.0, "--out", report) == 0
    with open(report) as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["postprocessor"], r["split"]) for r in rows] == [
        ("identity", "validation"), ("identity", "test"), ("eps", "validation"), ("eps", "test")]


def test_alpha_sweep_and_custom_expression(data, tmp_path):
    assert run("sweep", "--data", data, *FOREST, "--mode", "alpha", "--grid", "0.5,0.7,0.99",
               "--criterion", "expr:yhat * loan_requested; ind(yhat == y)", "--out-dir", tmp_path) == 0
    lines = (tmp_path / "curve_validation.csv").read_text().splitlines()
    assert lines[0] == "mode,constraint,accuracy,gap_0,gap_1,gap_inf,dataset_tag,status"
    assert lines[-1].endswith("infeasible")


def test_misaligned_predictions_fail(data, tmp_path):
    (tmp_path / "p.csv").write_text("p_0,p_1\n0.5,0.5\n")
    assert run("sweep", "--data", data, "--predictions", tmp_path / "p.csv", "--out-dir", tmp_path) == 1


def test_pipeline_is_byte_identical(data, tmp_path):
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        assert run("sweep", "--data", data, *FOREST, "--criterion", "equal-funding", "--mode", "alpha",
                   "--grid-size", 6, "--out-dir", out) == 0
        outs.append(out)
    for f in ("curve_validation.csv", "curve_test.csv"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
