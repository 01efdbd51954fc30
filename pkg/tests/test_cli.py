import json

import pytest

from mmot.cli import main

SMALL = ["--set", "data.unlabeled=45", "--set", "data.validation=30", "--set", "data.test=30",
         "--set", "train.warmup_epochs=5", "--set", "train.ssl_epochs=3"]


@pytest.fixture
def data_dir(tmp_path):
    assert main(["gen-data", "--out", str(tmp_path / "d"), "--seed", "4", *SMALL]) == 0
    return tmp_path / "d"


def test_gen_data_writes_splits(data_dir):
    assert sorted(p.name for p in data_dir.iterdir()) == ["labeled.csv", "test.csv", "unlabeled.csv", "validation.csv"]


def test_cluster_ot_pseudo_label_baseline(data_dir, tmp_path, capsys):
    capsys.readouterr()
    assert main(["cluster", str(data_dir / "unlabeled.csv"), "-k", "3", "--out", str(tmp_path / "c.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["k"] == 3

    src = tmp_path / "p.csv"
    src.write_text("f0,weight\n0,0.5\n1,0.5\n")
    dst = tmp_path / "q.csv"
    dst.write_text("f0\n0\n2\n")
    assert main(["ot", str(src), str(dst)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["cost"] == pytest.approx(0.5) and out["stop_reason"] == "optimal"

    assert main(["pseudo-label", str(data_dir / "labeled.csv"), str(data_dir / "unlabeled.csv"),
                 "--out", str(tmp_path / "pl.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["accuracy"] >= 0.95
    assert main(["baseline", str(data_dir / "labeled.csv"), str(data_dir / "unlabeled.csv"), "--method", "gnn-ss"]) == 0
    assert json.loads(capsys.readouterr().out)["accuracy"] >= 0.95


def test_train_metrics_are_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["train", "--seed", "3", *SMALL, "--metrics-out", str(a)]) == 0
    assert main(["--deterministic", "train", "--seed", "3", *SMALL, "--metrics-out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 4


def test_sweep_writes_report(tmp_path):
    out = tmp_path / "r.json"
    args = ["sweep", *SMALL, "--set", "sweep.lambda_grid=[0.25]", "--set", "sweep.alpha_grid=[1.0]",
            "--set", "sweep.validation_sizes=[10]", "--set", "sweep.repeats=2", "--out", str(out)]
    assert main(args) == 0
    assert len(json.loads(out.read_text())["rows"]) == 1


@pytest.mark.parametrize(
    "argv, code",
    [
        (["train", "--set", "train.bogus=1"], 2),
        (["train", "--set", "nodot"], 2),
        (["cluster", "/nonexistent.csv", "-k", "2"], 3),
    ],
)
def test_exit_codes(argv, code):
    assert main(argv) == code


def test_data_and_numerical_exit_codes(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    assert main(["cluster", str(bad), "-k", "1"]) == 3
    few = tmp_path / "few.csv"
    few.write_text("f0\n1\n")
    assert main(["cluster", str(few), "-k", "2"]) == 3
    a = tmp_path / "a.csv"
    a.write_text("f0\n0\n")
    b = tmp_path / "b.csv"
    b.write_text("f0\n1000\n")
    assert main(["ot", str(a), str(b), "--reg", "1e-3", "--max-iter", "5"]) == 0
    assert main(["ot", str(a), str(b), "--reg", "1e-3", "--no-log-domain"]) == 4
