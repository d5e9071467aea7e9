import json

import pytest

from fmim.cli import main

SMALL_SYNTH = ["--n-source-train", "24", "--n-target-unlabeled", "24", "--n-target-test", "12"]
SMALL_RUN = ["--embed-dim", "8", "--hidden-dim", "16", "--epochs", "2", "--batch-size", "8", "--lr", "1e-3"]


def _synth(out, seed="0"):
    assert main(["synth", "--out-dir", str(out), "--seed", seed, *SMALL_SYNTH]) == 0
    return out


def _run_flags(data):
    return [
        "--source-train", str(data / "source_train.conll"),
        "--target-unlabeled", str(data / "target_unlabeled.conll"),
        "--target-test", str(data / "target_test.conll"),
        *SMALL_RUN,
    ]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    return _synth(tmp_path_factory.mktemp("synth"))


@pytest.fixture(scope="module")
def trained(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["train", *_run_flags(data), "--output-dir", str(out)]) == 0
    return out


def test_synth_same_seed_byte_identical(tmp_path):
    a = _synth(tmp_path / "a", "5")
    b = _synth(tmp_path / "b", "5")
    c = _synth(tmp_path / "c", "6")
    for name in ("source_train.conll", "target_unlabeled.conll", "target_test.conll"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "source_train.conll").read_bytes() != (c / "source_train.conll").read_bytes()


def test_synth_overlap_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "synth.txt"
    cfg.write_text("source_lexicon=screen,food\ntarget_lexicon=food\n")
    assert main(["synth", "--out-dir", str(tmp_path / "o"), "--config", str(cfg)]) == 2
    assert "error" in capsys.readouterr().err


def test_train_outputs(trained):
    assert (trained / "checkpoint.npz").exists()
    assert (trained / "config.txt").read_text().startswith("task=ABSA")
    recs = [json.loads(l) for l in (trained / "metrics.jsonl").read_text().splitlines()]
    assert [r["step"] for r in recs] == list(range(1, 7))
    assert set(recs[0]) == {"step", "epoch", "ce", "delta1", "delta2", "mi_loss", "branch", "total"}
    assert {r["branch"] for r in recs} <= {"BelowThreshold", "AtOrAboveThreshold"}


def test_train_deterministic(data, trained, tmp_path):
    assert main(["train", *_run_flags(data), "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "metrics.jsonl").read_bytes() == (trained / "metrics.jsonl").read_bytes()


def test_config_file_and_flag_override(data, trained, tmp_path):
    cfg = tmp_path / "run.txt"
    cfg.write_text((trained / "config.txt").read_text().replace("alpha=0.01", "alpha=0.5"))
    assert main(["train", "--config", str(cfg), "--alpha", "0.01", "--output-dir", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "metrics.jsonl").read_bytes() == (trained / "metrics.jsonl").read_bytes()


def test_alpha_zero_total_is_ce(data, tmp_path):
    assert main(["train", *_run_flags(data), "--alpha", "0", "--output-dir", str(tmp_path)]) == 0
    for line in (tmp_path / "metrics.jsonl").read_text().splitlines():
        r = json.loads(line)
        assert r["total"] == r["ce"]


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "run.txt"
    cfg.write_text("learning_rate=0.1\n")
    assert main(["train", "--config", str(cfg)]) == 2


def test_evaluate_json(data, trained, capsys):
    assert main(["evaluate", str(trained / "checkpoint.npz"), str(data / "target_test.conll")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) >= {"precision", "recall", "micro_f1"}
    assert 0.0 <= report["micro_f1"] <= 1.0


def test_evaluate_checkpoint_not_a_checkpoint(data, capsys):
    path = str(data / "target_test.conll")
    assert main(["evaluate", path, path]) == 2
    assert "checkpoint" in capsys.readouterr().err


def test_evaluate_scheme_mismatch(trained, tmp_path, capsys):
    test = tmp_path / "ner.conll"
    test.write_text("John\tB-PER\nspoke\tO\n\n")
    assert main(["evaluate", str(trained / "checkpoint.npz"), str(test), "--mode", "NER"]) == 2
    assert "tags" in capsys.readouterr().err


def test_diagnose(data, trained, capsys):
    ckpt = str(trained / "checkpoint.npz")
    assert main(["diagnose", ckpt, str(data / "target_unlabeled.conll")]) == 0
    table = capsys.readouterr().out
    assert table.count("Sentence:") == 24 and "I(X;Y)" in table
    assert main(["diagnose", ckpt, str(data / "target_test.conll"), "--labeled", "--format", "jsonl"]) == 0
    rows = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert len(rows) == 12
    for r in rows:
        assert r["mi"] == pytest.approx(r["H_y"] - r["H_y_given_x"])
        assert r["mi"] >= -1e-9


def test_sweep(data, trained, tmp_path, capsys):
    csv_path = tmp_path / "sweep.csv"
    assert main(["sweep", *_run_flags(data), "--parameter", "alpha", "--values", "0,0.01",
                 "--csv", str(csv_path)]) == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "value,absa_f1,ate_f1"
    assert len(lines) == 3
    assert capsys.readouterr().out.splitlines() == lines

    # alpha=0 row equals a plain source-only run
    assert main(["train", *_run_flags(data), "--alpha", "0", "--output-dir", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    assert main(["evaluate", str(tmp_path / "b" / "checkpoint.npz"), str(data / "target_test.conll")]) == 0
    baseline = json.loads(capsys.readouterr().out)["micro_f1"]
    assert float(lines[1].split(",")[1]) == baseline
    # alpha=0.01 row equals the default run in `trained`
    assert main(["evaluate", str(trained / "checkpoint.npz"), str(data / "target_test.conll")]) == 0
    assert float(lines[2].split(",")[1]) == json.loads(capsys.readouterr().out)["micro_f1"]


def test_sweep_rejects_other_parameters(data):
    with pytest.raises(SystemExit):
        main(["sweep", *_run_flags(data), "--parameter", "lr", "--values", "0.1"])


def test_missing_paths_is_config_error(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["train"]) == 2
    assert "required" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())
