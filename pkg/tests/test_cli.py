"""End-to-end tests for the ocnn command line."""
import json
import math
import tempfile
from pathlib import Path

from evaluation.report import load_report
from learners import ocnn
from runner.__main__ import main
from runner.commands import EXIT_CHECK_FAILED, EXIT_DIVERGENCE, EXIT_IO, EXIT_OK, EXIT_VALIDATION
from shared.data import gen_synthetic, pool, save_delimited

FAST = ["--hidden", "4", "--max-iters", "5", "--nu", "0.1", "--label-col", "label"]


def _run(tmp: Path, *argv: str) -> int:
    return main([*argv, "--log-dir", str(tmp / "logs")])


def _synth_train_score(tmp: Path, name: str) -> Path:
    out = tmp / name
    assert _run(tmp, "synth", "--n-normal", "30", "--n-anomalous", "5", "--dim", "6",
                "--seed", "3", "--out", str(out)) == EXIT_OK
    assert _run(tmp, "train", "--in", str(out / "train.csv"), "--out", str(out / "model.toml"), *FAST) == EXIT_OK
    assert _run(tmp, "score", "--model", str(out / "model.toml"), "--in", str(out / "test.csv"),
                "--out", str(out / "scores.csv"), "--label-col", "label") == EXIT_OK
    return out


def test_synth_train_score_is_byte_identical_across_runs():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        a = _synth_train_score(tmp, "a")
        b = _synth_train_score(tmp, "b")
        for name in ("train.csv", "test.csv", "model.toml", "model.history.csv", "scores.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
        lines = (a / "scores.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "raw,decision,predicted,label"
        assert len(lines) == 6


def test_run_record_is_logged():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        _synth_train_score(tmp, "run")
        records = []
        for path in sorted((tmp / "logs").glob("ocnn-*.jsonl")):
            records += [json.loads(l) for l in path.read_text(encoding="utf-8").splitlines()]
    assert [r["command"] for r in records] == ["synth", "train", "score"]
    assert all(r["exit_code"] == EXIT_OK for r in records)
    train = records[1]
    assert len(train["config_digest"]) == 64
    assert len(train["artifacts"]["model.toml"]) == 64


def test_golden_table_exit_codes(capsys):
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        assert _run(tmp, "paper-check") == EXIT_OK
        assert "all rows pass" in capsys.readouterr().out
        assert _run(tmp, "paper-check", "--tol", "1e-6") == EXIT_CHECK_FAILED
        assert "some rows FAIL" in capsys.readouterr().out


def test_validation_and_io_exit_codes(capsys):
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        bad_csv = tmp / "bad.csv"
        bad_csv.write_text("x,y\n1.0,2.0\n3.0,oops\n", encoding="utf-8")
        assert _run(tmp, "train", "--in", str(bad_csv), "--out", str(tmp / "m.toml")) == EXIT_VALIDATION
        assert "oops" in capsys.readouterr().err

        good_csv = tmp / "good.csv"
        good_csv.write_text("x,y\n1.0,2.0\n3.0,4.0\n", encoding="utf-8")
        config = tmp / "run.toml"
        config.write_text('nu = 0.1\nlearning_rate = 0.5\n', encoding="utf-8")
        assert _run(tmp, "train", "--in", str(good_csv), "--out", str(tmp / "m.toml"),
                    "--config", str(config)) == EXIT_VALIDATION
        assert _run(tmp, "train", "--in", str(good_csv), "--out", str(tmp / "m.toml"),
                    "--nu", "1.5") == EXIT_VALIDATION

        assert _run(tmp, "train", "--in", str(tmp / "missing.csv"), "--out", str(tmp / "m.toml")) == EXIT_IO
        assert _run(tmp, "score", "--model", str(tmp / "missing.toml"), "--in", str(good_csv),
                    "--out", str(tmp / "s.csv")) == EXIT_IO
        assert not (tmp / "m.toml").exists()


def test_eval_scores_file_writes_report_and_histogram():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        train_data, test_data = gen_synthetic(n_normal=40, n_anomalous=5, d=6, seed=1)
        save_delimited(train_data, tmp / "train.csv")
        save_delimited(pool(train_data, test_data), tmp / "all.csv")
        assert _run(tmp, "train", "--in", str(tmp / "train.csv"), "--out", str(tmp / "m.toml"),
                    "--method", "kde", "--folds", "3", "--label-col", "label") == EXIT_OK
        assert _run(tmp, "score", "--model", str(tmp / "m.toml"), "--in", str(tmp / "all.csv"),
                    "--out", str(tmp / "scores.csv"), "--label-col", "label") == EXIT_OK
        assert _run(tmp, "eval", "--scores", str(tmp / "scores.csv"), "--method", "kde", "--bins", "5",
                    "--out", str(tmp / "report.toml"), "--histogram", str(tmp / "hist.csv")) == EXIT_OK
        report = load_report(tmp / "report.toml")
        hist_lines = (tmp / "hist.csv").read_text(encoding="utf-8").splitlines()
    assert report.n_normal == 40
    assert report.n_anomalous == 5
    assert report.method == "kde"
    assert report.histogram.total == 45
    assert len(hist_lines) == 6


def test_eval_seeds_on_data_files():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        train_data, test_data = gen_synthetic(n_normal=40, n_anomalous=5, d=6, seed=2)
        save_delimited(train_data, tmp / "train.csv")
        save_delimited(test_data, tmp / "test.csv")
        assert _run(tmp, "eval", "--seeds", "0..2", "--in", str(tmp / "train.csv"), "--test", str(tmp / "test.csv"),
                    "--method", "iforest", "--trees", "10", "--label-col", "label",
                    "--out", str(tmp / "report.toml")) == EXIT_OK
        report = load_report(tmp / "report.toml")
    assert report.seed is None
    assert report.aggregate.seeds == (0, 1, 2)
    assert len(report.aggregate.aucs) == 3


def test_eval_without_inputs_is_a_validation_error():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        assert _run(tmp, "eval", "--out", str(tmp / "r.toml")) == EXIT_VALIDATION
        assert _run(tmp, "eval", "--seeds", "3", "--out", str(tmp / "r.toml")) == EXIT_VALIDATION


def test_eval_seeds_from_run_file():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        train_data, test_data = gen_synthetic(n_normal=40, n_anomalous=5, d=6, seed=4)
        save_delimited(train_data, tmp / "train.csv")
        save_delimited(test_data, tmp / "test.csv")
        config = tmp / "run.toml"
        config.write_text('method = "iforest"\ntrees = 10\nseeds = [3, 5]\nlabel_col = "label"\n', encoding="utf-8")
        assert _run(tmp, "eval", "--config", str(config), "--in", str(tmp / "train.csv"),
                    "--test", str(tmp / "test.csv"), "--out", str(tmp / "report.toml")) == EXIT_OK
        report = load_report(tmp / "report.toml")
    assert report.aggregate.seeds == (3, 5)
    assert report.method == "iforest"


def test_synth_rejects_empty_shapes():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        assert _run(tmp, "synth", "--dim", "0", "--out", str(tmp / "a")) == EXIT_VALIDATION
        assert _run(tmp, "synth", "--n-normal", "0", "--out", str(tmp / "b")) == EXIT_VALIDATION
        assert _run(tmp, "synth", "--kind", "blobs", "--dim", "0", "--out", str(tmp / "c")) == EXIT_VALIDATION
        assert not (tmp / "a" / "train.csv").exists()


def test_eval_rejects_empty_scores_file():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        header_only = tmp / "header.csv"
        header_only.write_text("raw,decision,predicted,label\n", encoding="utf-8")
        empty = tmp / "empty.csv"
        empty.write_text("", encoding="utf-8")
        for path in (header_only, empty):
            assert _run(tmp, "eval", "--scores", str(path), "--out", str(tmp / "r.toml")) == EXIT_VALIDATION
        assert not (tmp / "r.toml").exists()


def test_training_rows_fall_below_r_at_rate_nu():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        out = _synth_train_score(tmp, "run")
        assert _run(tmp, "score", "--model", str(out / "model.toml"), "--in", str(out / "train.csv"),
                    "--out", str(out / "train_scores.csv"), "--label-col", "label") == EXIT_OK
        rows = (out / "train_scores.csv").read_text(encoding="utf-8").splitlines()[1:]
    decisions = [float(row.split(",")[1]) for row in rows]
    assert len(decisions) == 30
    below = sum(d < 0 for d in decisions) / len(decisions)
    assert abs(below - 0.1) <= 1.0 / 30 + 1e-12


def _train_records(tmp: Path) -> list[dict]:
    records = []
    for path in sorted((tmp / "logs").glob("ocnn-*.jsonl")):
        records += [json.loads(l) for l in path.read_text(encoding="utf-8").splitlines()]
    return [r for r in records if r["command"] == "train"]


def test_config_digest_follows_the_config():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        train_data, _ = gen_synthetic(n_normal=20, n_anomalous=2, d=4, seed=0)
        save_delimited(train_data, tmp / "train.csv")
        for nu in ("0.1", "0.1", "0.2"):
            assert _run(tmp, "train", "--in", str(tmp / "train.csv"), "--out", str(tmp / f"m{nu}.toml"),
                        "--hidden", "4", "--max-iters", "2", "--nu", nu, "--label-col", "label") == EXIT_OK
        digests = [r["config_digest"] for r in _train_records(tmp)]
    assert len(digests) == 3
    assert digests[0] == digests[1]
    assert digests[2] != digests[0]


def test_divergence_exit_code_keeps_partial_history(monkeypatch):
    exact = ocnn._batch_grad
    calls = 0

    def blows_up_in_third_iteration(model, X, r, n_total):
        nonlocal calls
        calls += 1
        loss, grad = exact(model, X, r, n_total)
        return (math.inf if calls >= 25 else loss), grad

    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        train_data, _ = gen_synthetic(n_normal=20, n_anomalous=2, d=4, seed=0)
        save_delimited(train_data, tmp / "train.csv")
        monkeypatch.setattr(ocnn, "_batch_grad", blows_up_in_third_iteration)
        code = _run(tmp, "train", "--in", str(tmp / "train.csv"), "--out", str(tmp / "m.toml"),
                    "--hidden", "4", "--max-iters", "5", "--tol", "1e-12", "--label-col", "label")
        history = (tmp / "m.history.csv").read_text(encoding="utf-8").splitlines()
        assert not (tmp / "m.toml").exists()
        records = _train_records(tmp)
    assert code == EXIT_DIVERGENCE
    assert len(history) == 3
    assert records[0]["exit_code"] == EXIT_DIVERGENCE
