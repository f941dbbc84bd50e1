import json

import pytest

from rege_bench.cli import run
from rege_bench.emola.config import ToyConfig
from rege_bench.records import SampleRecord, write_records

EMOLA_AU = [72.8, 37.3, 79.9, 67.3, 69.9, 41.7, 63.6, 56.8, 55.6, 73.4, 56.8, 0.0]
AUS = (1, 2, 4, 5, 6, 10, 12, 17, 24, 25, 26, 43)


@pytest.fixture(autouse=True)
def _quiet(monkeypatch):
    monkeypatch.setenv("REGE_BENCH_NO_COLOR", "1")
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["score", "--help"])
    assert exc.value.code == 0
    assert "--refs" in capsys.readouterr().out


def test_unknown_flag_is_usage_error(capsys):
    assert run(["score", "--bogus"]) == 2
    assert _error(capsys)["error"] == "usage"


def test_missing_file(tmp_path, capsys):
    code = run(["score", "--task", "au", "--refs", str(tmp_path / "nope"), "--hyps", "x", "--out", "o.json"])
    assert code == 3 and _error(capsys)["exit_code"] == 3


def test_invalid_records(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{oops\n")
    assert run(["extract", "--task", "au", "--records", str(bad), "--out", str(tmp_path / "o")]) == 4
    assert "line 1" in _error(capsys)["message"]


def test_score_self_is_200(tmp_path, record_files, capsys):
    out = tmp_path / "s.json"
    assert run(["score", "--task", "emotion", "--refs", str(record_files["emotion"]),
                "--hyps", str(record_files["emotion"]), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["report"]["reported"]["s_rege"] == 200.0
    assert data["manifest"]["inputs"]["<default lexicon>"]
    assert "S_rege 200.0" in capsys.readouterr().out


def test_score_missing_hypothesis(tmp_path, capsys):
    refs = tmp_path / "r.jsonl"
    hyps = tmp_path / "h.jsonl"
    write_records([SampleRecord("a", "au", "q", "AU1 is active")], refs)
    write_records([SampleRecord("b", "au", "q", "AU2 is active")], hyps)
    assert run(["score", "--task", "au", "--refs", str(refs), "--hyps", str(hyps), "--out", str(tmp_path / "o")]) == 4
    assert "'a'" in _error(capsys)["message"]


def test_extract_writes_traces(tmp_path):
    recs = tmp_path / "r.jsonl"
    write_records([SampleRecord("a", "au", "q", "AU12 (lip corner puller). No AU4."),
                   SampleRecord("b", "au", "q", "Raised inner brows.")], recs)
    out = tmp_path / "e.jsonl"
    assert run(["extract", "--task", "au", "--records", str(recs), "--out", str(out)]) == 0
    lines = [json.loads(x) for x in out.read_text().splitlines()]
    assert "manifest" in lines[0]
    assert [x["label"] for x in lines[1:]] == [[12], [1]]
    assert lines[1]["trace"]["sentences_dropped_as_negated"] == ["No AU4"]


def test_toy_train_zero_steps(tmp_path):
    out = tmp_path / "run.json"
    assert run(["toy-train", "--steps", "0", "--n-train", "8", "--n-test", "8", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["losses"] == [] and "final" not in data["audits"]
    assert set(data["audits"]["init"]["adapter_ranks"].values()) == {0}
    assert data["manifest"]["subcommand"] == "toy-train"


def test_toy_train_with_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"model_dim": 32, "lora_rank": 4}, "train": {"batch_size": 4}}))
    out = tmp_path / "run.json"
    assert run(["toy-train", "--config", str(cfg), "--steps", "3", "--n-train", "16", "--n-test", "8",
                "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["model"]["model_dim"] == 32 and len(data["losses"]) == 3
    assert data["frozen_unchanged"] is True
    assert all(r <= 4 for r in data["audits"]["final"]["adapter_ranks"].values())


def test_toy_train_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"n_heads": 3}}))
    assert run(["toy-train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_toy_train_numerical_failure(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {"lr": 1e308, "batch_size": 4}}))
    code = run(["toy-train", "--config", str(cfg), "--steps", "3", "--n-train", "8", "--n-test", "8",
                "--out", str(tmp_path / "o")])
    assert code == 5 and _error(capsys)["error"] == "numerical"


def _score_file(path, task, s_re, s_ge, per_au=None):
    report = {"task": task, "s_re": s_re, "s_ge": s_ge, "per_au_f1": per_au or {}}
    path.write_text(json.dumps({"kind": "score", "report": report}))
    return str(path)


def test_report_emola_shaped_row(tmp_path, capsys):
    per_au = {str(a): v / 100 for a, v in zip(AUS, EMOLA_AU)}
    f = _score_file(tmp_path / "EmoLA.json", "au", 0.563, 0.352, per_au)
    out = tmp_path / "table.json"
    assert run(["report", f, "--out", str(out)]) == 0
    row = json.loads(out.read_text())["rows"][0]
    assert (row["S_re"], row["S_ge"], row["S_rege"]) == (56.3, 35.2, 91.5)
    text = capsys.readouterr().out
    assert "EmoLA" in text and "91.5" in text and "\033[" not in text


def test_report_one_row_and_errors(tmp_path, capsys):
    a = _score_file(tmp_path / "a.json", "emotion", 0.645, 0.317)
    b = _score_file(tmp_path / "b.json", "au", 0.5, 0.3)
    assert run(["report", a]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and lines[1].split()[-1] == "96.2"
    assert run(["report", a, b]) == 4
    assert run(["report"]) == 2


def test_toy_config_defaults_echoed(tmp_path):
    out = tmp_path / "run.json"
    run(["toy-train", "--steps", "0", "--seed", "7", "--n-train", "4", "--n-test", "4", "--out", str(out)])
    data = json.loads(out.read_text())
    assert data["model"] == ToyConfig(seed=7).to_dict()
    assert data["train"]["seed"] == 7 and data["task_spec"]["seed"] == 7
