import hashlib
import json
import shutil
import subprocess
import sys

import pytest

from jumplab.cli import REPORT_NEEDS, main


def _digest_tree(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def _manifest(path):
    man = json.loads(path.read_text())
    man.pop("timing")
    return man


@pytest.fixture(scope="module")
def returns_run(tmp_path_factory):
    run = tmp_path_factory.mktemp("run")
    assert main(["synth", "--scenario", "returns", "--seed", "5", "--n-stocks", "30", "--n-days", "30",
                 "--n-trades", "2000", "--out", str(run)]) == 0
    assert main(["ingest", "--config", str(run / "run.ini")]) == 0
    return run


def test_detect_jumps_tail_matches_truth(returns_run):
    assert main(["detect-jumps", "--config", str(returns_run / "run.ini")]) == 0
    res = json.loads((returns_run / "jumps.json").read_text())
    truth = json.loads((returns_run / "truth.json").read_text())
    alpha = truth["truth"]["returns"]["tail_alpha"]
    tail = res["tail"]
    assert abs(tail["exponent"] - alpha) < 2 * tail["stderr"], tail
    assert res["n_jumps"] > 1000
    header = (returns_run / "jumps.csv").read_text().splitlines()[0]
    assert header == "ticker,date,time,score,sign"


def test_rerun_is_byte_identical(returns_run, tmp_path):
    other = tmp_path / "again"
    shutil.copytree(returns_run, other)
    for d in (returns_run, other):
        assert main(["detect-jumps", "--config", str(d / "run.ini")]) == 0
    for name in ("jumps.csv", "jump_ccdf.csv", "jumps.json"):
        assert (returns_run / name).read_bytes() == (other / name).read_bytes()
    assert _manifest(returns_run / "manifests/detect-jumps.json") == _manifest(other / "manifests/detect-jumps.json")


def test_synth_is_deterministic(tmp_path):
    args = ["synth", "--seed", "3", "--n-stocks", "4", "--n-days", "2", "--n-trades", "500"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = _digest_tree(tmp_path / "a"), _digest_tree(tmp_path / "b")
    a.pop("manifests/synth.json")
    b.pop("manifests/synth.json")
    assert a == b
    assert _manifest(tmp_path / "a/manifests/synth.json") == _manifest(tmp_path / "b/manifests/synth.json")


def test_ingest_does_not_touch_inputs(returns_run):
    before = _digest_tree(returns_run / "data")
    assert main(["ingest", "--config", str(returns_run / "run.ini")]) == 0
    assert _digest_tree(returns_run / "data") == before
    man = json.loads((returns_run / "manifests/ingest.json").read_text())
    assert man["inputs"]["bars"]["sha256"] == before["bars.csv"]


def test_report_without_artifacts_exits_2(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    for name in REPORT_NEEDS:
        assert name in err


def test_missing_input_exits_1_with_path(tmp_path, capsys):
    missing = tmp_path / "nowhere" / "bars.csv"
    assert main(["ingest", "--bars", str(missing), "--out", str(tmp_path)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path, capsys):
    assert main(["ingest", "--config", str(tmp_path / "run.ini")]) == 1
    assert "run.ini" in capsys.readouterr().err


@pytest.mark.parametrize("flag,value,name", [
    ("--s", "0.5", "s"),
    ("--window-policy", "centered", "window_policy"),
    ("--tail-fraction", "abc", "tail_fraction"),
])
def test_bad_parameter_exits_1_naming_it(tmp_path, capsys, flag, value, name):
    assert main(["detect-jumps", flag, value, "--out", str(tmp_path)]) == 1
    assert f"parameter {name}" in capsys.readouterr().err


def test_unknown_config_key_exits_1(tmp_path, capsys):
    (tmp_path / "run.ini").write_text("[detect-jumps]\nthreshold = 4\n")
    assert main(["detect-jumps", "--config", str(tmp_path / "run.ini")]) == 1
    assert "threshold" in capsys.readouterr().err


def test_flags_override_config(returns_run, tmp_path):
    shutil.copytree(returns_run, tmp_path / "r")
    ini = tmp_path / "r" / "run.ini"
    text = ini.read_text().replace("s = 4.0", "s = 5.0")
    ini.write_text(text)
    assert main(["detect-jumps", "--config", str(ini)]) == 0
    man = json.loads((tmp_path / "r/manifests/detect-jumps.json").read_text())
    assert man["parameters"]["s"] == 5.0
    assert main(["detect-jumps", "--config", str(ini), "--s", "6"]) == 0
    man = json.loads((tmp_path / "r/manifests/detect-jumps.json").read_text())
    assert man["parameters"]["s"] == 6.0
    assert json.loads((tmp_path / "r/jumps.json").read_text())["s"] == 6.0


def test_detect_before_ingest_is_input_error(tmp_path, capsys):
    assert main(["detect-jumps", "--out", str(tmp_path)]) == 1
    assert "panel" in capsys.readouterr().err


def test_help_lists_every_command():
    out = subprocess.run([sys.executable, "-m", "jumplab.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("synth", "ingest", "detect-jumps", "event-study", "collective", "taildep", "report"):
        assert cmd in out.stdout
    sub = subprocess.run([sys.executable, "-m", "jumplab.cli", "detect-jumps", "--help"],
                         capture_output=True, text=True)
    assert "--s-high" in sub.stdout and "JUMPLAB_THREADS" not in sub.stderr


def test_news_gap_thins_significant_news(tmp_path):
    run = tmp_path / "d"
    assert main(["synth", "--seed", "2", "--n-stocks", "10", "--n-days", "10", "--n-trades", "500",
                 "--out", str(run)]) == 0
    ini = str(run / "run.ini")
    for cmd in ("ingest", "detect-jumps"):
        assert main([cmd, "--config", ini]) == 0
    counts = []
    for gap in ("0", "60"):
        main(["event-study", "--config", ini, "--news-min-gap", gap])
        res = json.loads((run / "event_study.json").read_text())
        counts.append(res["n_significant_news"])
        assert res["n_news"] >= counts[-1]
    assert counts[0] == res["n_news"] > counts[1] > 0
