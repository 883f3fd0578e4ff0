import csv
import json

import pytest

from conftest import tiny_config
from noisecnn import cli
from noisecnn.experiment.config import dumps


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(dumps(tiny_config(tmp_path)))
    return path


def test_help(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    assert "preview-noise" in capsys.readouterr().out


def test_synth_writes_manifest(tmp_path, capsys):
    assert cli.main(["synth", "--classes", "2", "--records-per-class", "3", "--length", "128",
                     "--out", str(tmp_path / "d")]) == 0
    with (tmp_path / "d" / "manifest.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["id", "label", "sampling_rate_hz", "path"] and len(rows) == 7


def test_preview_noise(tmp_path, config_file):
    out = tmp_path / "pv"
    code = cli.main(["preview-noise", "--config", str(config_file), "--out", str(out),
                     "--noise", "linear:0.2", "awgn:40", "none"])
    assert code == 0
    with (out / "preview.csv").open(newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["index", "clean", "linear_0.2", "awgn_40", "none"]
    assert (out / "preview.png").read_bytes()[:4] == b"\x89PNG"


def test_preview_from_manifest(tmp_path, config_file):
    cli.main(["synth", "--classes", "2", "--records-per-class", "3", "--length", "128", "--out", str(tmp_path / "d")])
    code = cli.main(["preview-noise", "--config", str(config_file), "--manifest", str(tmp_path / "d" / "manifest.csv"),
                     "--record", "c1_r0002", "--out", str(tmp_path / "pv"), "--no-figures"])
    assert code == 0
    assert (tmp_path / "pv" / "preview.csv").exists()
    assert not (tmp_path / "pv" / "preview.png").exists()
    assert cli.main(["preview-noise", "--manifest", str(tmp_path / "d" / "manifest.csv"), "--record", "zz",
                     "--out", str(tmp_path / "pv2")]) == 2


def test_train_prints_cell(config_file, capsys):
    code = cli.main(["train", "--config", str(config_file), "--noise-kind", "awgn", "--strength", "40"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["noise_kind"] == "AWGN" and doc["strength"] == 40.0
    assert 0 <= doc["macro_f1"] <= 100 and "history" not in doc


def test_train_zero_strength_is_baseline(config_file, capsys):
    cli.main(["train", "--config", str(config_file), "--noise-kind", "linear", "--strength", "0"])
    a = json.loads(capsys.readouterr().out)
    cli.main(["train", "--config", str(config_file)])
    b = json.loads(capsys.readouterr().out)
    assert a["noise_kind"] == b["noise_kind"] == "NONE"
    assert a["macro_f1"] == b["macro_f1"] and a["cell_seed"] == b["cell_seed"]


def test_grid_then_report(tmp_path, config_file):
    out = tmp_path / "g"
    assert cli.main(["grid", "--config", str(config_file), "--out", str(out)]) == 0
    for name in ("table.csv", "curves.csv", "run.json", "curves.png"):
        assert (out / name).exists()
    table = (out / "table.csv").read_bytes()
    re = tmp_path / "re"
    assert cli.main(["report", "--run", str(out / "run.json"), "--out", str(re), "--no-figures"]) == 0
    assert (re / "table.csv").read_bytes() == table
    assert not (re / "curves.png").exists()


def test_grid_from_run_json_reproduces(tmp_path, config_file):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["grid", "--config", str(config_file), "--out", str(a), "--no-figures"])
    cli.main(["grid", "--config", str(a / "run.json"), "--out", str(b), "--no-figures"])
    assert (a / "table.csv").read_bytes() == (b / "table.csv").read_bytes()


@pytest.mark.parametrize("text", [
    "classifiers: [RNN]\n",
    "noise:\n  AWGN: [20, 40]\n",
    "train:\n  epochs: 0\n",
    "- just a list\n",
])
def test_config_errors_exit_2(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    assert cli.main(["grid", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_exit_2(tmp_path):
    assert cli.main(["train", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_bad_noise_spec_exit_2(config_file, tmp_path):
    assert cli.main(["preview-noise", "--config", str(config_file), "--noise", "pink:3",
                     "--out", str(tmp_path / "p")]) == 2


def test_invalid_strength_exit_2(config_file):
    assert cli.main(["train", "--config", str(config_file), "--noise-kind", "awgn", "--strength", "nan"]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_failed_cell_exit_1(config_file):
    # infinite sigma passes validation but training cannot survive it
    assert cli.main(["train", "--config", str(config_file), "--noise-kind", "awgn", "--strength", "inf"]) == 1
