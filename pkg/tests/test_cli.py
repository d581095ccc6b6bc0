import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from brafl.cli import main
from brafl.config import KEYS, ConfigError, parse_config, parse_experiment, with_overrides
from brafl.experiment import run_experiment, sweep

QUICK = """
dataset = synthetic
dataset.classes = 4
dataset.dims = 6
dataset.train_per_class = 40
dataset.test_per_class = 40
partition.clients = 8
training.local_epochs = 2
rounds = 10
output.window = 5
"""


def test_minimal_config_defaults():
    cfg = parse_config("aggregator = bra\ndataset = synthetic\nrounds = 10\n")
    assert cfg.partition.num_clients == 20
    assert cfg.partition.alpha == 1.0
    assert cfg.training.learning_rate == 0.01
    assert cfg.rounds == 10 and cfg.attack is None


@pytest.mark.parametrize("text, key, fragment", [
    ("aggregator = trimmed_mean\n", "aggregator.beta", "beta required"),
    ("attack = sign_flip\nadversary.fraction = 0.6\n", "adversary.fraction", "requires M < K/2"),
    ("rounds = 0\n", "rounds", ""),
    ("bogus.key = 1\n", "bogus.key", "unknown"),
    ("rounds = ten\n", "rounds", ""),
    ("adversary.fraction = 0.2\n", "attack", ""),
])
def test_config_errors(text, key, fragment):
    with pytest.raises(ConfigError, match=fragment or None) as info:
        parse_config(text)
    assert info.value.key == key


def test_every_key_has_a_default_entry():
    text = "".join(f"{k} = {v}\n" for k, (_, v) in KEYS.items() if v is not None and not k.startswith("dataset."))
    assert parse_experiment(text).run.rounds == 30


def test_with_overrides():
    text = with_overrides("rounds = 3\n", adversary__fraction=0.1, attack="sign_flip")
    cfg = parse_config(text)
    assert cfg.rounds == 3 and len(cfg.schedule.malicious_ids) == 2


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_outputs_and_determinism(tmp_path):
    text = QUICK + "attack = sign_flip\nadversary.fraction = 0.25\nadversary.mode = dynamic\n"
    m1 = run_experiment(text, tmp_path / "a")
    m2 = run_experiment(text, tmp_path / "b")
    assert m1.hashes() == m2.hashes()
    assert (tmp_path / "a/manifest.json").read_bytes() == (tmp_path / "b/manifest.json").read_bytes()
    rows = _rows(tmp_path / "a/metrics.csv")
    assert rows[0] == ["round", "acc", "asr", "epsilon_hat"] + [f"pi_{k}" for k in range(8)] + ["malicious_actual"]
    assert len(rows) == 11 and all(r[2] == "" for r in rows[1:])
    svg = (tmp_path / "a/heatmap.svg").read_text()
    assert svg.count("<rect") == 10 * 8 and "color scale" in svg
    assert set(m1.hashes()) == {"metrics.csv", "summary.json", "heatmap.svg"}


def test_run_without_bra_has_no_heatmap(tmp_path):
    run_experiment(QUICK + "aggregator = median\neval_every = 5\n", tmp_path)
    assert not (tmp_path / "heatmap.svg").exists()
    rows = _rows(tmp_path / "metrics.csv")
    assert len(rows) == 3 and rows[1][4] == ""


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="twice"):
        parse_config("rounds = 2\nrounds = 3\n")


def test_sweep_summary(tmp_path):
    sweep(QUICK + "attack = sign_flip\n", [0.0], tmp_path / "one")
    summary = json.loads((tmp_path / "one/eps_0.00/summary.json").read_text())
    rows = _rows(tmp_path / "one/summary.csv")
    assert rows[0] == ["epsilon", "acc", "epsilon_hat"]
    assert float(rows[1][1]) == summary["acc_window_mean"]

    sweep(QUICK + "attack = backdoor\nattack.target_class = 3\n", [0.0, 0.25], tmp_path / "bd")
    rows = _rows(tmp_path / "bd/summary.csv")
    assert rows[0] == ["epsilon", "acc", "asr", "epsilon_hat"]
    assert rows[1][2] == "" and rows[2][2] != ""
    with pytest.raises(ValueError):
        sweep(QUICK, [0.5], tmp_path / "bad")


@pytest.mark.slow
def test_sweep_flat_accuracy_on_blobs(tmp_path):
    sweep("attack = sign_flip\nrounds = 30\n", [0, 0.1, 0.2, 0.3, 0.4], tmp_path, jobs=2)
    acc = [float(r[1]) for r in _rows(tmp_path / "summary.csv")[1:]]
    assert len(acc) == 5
    assert acc[0] - min(acc) <= 0.03


def test_cli_run_uses_env_dir(tmp_path, monkeypatch, capsys):
    conf = tmp_path / "quick.conf"
    conf.write_text(QUICK.replace("rounds = 10", "rounds = 2"))
    monkeypatch.setenv("BRAFL_OUTPUT_DIR", str(tmp_path / "out"))
    assert main(["run", str(conf)]) == 0
    assert (tmp_path / "out/quick/metrics.csv").exists()
    assert "acc_window_mean" in capsys.readouterr().out


def test_cli_errors_are_machine_readable(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("aggregator = trimmed_mean\n")
    proc = subprocess.run([sys.executable, "-m", "brafl", "run", str(conf), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    line = proc.stderr.strip().splitlines()[-1]
    assert line.startswith("error: ")
    payload = json.loads(line[len("error: "):])
    assert payload["key"] == "aggregator.beta"
    missing = subprocess.run([sys.executable, "-m", "brafl", "run", str(tmp_path / "nope.conf")],
                             capture_output=True, text=True)
    assert missing.returncode != 0 and missing.stderr.startswith("error: ")


def test_cli_oracle_check_and_selftest(tmp_path, capsys):
    conf = tmp_path / "oracle.conf"
    conf.write_text("oracle.instances = 20\noracle.k_max = 8\n")
    assert main(["oracle-check", str(conf)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS exact-subset certificate: 20/20")
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_shipped_configs_parse():
    for path in Path(__file__).resolve().parents[1].joinpath("configs").glob("*.conf"):
        parse_experiment(path.read_text())
