import hashlib
import json
import shutil
import subprocess
import sys

import pytest

from chomp.cli import RUN_MANIFEST, VOLATILE_KEYS, main


def run(*argv):
    return main([str(a) for a in argv])


def pipeline(root):
    """synth -> preprocess -> scalogram -> baseline -> train -> eval -> simulate -> report."""
    d, w, s, m = root / "corpus", root / "windows", root / "scalos", root / "models"
    steps = [
        ("synth", "--subjects", 2, "--foods", 1, "--duration", 4, "--units", "imu,pressure",
         "--clock-offset", 0.05, "--seed", 7, "--out", d),
        ("preprocess", "--in", d, "--out", w, "--units", "imu,pressure", "--seed", 7),
        ("scalogram", "--in", w, "--out", s, "--seed", 7),
        ("baseline", "--unit", "pressure", "--protocol", "loso", "--in", w, "--report", root / "rf.json",
         "--n-estimators", 5, "--seed", 7),
        ("train", "--fuse", "imu,pressure", "--protocol", "loso", "--data", s, "--out", m,
         "--max-epochs", 1, "--max-epochs-fusion", 1, "--seed", 7),
        ("eval", "--model", m, "--protocol", "loso", "--report", root / "cnn.json", "--seed", 7),
        ("simulate", "--draws", 300, "--out", root / "sim.json", "--seed", 7),
        ("report", "--in", root / "cnn.json", "--out", root / "cnn_again.txt"),
    ]
    for step in steps:
        assert run(*step) == 0, step


def digest(root):
    out = {}
    for p in sorted(root.rglob("*")):
        if not p.is_file():
            continue
        data = p.read_bytes()
        if p.name.endswith(RUN_MANIFEST):
            m = json.loads(data)
            for k in VOLATILE_KEYS:
                m.pop(k)
            data = json.dumps(m, sort_keys=True).encode()
        out[str(p.relative_to(root))] = hashlib.sha256(data).hexdigest()
    return out


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    pipeline(root)
    return root


def test_smoke_outputs(workdir):
    assert (workdir / "corpus" / "alignment" / "S01").is_dir()
    assert (workdir / "windows" / "windows_index.tsv").exists()
    assert (workdir / "windows" / "windows_imu.bin").exists()
    assert (workdir / "scalos" / "scalograms_pressure.bin").exists()
    assert (workdir / "models" / "fold_S01" / "checkpoint.json").exists()
    rep = json.loads((workdir / "cnn.json").read_text())
    assert set(rep["results"]) == {"fusion"}
    assert (workdir / "cnn.txt").read_text() == (workdir / "cnn_again.txt").read_text()
    sim = json.loads((workdir / "sim.json").read_text())
    assert sim["diagnosis"]["notes"]
    man = json.loads((workdir / "models" / RUN_MANIFEST).read_text())
    assert man["command"] == "train" and set(man["seeds"]) == {"train", "split"}
    assert (workdir / f"rf.{RUN_MANIFEST}").exists()


def test_byte_identical_rerun(workdir):
    first = digest(workdir)
    shutil.rmtree(workdir)
    workdir.mkdir()
    pipeline(workdir)
    assert digest(workdir) == first


def test_seed_changes_outputs(tmp_path):
    args = ("synth", "--subjects", 2, "--foods", 1, "--duration", 3, "--units", "pressure")
    assert run(*args, "--seed", 1, "--out", tmp_path / "a") == 0
    assert run(*args, "--seed", 2, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "S01_apple_left").iterdir()
    names = sorted(p.name for p in a if p.suffix == ".bin")
    assert (tmp_path / "a" / "S01_apple_left" / names[0]).read_bytes() != \
        (tmp_path / "b" / "S01_apple_left" / names[0]).read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert run("synth", "--subjects", 2) == 2  # usage error
    assert run("preprocess", "--in", tmp_path / "missing", "--out", tmp_path / "w") == 1
    assert "FormatError" in capsys.readouterr().err
    assert run("train", "--protocol", "loso", "--data", tmp_path, "--out", tmp_path / "m") == 1
    assert "ConfigError" in capsys.readouterr().err
    assert run("synth", "--subjects", 1, "--foods", 1, "--out", tmp_path / "x") == 1
    assert run("simulate", "--error", 0.9) == 1
    assert run("report", "--in", tmp_path / "nope.json") == 1


def test_simulate_stdout(capsys):
    assert run("simulate", "--draws", 200, "--mu", "0.7", "--durations", "1") == 0
    out = capsys.readouterr().out
    assert "minimal detection duration" in out and "0.70" in out


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "chomp.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("chomp ")
