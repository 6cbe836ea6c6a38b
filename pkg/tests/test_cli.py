import json
import subprocess
import sys

import numpy as np
import pytest

from qlock.cli import main


def read(path):
    return path.read_bytes()


def keygen(tmp_path, n=4, seed=7, name="lock"):
    out = tmp_path / name
    assert main(["keygen", str(n), "--seed", str(seed), "--out", str(out)]) == 0
    return out


def test_keygen_outputs(tmp_path):
    out = keygen(tmp_path)
    key = json.loads((out / "key.json").read_text())
    assert len(key["pairs"]) == 2
    assert key["meta"]["seed"] == 7 and key["meta"]["version"]
    state = json.loads((out / "state.json").read_text())
    amps = np.array(state["amplitudes"])
    assert np.count_nonzero(np.abs(amps[:, 0]) + np.abs(amps[:, 1]) > 1e-14) == 4


def test_keygen_deterministic(tmp_path):
    a, b = keygen(tmp_path, 6, 3, "a"), keygen(tmp_path, 6, 3, "b")
    for name in ["key.json", "lock.json", "state.json"]:
        assert read(a / name) == read(b / name)


def test_keygen_odd_is_input_error(tmp_path, capsys):
    assert main(["keygen", "3", "--seed", "1", "--out", str(tmp_path)]) == 2
    assert "even" in capsys.readouterr().err


def test_missing_seed_is_generated_and_printed(tmp_path, capsys):
    assert main(["keygen", "4", "--out", str(tmp_path)]) == 0
    err = capsys.readouterr().err
    seed = int(err.split("seed: ")[1].split()[0])
    assert json.loads((tmp_path / "key.json").read_text())["meta"]["seed"] == seed


def verify_args(lock_dir, password, *extra):
    return ["verify", "--lock", str(lock_dir / "lock.json"), "--password", str(password), "--seed", "5", "--out", str(lock_dir), *extra]


def test_verify_exit_codes(tmp_path, capsys):
    out = keygen(tmp_path)
    assert main(verify_args(out, out / "key.json")) == 0
    key = json.loads((out / "key.json").read_text())
    (a, b), (c, d) = key["pairs"]
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"n_atoms": 4, "pairs": [[a, c], [b, d]]}))
    capsys.readouterr()
    assert main(verify_args(out, wrong)) == 1
    assert "reject at pair 0" in capsys.readouterr().out
    transcript = json.loads((out / "transcript.json").read_text())
    assert transcript["decision"] == "reject" and transcript["rejecting_pair"] == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_atoms": 6, "pairs": [[0, 1], [2, 3], [4, 5]]}))
    assert main(verify_args(out, bad)) == 2
    assert main(verify_args(out, tmp_path / "missing.json")) == 2
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json")
    assert main(verify_args(out, garbage)) == 2


def test_verify_exact_mode_and_flags(tmp_path):
    out = keygen(tmp_path)
    assert main(verify_args(out, out / "key.json", "--mode", "exact")) == 0
    assert main(verify_args(out, out / "key.json", "--eta2", "0")) == 1
    assert main(verify_args(out, out / "key.json", "--eta1", "2")) == 2


def test_prep_sweep(tmp_path):
    args = ["prep-sweep", "--ds", "0:0.002:3", "--dg", "0,0.001,0.002", "--samples", "500", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    text = (tmp_path / "a" / "prep_sweep.csv").read_text()
    assert text == (tmp_path / "b" / "prep_sweep.csv").read_text()
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    assert len(lines) == 1 + 9
    first = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert float(first["ds"]) == 0 and float(first["dg"]) == 0 and float(first["yield"]) == 0
    assert main(["prep-sweep", "--ds", "", "--seed", "1", "--out", str(tmp_path)]) == 2


def test_analyze(tmp_path, capsys):
    assert main(["analyze", "--n", "24", "--trials", "50", "--seed", "1", "--out", str(tmp_path / "r")]) == 0
    out = capsys.readouterr().out
    assert "meets 1e-8 target: true" in out
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["matchings_count"] == 316_234_143_225
    assert report["guess_probability"] == pytest.approx(3.162e-12, rel=1e-3)
    assert main(["analyze", "--n", "4", "--trials", "0", "--seed", "1", "--out", str(tmp_path)]) == 2


def test_analyze_ideal_far_zero(tmp_path):
    assert main(["analyze", "--n", "4", "--trials", "10000", "--seed", "2", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["grid"][0]["far"] == 0


def test_analyze_threads_byte_identical(tmp_path):
    base = ["analyze", "--n", "6", "--trials", "5000", "--seed", "8", "--eta2", "0.5,1", "--epsilon", "0,0.05"]
    assert main(base + ["--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(base + ["--out", str(tmp_path / "b"), "--threads", "4"]) == 0
    for name in ["report.json", "grid.csv"]:
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)


def test_spectrum(tmp_path, capsys):
    assert main(["spectrum", "--n", "1", "--sector", "1", "--out", str(tmp_path)]) == 0
    values = [float(x) for x in capsys.readouterr().out.split()]
    g = np.sqrt(1.0) * np.sin(np.pi / 2)
    assert values == pytest.approx([1 - g, 1 + g])
    assert main(["spectrum", "--n", "2", "--sector", "9"]) == 2


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qlock.cli", "keygen", "5", "--seed", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
