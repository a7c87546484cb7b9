import io
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hcflab import cli
from hcflab.cli import ConfigError, RunConfig, load_config, main, parse_config_text

SMALL = ["N=8", "max_steps=4", "output_interval=0.001", "seed=1"]


def test_parse_types():
    d = parse_config_text("N = 8  # grid\nt_max=0.5\nstop_on_static = no\noutput_interval = none\n")
    assert d == {"N": 8, "t_max": 0.5, "stop_on_static": False, "output_interval": None}


@pytest.mark.parametrize("text", ["bogus = 1", "N = 8\nN = 16", "N 8", "N = eight",
                                  "t_max = nan", "second_torsion = maybe"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize("override", ["N=7", "n=4", "backend=fft", "variant=RF",
                                      "amplitude=1.5", "bandwidth=0", "safety=2",
                                      "snapshot_stride=0", "generator=sphere"])
def test_validation(override):
    with pytest.raises(ConfigError):
        load_config(overrides=[override])


def test_preset_then_file_then_override(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("seed = 11\ncfl = 0.25\n")
    cfg = load_config(str(cfg_file), "stability", ["cfl=0.1"])
    assert (cfg.seed, cfg.cfl, cfg.variant) == (11, 0.1, "HCF_normalized")


def test_unknown_key_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["evolve", str(bad)]) == cli.EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert main(["check", str(tmp_path / "absent.cfg")]) == cli.EXIT_CONFIG


def test_snapshot_roundtrip(tmp_path, g8):
    p = tmp_path / "snap_00000.hcf"
    cli.write_snapshot(p, g8.g, n=2, N=8, t=0.125, step=3, backend="spectral", variant="HCF")
    header, arr = cli.read_snapshot(p)
    assert header["t"] == 0.125 and header["step"] == 3
    assert header["fields"][0]["dtype"] == "complex128-le"
    assert np.array_equal(arr, g8.g)
    assert p.read_bytes().startswith(b"HCFSNAP1\n")


def test_bad_snapshot(tmp_path):
    p = tmp_path / "snap_00000.hcf"
    p.write_bytes(b"nope\n{}\n")
    with pytest.raises(ConfigError):
        cli.read_snapshot(p)


def test_csv_roundtrip(tmp_path):
    row = {k: 0.1 * i for i, k in enumerate(cli.CSV_FIELDS)}
    row["step"] = 7
    cli.write_csv(tmp_path / "d.csv", [row])
    assert cli.read_csv(tmp_path / "d.csv") == [row]


def _evolve(tmp_path, name, extra=()):
    out = tmp_path / name
    overrides = [f"snapshot_dir={out}", f"csv={out}.csv"] + SMALL + list(extra)
    buf = io.StringIO()
    code = cli.cmd_evolve(load_config(overrides=overrides), out=buf)
    return code, out, buf.getvalue()


def test_evolve_is_deterministic(tmp_path):
    code_a, a, text = _evolve(tmp_path, "a")
    code_b, b, _ = _evolve(tmp_path, "b")
    assert code_a == code_b == cli.EXIT_OK
    assert "outcome=max_steps steps=4" in text
    pa, pb = cli.snapshot_paths(a), cli.snapshot_paths(b)
    assert len(pa) == 5
    for x, y in zip(pa, pb):
        assert x.read_bytes() == y.read_bytes()
    assert Path(f"{a}.csv").read_bytes() == Path(f"{b}.csv").read_bytes()
    assert cli.compare_series(a, b) == [(h, 0.0) for h, _ in cli.compare_series(a, a)]


def test_snapshot_stride_keeps_final_state(tmp_path):
    _, a, _ = _evolve(tmp_path, "a", ["snapshot_stride=3", "max_steps=5"])
    steps = [cli.read_snapshot(p)[0]["step"] for p in cli.snapshot_paths(a)]
    assert steps == [0, 3, 5]


def test_compare_detects_differences(tmp_path, capsys):
    _, a, _ = _evolve(tmp_path, "a")
    _, b, _ = _evolve(tmp_path, "b", ["amplitude=0.06"])
    _, c, _ = _evolve(tmp_path, "c", ["max_steps=2"])
    assert main(["compare", str(a), str(b), "--tol", "1e-12"]) == cli.EXIT_TOL
    assert main(["compare", str(a), str(b)]) == cli.EXIT_OK
    assert main(["compare", str(a), str(c)]) == cli.EXIT_CONFIG
    assert "lengths differ" in capsys.readouterr().err


def test_blowup_exit_code(tmp_path):
    assert main(["evolve", "--set", "N=8", "--set", "stop_threshold=1e-3"]) == cli.EXIT_BLOWUP


def test_krf_on_hermitian_data_is_config_error():
    assert main(["evolve", "--set", "N=8", "--set", "variant=KRF"]) == cli.EXIT_CONFIG


def test_check_flat_passes(capsys):
    assert main(["check", "--preset", "flat", "--set", "N=8"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert out.strip().endswith("check passed")
    assert "FAIL" not in out


def test_check_reports_first_failure(capsys):
    code = main(["check", "--set", "N=8", "--set", "seed=1", "--corrupt-q2-sign",
                 "--no-evolution", "--skip", "tformula,bianchi,psform"])
    out = capsys.readouterr().out
    assert code == cli.EXIT_TOL
    assert "check failed: first failing lemma q_trace" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hcflab", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "evolve" in proc.stdout
