import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from rydex import cli
from rydex.errors import IllConditioned
from rydex.params import config_from_dict, config_to_dict, default_config


def run(argv, capsys):
    code = cli.dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _table(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(lines))))


def test_sensitivity(capsys):
    code, out, _ = run(["sensitivity", "--temp", "300", "--config", "cs133_default.json"], capsys)
    assert code == 0
    rows = _table(out)
    assert rows[0] == ["e_i_min_v_per_m_rthz", "e_i_min_v_per_cm_rthz"]
    assert float(rows[1][1]) == pytest.approx(8.38e-10, rel=1e-2)


def test_zeta_small_cell(capsys):
    code, out, _ = run(["zeta", "--ell", "1e-4", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["zeta"] > 0.9999


def test_tf_grid_contract(capsys):
    code, out, _ = run(["tf", "--fmin", "1e2", "--fmax", "1e7", "--points", "512"], capsys)
    assert code == 0
    rows = _table(out)
    assert rows[0][0] == "f_hz"
    f = np.array([float(r[0]) for r in rows[1:]])
    assert f.size == 512 and np.all(np.diff(f) > 0)


def test_unknown_key_exit_2(tmp_path, capsys):
    raw = config_to_dict(default_config())
    raw["atomic"]["gamma2_per_s"] = 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    code, _, err = run(["steady", "--config", str(path)], capsys)
    assert code == 2
    assert "gamma2_per_s" in err


def test_negative_temperature_exit_2(capsys):
    assert run(["zeta", "--temp", "-1"], capsys)[0] == 2


def test_bad_subcommand_exit_2(capsys):
    assert run(["plot"], capsys)[0] == 2


def test_numerical_failure_exit_3(monkeypatch, capsys):
    def boom(cfg, args):
        raise IllConditioned("eigenvector basis too ill-conditioned")
    monkeypatch.setitem(cli.HANDLERS, "pz", boom)
    code, _, err = run(["pz"], capsys)
    assert code == 3
    assert "IllConditioned" in err


def test_outputs_reproducible_and_linked_to_manifest(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["nf-sweep", "--out", str(d)], capsys)[0] == 0
    text_a = (a / "nf_sweep.csv").read_bytes()
    assert text_a == (b / "nf_sweep.csv").read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert text_a.decode().splitlines()[0] == f"# manifest_sha256={manifest['sha256']}"
    summary = json.loads((a / "nf_sweep_summary.json").read_text())
    assert summary["manifest_sha256"] == manifest["sha256"]
    assert len(_table(text_a.decode())) == 51


def test_snapshot_reparses_identically(tmp_path, capsys):
    run(["steady", "--format", "json", "--out", str(tmp_path)], capsys)
    snap = json.loads((tmp_path / "steady.json").read_text())["parameters"]
    cfg = config_from_dict(snap)
    assert cfg.atomic == default_config().atomic


def test_seed_and_temp_recorded(tmp_path, capsys):
    run(["zeta", "--seed", "7", "--temp", "10", "--out", str(tmp_path)], capsys)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["seed"] == 7
    assert m["parameters"]["atomic"]["temperature_k"] == 10.0


@pytest.mark.parametrize("cmd", ["steady", "dcsweep", "gq", "impulse", "pz", "noise"])
def test_subcommands_run(cmd, capsys):
    code, out, _ = run([cmd, "--format", "json"], capsys) if cmd != "dcsweep" else \
        run([cmd, "--points", "20", "--format", "json"], capsys)
    assert code == 0
    assert "manifest_sha256" in json.loads(out)


def test_doppler_tf_small_grid(capsys):
    code, out, _ = run(["doppler-tf", "--points", "4"], capsys)
    assert code == 0
    assert len(_table(out)) == 5


def test_simulate_sc_outputs(tmp_path, capsys):
    code, _, _ = run(["simulate-sc", "--symbols", "40", "--out", str(tmp_path)], capsys)
    assert code == 0
    wave = _table((tmp_path / "waveform.csv").read_text())
    assert wave[0] == ["t_s", "tx_i", "tx_q", "rx_i", "rx_q"]
    cons = _table((tmp_path / "constellation.csv").read_text())
    assert cons[0] == ["sym_index", "tx_re", "tx_im", "rx_re", "rx_im"] and len(cons) == 41
    summary = json.loads((tmp_path / "simulate_sc_summary.json").read_text())
    assert {"evm", "snr_db", "noise"} <= set(summary)


def test_mimo_capacity_csv(capsys):
    code, out, _ = run(["mimo-capacity", "--trials", "5", "--points", "2", "--antennas", "2"], capsys)
    assert code == 0
    rows = _table(out)
    assert rows[0] == ["p_t_dbm", "scheme", "receiver", "mean_capacity", "p5", "p95"]
    assert len(rows) == 1 + 2 * 4


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "rydex.cli", "zeta", "--ell", "1e-4"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "zeta" in res.stdout
