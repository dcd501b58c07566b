import filecmp
import json

import pytest

from cidp.cli import main
from cidp.core_model import serialize_config


@pytest.fixture
def cfg_file(small_cfg, tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(serialize_config(small_cfg.replace(adversary__mc_trials=2000)))
    return str(p)


def _same_dirs(a, b):
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only
    for name in cmp.common_files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


@pytest.mark.parametrize("argv", [
    ["run", "--mode", "cidp"], ["run", "--mode", "baseline"], ["detect"], ["sltm-design"],
    ["compare", "--reps", "2"],
])
def test_commands_byte_identical(argv, cfg_file, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        code = main(argv + ["--config", cfg_file, "--out", str(out)])
        assert code in (0, 1)
        outs.append(out)
    _same_dirs(*outs)
    assert any(outs[0].iterdir())


def test_run_outputs(cfg_file, tmp_path):
    assert main(["run", "--config", cfg_file, "--mode", "cidp", "--out", str(tmp_path)]) == 0
    led = json.loads((tmp_path / "ledger.json").read_text())
    assert led["mode"] == "cidp"
    first = json.loads((tmp_path / "trace.jsonl").read_text().splitlines()[0])
    assert set(first) == {"slot", "kind", "flow", "node", "payload"}


def test_sltm_design_outputs(cfg_file, tmp_path):
    main(["sltm-design", "--config", cfg_file, "--out", str(tmp_path)])
    d = json.loads((tmp_path / "design.json").read_text())
    assert {"s_relaxed", "eta_star", "schedule", "e_phy_bits", "kkt_residual"} <= set(d)
    header = (tmp_path / "pattern.csv").read_text().splitlines()[0]
    assert header.startswith("theta_deg,subslot_0") and "time_averaged" in header


def test_bound(capsys):
    assert main(["bound", "--tau", "1", "--beta", "0.25", "--lambda", "0.25"]) == 0
    assert float(capsys.readouterr().out) == 0.0


def test_bad_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{}")
    assert main(["run", "--config", str(p), "--mode", "cidp", "--out", str(tmp_path)]) == 2
