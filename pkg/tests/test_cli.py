import json
import os

import numpy as np
import pytest
import yaml

from qkalman.cli import (
    RunConfig,
    emit_config,
    emit_csv,
    main,
    parse_config,
    run_report,
)
from qkalman.errors import ConfigError

CONFIG_PATH = os.path.join(os.path.dirname(__file__), "..", "configs",
                           "worked_example.yaml")

MINI_CONFIG = """
A: [[1.0, -1.0], [1.0, 1.0]]
B: [[1.0], [1.0]]
H: [[2.0, 0.0], [0.0, 1.0]]
Q: [[1.0, 0.0], [0.0, 1.0]]
R: [[1.0, 0.0], [0.0, 1.0]]
x0: [2.0, 1.0]
P0: [[1.0, 0.0], [0.0, 1.0]]
controls: [[1.0]]
measurements: [[1.0, 1.0]]
steps: 0
"""


def mini_config(**overrides):
    doc = yaml.safe_load(MINI_CONFIG)
    doc.update(overrides)
    return yaml.safe_dump(doc, sort_keys=False)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_parse_bundled_config():
    with open(CONFIG_PATH) as fh:
        config = parse_config(fh.read())
    np.testing.assert_array_equal(config.A, [[1.0, -1.0], [1.0, 1.0]])
    np.testing.assert_array_equal(config.H, [[2.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(config.x0, [2.0, 1.0])
    assert config.steps == 1
    assert config.readout_mode == "exact"
    assert config.kappa == 3.5
    assert config.kappa_policy.resolve(1.0) == 3.5
    assert config.model.state_dim == 2


def test_config_round_trip():
    with open(CONFIG_PATH) as fh:
        config = parse_config(fh.read())
    again = parse_config(emit_config(config))
    assert again == config


def test_parse_rejects_bad_documents():
    with pytest.raises(ConfigError, match="A"):
        parse_config("")
    with pytest.raises(ConfigError, match="steps"):
        parse_config(mini_config(steps="three"))
    with pytest.raises(ConfigError, match="surprise"):
        parse_config(mini_config(surprise=1))
    with pytest.raises(ConfigError, match="readout_mode"):
        parse_config(mini_config(readout_mode="telepathy"))
    with pytest.raises(ConfigError, match="shots"):
        parse_config(mini_config(readout_mode="sampled", shots=-5))
    with pytest.raises(ConfigError, match="eps_prime"):
        parse_config(mini_config(eps_prime=0.0))
    with pytest.raises(ConfigError, match="kappa"):
        parse_config(mini_config(kappa=1.0))
    with pytest.raises(ConfigError, match="kappa_margin"):
        parse_config(mini_config(kappa_margin=0.5))
    with pytest.raises(ConfigError, match="not valid YAML"):
        parse_config("A: [[1.0")


def test_parse_rejects_mismatched_shapes():
    from qkalman.errors import DimensionError
    with pytest.raises(DimensionError, match="B"):
        parse_config(mini_config(B=[[1.0], [1.0], [1.0]]))
    with pytest.raises(DimensionError, match="x0"):
        parse_config(mini_config(x0=[1.0, 2.0, 3.0]))


def test_seed_falls_back_to_environment(monkeypatch):
    monkeypatch.setenv("QKALMAN_SEED", "99")
    config = parse_config(mini_config())
    assert config.seed == 99
    monkeypatch.delenv("QKALMAN_SEED")
    assert parse_config(mini_config()).seed == 0
    config = parse_config(mini_config(seed=7))
    assert config.seed == 7


# ---------------------------------------------------------------------------
# reports and CSV export
# ---------------------------------------------------------------------------

def test_zero_step_report_shape():
    report = run_report(parse_config(mini_config()))
    assert report["steps"][0]["step"] == 0
    np.testing.assert_allclose(report["steps"][0]["x_hat_q"], [2.0, 1.0])
    assert report["ledger"] == []
    text = emit_csv(report, "trajectory")
    lines = text.strip().splitlines()
    assert lines[0].startswith("step,x_hat_q[0]")
    assert len(lines) == 2


def test_emit_csv_rejects_unknown_kind():
    report = run_report(parse_config(mini_config()))
    with pytest.raises(ConfigError):
        emit_csv(report, "interpretive_dance")
    with pytest.raises(ConfigError, match="sampled"):
        emit_csv(report, "histogram")


def test_run_command_writes_csvs(tmp_path, capsys):
    config_path = tmp_path / "run.yaml"
    config_path.write_text(mini_config(steps=1, kappa=3.5,
                                       readout_mode="sampled",
                                       shots=16384, iterations=50, seed=5))
    csv_dir = tmp_path / "out"
    code = main(["run", str(config_path), "--csv-dir", str(csv_dir)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["readout_mode"] == "sampled"
    assert len(report["ledger"]) == 17
    assert "1" in report["qsvt"] or 1 in report["qsvt"]
    traj = (csv_dir / "trajectory.csv").read_text().strip().splitlines()
    assert len(traj) == 3  # header + initial + one step
    ledger = (csv_dir / "ledger.csv").read_text().strip().splitlines()
    assert len(ledger) == 18
    hist = (csv_dir / "histogram.csv").read_text().strip().splitlines()
    assert hist[0] == "basis_index,count"
    total = sum(int(line.split(",")[1]) for line in hist[1:])
    assert total == 16384 * 50
    # sampled estimates still land near the classical answer
    step = report["steps"][1]
    np.testing.assert_allclose(step["x_hat_q"], step["x_hat_c"], atol=0.2)


def test_run_command_missing_config_is_a_config_error(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 2


def test_run_command_singular_model_exit_code(tmp_path):
    config_path = tmp_path / "bad.yaml"
    config_path.write_text(mini_config(
        steps=1, H=[[0.0, 0.0], [0.0, 0.0]],
        R=[[0.0, 0.0], [0.0, 0.0]], Q=[[0.0, 0.0], [0.0, 0.0]]))
    assert main(["run", str(config_path)]) == 5


def test_run_command_dimension_exit_code(tmp_path):
    config_path = tmp_path / "bad.yaml"
    config_path.write_text(mini_config(B=[[1.0], [1.0], [1.0]]))
    assert main(["run", str(config_path)]) == 3


# ---------------------------------------------------------------------------
# the other subcommands
# ---------------------------------------------------------------------------

def test_encode_command(tmp_path, capsys):
    path = tmp_path / "m.csv"
    np.savetxt(path, [[1.0, -1.0], [1.0, 1.0]], delimiter=",")
    assert main(["encode", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["alpha"] == pytest.approx(2.0)
    assert out["ancillas"] == 1
    np.testing.assert_allclose(out["decoded_block_re"],
                               [[1.0, -1.0], [1.0, 1.0]], atol=1e-9)
    np.testing.assert_allclose(out["decoded_block_im"], 0.0, atol=1e-12)


def test_encode_command_complex_pairs(tmp_path, capsys):
    path = tmp_path / "m.csv"
    # columns are re,im pairs: [[1+2j, 0], [0, 1-1j]]
    np.savetxt(path, [[1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]],
               delimiter=",")
    assert main(["encode", str(path), "--complex"]) == 0
    out = json.loads(capsys.readouterr().out)
    got = np.array(out["decoded_block_re"]) + 1j * np.array(out["decoded_block_im"])
    np.testing.assert_allclose(got, [[1 + 2j, 0], [0, 1 - 1j]], atol=1e-9)


def test_encode_command_bad_file(tmp_path):
    assert main(["encode", str(tmp_path / "missing.csv")]) == 2
    path = tmp_path / "text.csv"
    path.write_text("not,a\nnumber,grid\n")
    assert main(["encode", str(path)]) == 2


def test_invert_command(tmp_path, capsys):
    path = tmp_path / "m.csv"
    np.savetxt(path, np.diag([13.0, 4.0]), delimiter=",")
    assert main(["invert", str(path), "--kappa", "3.5", "--eps", "0.01"]) == 0
    out = json.loads(capsys.readouterr().out)
    got = np.array(out["inverse_re"])
    np.testing.assert_allclose(got, np.diag([1 / 13, 1 / 4]), atol=1e-2)
    assert out["eps"] >= abs(got[0, 0] - 1 / 13)


def test_angles_command(tmp_path, capsys):
    out_path = tmp_path / "angles.txt"
    code = main(["angles", "--kappa", "3.5", "--eps", "0.01",
                 "--out", str(out_path)])
    assert code == 0
    err = capsys.readouterr().err
    assert "degree 57" in err
    values = [float(line) for line in out_path.read_text().strip().splitlines()]
    assert len(values) == 58
    assert all(np.isfinite(values))


def test_run_config_equality_uses_array_contents():
    a = parse_config(mini_config())
    b = parse_config(mini_config())
    assert a == b
    c = parse_config(mini_config(x0=[2.0, 1.5]))
    assert a != c
    assert a != "not a config"
    assert isinstance(a, RunConfig)
