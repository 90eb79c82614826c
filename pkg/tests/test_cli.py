import json

import pytest

from superholder import __version__
from superholder.cli import main, parse_config, run
from superholder.config import ExperimentConfig, build_config, read_config_file
from superholder.errors import ConfigParseError, ConfigurationError


@pytest.fixture
def config_file(tmp_path):
    def write(text):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        return path
    return write


def test_empty_file_plus_flags(config_file):
    path = config_file("")
    cfg = parse_config(["kernel-table", "--config", str(path), "--alpha", "2", "--seed", "1"])
    assert cfg == ExperimentConfig("kernel-table", 1, alpha=2.0)


def test_precedence_flags_over_file(config_file):
    path = config_file("experiment = compensator\nseed = 7\nalpha = 1.7  # comment\nreplicates = 50\n")
    cfg = parse_config(["--config", str(path), "--alpha", "1.9"])
    assert (cfg.experiment, cfg.seed, cfg.alpha, cfg.replicates) == ("compensator", 7, 1.9, 50)
    assert cfg.beta == 0.5


@pytest.mark.parametrize("text, match", [
    ("experiment = dichotomy\nseed = 1\ncolour = red\n", "unknown key 'colour'"),
    ("experiment = dichotomy\nseed = one\n", "key 'seed' expects int"),
    ("experiment = dichotomy\nseed 1\n", "expected key=value"),
    ("experiment = dichotomy\n", "missing required field"),
    ("experiment = plot\nseed = 1\n", "unknown experiment"),
    ("experiment = dichotomy\nseed = 1\nbeta = 1.5\n", "beta must be in \\(0,1\\)"),
])
def test_parse_errors_name_the_key(config_file, text, match):
    with pytest.raises(ConfigParseError, match=match):
        build_config(read_config_file(config_file(text)))


def test_missing_file():
    with pytest.raises(ConfigParseError, match="not found"):
        read_config_file("/nonexistent/run.cfg")


def test_regime_gate_exit_status(tmp_path, capsys):
    code = main(["exponents", "--alpha", "1.4", "--beta", "0.5", "--seed", "1", "--out", str(tmp_path / "x")])
    assert code == 2
    assert "requires α > 1+β" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()
    with pytest.raises(ConfigurationError):
        build_config({"experiment": "exponents", "seed": 1, "alpha": 1.4}).validate()


def test_beta_rejected_from_flags(capsys):
    assert main(["dichotomy", "--beta", "1.5", "--seed", "1"]) == 2
    assert "beta must be in (0,1)" in capsys.readouterr().err


def test_kernel_table_gaussian(tmp_path):
    out = tmp_path / "k"
    assert main(["kernel-table", "--alpha", "2", "--seed", "3", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["version"] == __version__ and manifest["config"]["alpha"] == 2.0
    assert "blake2b" in manifest["seeding_scheme"]
    assert "[PASS] closed form" in (out / "summary.txt").read_text()
    assert (out / "kernel_table.csv").read_text().startswith("x,p1\n")


def test_compensator_outputs_are_byte_identical(tmp_path):
    args = ["compensator", "--n-particles", "1000", "--replicates", "4", "--seed", "42", "--t", "0.5"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b"), "--workers", "2"])
    for name in ("compensator.csv", "compensator.json", "jumps.csv", "replicates.ndjson"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert len(manifest["replicate_seeds"]["superprocess"]) == 4
    first = json.loads((tmp_path / "a" / "replicates.ndjson").read_text().splitlines()[0])
    assert set(first) == {"replicate", "t", "total_mass", "n_jumps"}


def test_exponents_rerun_identical(tmp_path):
    args = ["exponents", "--n-particles", "10000", "--replicates", "40", "--seed", "42", "--t", "0.5"]
    for sub in ("a", "b"):
        run(parse_config(args + ["--out", str(tmp_path / sub)]))
    for name in ("exponents.json", "exponents.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma, mb = (json.loads((tmp_path / s / "manifest.json").read_text()) for s in ("a", "b"))
    ma["config"].pop("out"), mb["config"].pop("out")
    assert ma == mb
