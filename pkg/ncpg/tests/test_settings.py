import os
import sys

import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.settings import ALL_SUITES, RunConfig, config_from_entries, load_config, parse_flat_config
from utils.error_handlers import ConfigError


class TestParseFlatConfig:
    """Test cases for the flat run-file format."""

    def test_comments_and_blank_lines(self):
        entries = parse_flat_config("# header\n\nmodel.mu = 0.4  # inline\nrun.seed=7\n")
        assert entries == {"model.mu": "0.4", "run.seed": "7"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_flat_config("model.mu 0.4")

    def test_missing_section(self):
        with pytest.raises(ConfigError):
            parse_flat_config("mu = 0.4")


class TestRunConfig:
    """Test cases for building and validating run configurations."""

    def test_entries_are_typed(self):
        config = config_from_entries({"model.n_t": "3", "tolerance.moment": "1e-8", "run.suites": "gbm, ito",
                                      "scan.theta": "0.1, 0.2"})
        assert config.n_t == 3
        assert config.tolerance("moment") == 1e-8
        assert config.suites == ["gbm", "ito"]
        assert config.scan_values("theta", [0.3]) == [0.1, 0.2]

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            config_from_entries({"model.colour": "blue"})

    def test_unparseable_value(self):
        with pytest.raises(ConfigError):
            config_from_entries({"model.n_t": "four"})

    def test_scan_default_and_bad_list(self):
        config = RunConfig(scan={"p": "1, two"})
        assert config.scan_values("theta", [0.1]) == [0.1]
        with pytest.raises(ConfigError):
            config.scan_values("p", [2.0])

    @pytest.mark.parametrize("changes", [
        {"mu": 1.5},
        {"h_dim": 3},
        {"n_t": 0},
        {"threads": 0},
        {"suites": ["kernel", "bogus"]},
        {"tolerances": {"moment": -1.0}},
    ])
    def test_validation(self, changes):
        with pytest.raises(ConfigError):
            RunConfig(**changes).validate()

    def test_defaults_are_valid(self):
        config = RunConfig().validate()
        assert config.suites == ALL_SUITES
        assert config.tolerance("unlisted") == 1e-10


class TestLoadConfig:
    """Test cases for loading run files with overrides."""

    def test_packaged_default(self, monkeypatch):
        monkeypatch.delenv("NCPG_THREADS", raising=False)
        monkeypatch.delenv("NCPG_MAX_MODES", raising=False)
        config = load_config()
        assert config.mu == 0.5
        assert config.suites == ALL_SUITES
        assert config.scan_values("theta", []) == [0.1, 0.25]

    def test_overrides(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NCPG_THREADS", "3")
        path = tmp_path / "run.conf"
        path.write_text("model.n_t = 2\nrun.seed = 5\n")
        config = load_config(str(path), seed=11, out_dir=str(tmp_path / "o"), suites=["gbm"])
        assert config.n_t == 2
        assert config.seed == 11
        assert config.threads == 3
        assert config.suites == ["gbm"]

    def test_bad_environment_value(self, monkeypatch):
        monkeypatch.setenv("NCPG_THREADS", "many")
        with pytest.raises(ConfigError):
            load_config()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.conf"))
