"""
Unit tests for process settings and experiment configs
"""
import shutil
import tempfile
from pathlib import Path

import pytest

from margin_paths.config import (
    DevelopmentConfig,
    ProductionConfig,
    TestingConfig,
    apply_overrides,
    geometric_grid,
    get_config,
    load_experiment_config,
    parse_experiment_config,
)
from margin_paths.errors import ConfigError


class TestProcessSettings:
    """Test environment-driven settings"""

    def test_testing_config(self):
        config = get_config("testing")
        assert isinstance(config, TestingConfig)
        assert config.THREADS == 1

    def test_unknown_env_falls_back(self):
        assert isinstance(get_config("staging"), DevelopmentConfig)

    def test_env_variable_selects_class(self, monkeypatch):
        monkeypatch.setenv("MARGIN_PATHS_ENV", "testing")
        assert isinstance(get_config(), TestingConfig)

    def test_production_requires_json_logs(self, monkeypatch):
        monkeypatch.setattr(ProductionConfig, "LOG_FORMAT", "text")
        with pytest.raises(ValueError):
            get_config("production")

    def test_threads_must_be_positive(self, monkeypatch):
        monkeypatch.setattr(TestingConfig, "THREADS", 0)
        with pytest.raises(ValueError):
            get_config("testing")


class TestExperimentConfig:
    """Test YAML experiment configs"""

    def setup_method(self):
        self.temp_dir = Path(tempfile.mkdtemp())

    def teardown_method(self):
        shutil.rmtree(self.temp_dir)

    def write(self, text: str) -> Path:
        path = self.temp_dir / "experiment.yaml"
        path.write_text(text)
        return path

    def test_experiment_name_only(self):
        config = parse_experiment_config({"experiment": "margin_gap"})
        assert config.dataset.kind is None
        assert config.grids.checkpoints == 120
        assert config.solver_opts.overrides() == {}

    def test_full_file(self):
        path = self.write(
            "experiment: ensemble_discard\n"
            "dataset:\n"
            "  kind: deep_separable_ensemble\n"
            "predictor:\n"
            "  - family: linear\n"
            "  - family: product_linear\n"
            "    depth: 2\n"
            "norm: L2\n"
            "grids:\n"
            "  rho_max: 512\n"
            "  gammas: [1, 10]\n"
            "solver_opts:\n"
            "  restarts: 3\n"
            "seed: 7\n"
        )
        config = load_experiment_config(path)
        assert config.experiment == "ensemble_discard"
        assert config.predictor[1].declaration() == {"family": "product_linear", "depth": 2}
        assert config.grids.rho_max == 512
        assert config.solver_opts.overrides() == {"restarts": 3}
        assert config.seed == 7

    def test_command_line_experiment_wins(self):
        path = self.write("experiment: margin_gap\n")
        config = load_experiment_config(path, "lexicographic")
        assert config.experiment == "lexicographic"

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError) as exc:
            parse_experiment_config({"experiment": "nope"})
        assert any(line.startswith("experiment:") for line in exc.value.diagnostics)

    def test_unknown_field_names_its_path(self):
        with pytest.raises(ConfigError) as exc:
            parse_experiment_config({"experiment": "margin_gap", "grids": {"rho_mx": 3}})
        assert any(line.startswith("grids.rho_mx:") for line in exc.value.diagnostics)

    def test_bad_label(self):
        data = {"experiment": "margin_gap", "dataset": {"samples": [[[1.0, 0.0], 2]]}}
        with pytest.raises(ConfigError):
            parse_experiment_config(data)

    def test_yaml_syntax_error_has_position(self):
        path = self.write("experiment: margin_gap\ngrids: [1, 2\n")
        with pytest.raises(ConfigError) as exc:
            load_experiment_config(path)
        assert exc.value.diagnostics[0].startswith("line ")

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_experiment_config(self.temp_dir / "missing.yaml", "margin_gap")

    def test_overrides(self):
        config = parse_experiment_config({"experiment": "margin_gap"})
        config = apply_overrides(config, seed=3, out="runs/x", rho_max=64.0, restarts=2, grid_res=1e-2)
        assert config.seed == 3
        assert config.output_dir == "runs/x"
        assert config.grids.rho_max == 64.0
        assert config.solver_opts.restarts == 2
        assert config.grid_res == 1e-2

    def test_fingerprint_tracks_content(self):
        first = parse_experiment_config({"experiment": "margin_gap", "seed": 1})
        same = parse_experiment_config({"experiment": "margin_gap", "seed": 1})
        other = parse_experiment_config({"experiment": "margin_gap", "seed": 2})
        assert first.fingerprint() == same.fingerprint()
        assert first.fingerprint() != other.fingerprint()

    def test_fingerprint_ignores_output_dir(self):
        first = parse_experiment_config({"experiment": "margin_gap", "output_dir": "runs/a"})
        second = parse_experiment_config({"experiment": "margin_gap", "output_dir": "runs/b"})
        assert first.fingerprint() == second.fingerprint()


class TestGeometricGrid:
    """Test geometric ρ grids"""

    def test_endpoints(self):
        grid = geometric_grid(1.0, 2048.0, 12)
        assert len(grid) == 12
        assert grid[0] == pytest.approx(1.0)
        assert grid[-1] == pytest.approx(2048.0)

    def test_single_point(self):
        assert geometric_grid(1.0, 5.0, 1) == [5.0]

    def test_rejects_reversed(self):
        with pytest.raises(ValueError):
            geometric_grid(10.0, 1.0, 3)
