import pytest

from ifpt2d.config import (
    Settings,
    SolverConfig,
    TargetConfig,
    build_run_config,
    load_run_config,
    read_config_file,
    unflatten,
)
from ifpt2d.exceptions import ConfigError
from ifpt2d.recipes import RECIPES, get_recipe, list_recipes
from ifpt2d.targets.distributions import Gamma, HeavyTailIG, InverseGaussian

BASE = {
    "process.alpha": "0.33",
    "process.beta": "0.2",
    "process.mu": "0",
    "process.sigma": "1",
    "target.family": "inverse_gaussian",
    "target.mean": "4",
    "target.cv": "1",
}


def test_settings_from_env(monkeypatch):
    """Test loading settings from environment variables."""
    monkeypatch.setenv("IFPT2D_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("IFPT2D_WORKERS", "4")
    monkeypatch.setenv("IFPT2D_OUTPUT_DIR", "/tmp/runs")

    settings = Settings()

    assert settings.log_level == "DEBUG"
    assert settings.workers == 4
    assert settings.output_dir == "/tmp/runs"


def test_settings_defaults(monkeypatch):
    """Test loading settings with defaults (no env vars)."""
    for var in ("IFPT2D_APP_NAME", "IFPT2D_LOG_LEVEL", "IFPT2D_WORKERS", "IFPT2D_LOG_DIR"):
        monkeypatch.delenv(var, raising=False)

    settings = Settings(_env_file=None)

    assert settings.app_name == "IFPT2D"
    assert settings.log_level == "INFO"
    assert settings.log_dir == "logs"
    assert settings.workers == 1


class TestRunConfig:
    def test_unflatten(self):
        assert unflatten({"process.alpha": "1", "seed": "3"}) == {"process": {"alpha": "1"}, "seed": "3"}

    def test_unflatten_rejects_value_and_section(self):
        with pytest.raises(ConfigError):
            unflatten({"process": "1", "process.alpha": "2"})

    def test_defaults(self):
        config = build_run_config(BASE)
        assert config.process.alpha == 0.33
        assert config.solver.n_steps == 200
        assert config.solver.step == pytest.approx(0.1)
        assert config.solver.halfwidth == pytest.approx(0.05)
        assert config.transform.sigma_level == 4.0
        assert config.seed == 0

    def test_missing_sigma_names_the_field(self):
        flat = {k: v for k, v in BASE.items() if k != "process.sigma"}
        with pytest.raises(ConfigError, match="process.sigma"):
            build_run_config(flat)

    def test_non_positive_alpha(self):
        with pytest.raises(ConfigError, match="alpha"):
            build_run_config({**BASE, "process.alpha": "-0.1"})

    def test_invalid_solver_value(self):
        with pytest.raises(ConfigError, match="solver.n_steps"):
            build_run_config({**BASE, "solver.n_steps": "0"})

    def test_unknown_family(self):
        with pytest.raises(ConfigError, match="target.family"):
            build_run_config({**BASE, "target.family": "weibull"})

    def test_read_config_file(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("# comment\nprocess.alpha=0.5\nsolver.n_steps=40\n", encoding="utf-8")
        assert read_config_file(path) == {"process.alpha": "0.5", "solver.n_steps": "40"}

    def test_key_without_value(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("process.alpha=\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="process.alpha"):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            read_config_file(tmp_path / "absent.env")

    def test_layering_recipe_file_overrides(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("solver.n_steps=40\nseed=5\n", encoding="utf-8")
        config = load_run_config(path, recipe="ig-mean4-cv0.5", overrides={"seed": 9, "output.directory": None})
        assert config.recipe == "ig-mean4-cv0.5"
        assert config.target.cv == 0.5
        assert config.solver.n_steps == 40
        assert config.seed == 9
        assert config.output.directory is None

    def test_nothing_given(self):
        with pytest.raises(ConfigError):
            load_run_config()


class TestTargetConfig:
    def test_mean_cv(self):
        assert TargetConfig(family="inverse_gaussian", mean=4, cv=0.5).build() == InverseGaussian(rho=4.0, lam=16.0)

    def test_raw_parameters(self):
        assert TargetConfig(family="gamma", kappa=2.0, rate=0.5).build() == Gamma(kappa=2.0, gamma=0.5)
        assert TargetConfig(family="heavy_tail_ig", **{"lambda": 4.0}).build() == HeavyTailIG(lam=4.0)

    def test_exponential_by_mean_or_rate(self):
        by_mean = TargetConfig(family="exponential", mean=4.0).build()
        by_rate = TargetConfig(family="exponential", rate=0.25).build()
        assert by_mean == by_rate == Gamma(kappa=1.0, gamma=0.25)

    def test_missing_parameter(self):
        with pytest.raises(ConfigError, match="target.cv"):
            TargetConfig(family="gamma", mean=4.0).build()

    def test_invalid_parameter(self):
        with pytest.raises(ConfigError):
            TargetConfig(family="inverse_gaussian", mean=-4.0, cv=1.0).build()


class TestRecipes:
    def test_every_recipe_validates(self):
        for name in RECIPES:
            config = load_run_config(recipe=name)
            assert config.target.build() is not None

    def test_unknown_recipe(self):
        with pytest.raises(ConfigError, match="unknown recipe"):
            get_recipe("nope")

    def test_listing_is_sorted(self):
        names = [recipe.name for recipe in list_recipes()]
        assert names == sorted(names)
        assert "heavy-ig-lambda4" in names
        assert "gamma-mean10-cv1-beta0.01" in names

    def test_solver_grid_of_slow_recipes(self):
        config = load_run_config(recipe="ig-mean10-cv1")
        assert config.solver == SolverConfig(horizon=30.0, n_steps=300)
