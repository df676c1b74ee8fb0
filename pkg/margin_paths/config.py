"""
Configuration management for margin-paths

Process settings come from the environment (class-based, per deployment);
experiment settings come from an optional YAML file validated by pydantic.
"""
import hashlib
import os
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from margin_paths.errors import ConfigError

EXPERIMENTS = (
    "margin_gap",
    "homog_rate",
    "log_predictor",
    "powerlog_predictor",
    "ensemble_discard",
    "svm_bias",
    "lexicographic",
    "optimization_alignment",
    "regularization_link",
    "pareto_check",
)


#############################################
# Process settings
#############################################


class Config:
    """Base configuration"""

    DEBUG = False
    TESTING = False
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
    LOG_FORMAT = os.getenv("LOG_FORMAT", "text")  # "text" or "json"

    # Parallelism over restarts and sweep points
    THREADS = int(os.getenv("MARGIN_PATHS_THREADS", 1))

    # Outputs
    OUTPUT_DIR = Path(os.getenv("MARGIN_PATHS_OUTPUT_DIR", "results"))
    DEFAULT_SEED = int(os.getenv("MARGIN_PATHS_SEED", 0))


class DevelopmentConfig(Config):
    """Development configuration"""

    DEBUG = True
    LOG_LEVEL = os.getenv("LOG_LEVEL", "DEBUG")


class ProductionConfig(Config):
    """Production configuration (CI and batch runs)"""

    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
    LOG_FORMAT = os.getenv("LOG_FORMAT", "json")


class TestingConfig(Config):
    """Testing configuration"""

    TESTING = True
    DEBUG = True
    LOG_LEVEL = "DEBUG"
    THREADS = 1


config_map = {
    "development": DevelopmentConfig,
    "production": ProductionConfig,
    "testing": TestingConfig,
}


def get_config(env: str = None) -> Config:
    """Get configuration based on environment"""
    if env is None:
        env = os.getenv("MARGIN_PATHS_ENV", "development")

    config_class = config_map.get(env.lower(), DevelopmentConfig)
    config = config_class()

    if config.THREADS < 1:
        raise ValueError("MARGIN_PATHS_THREADS must be at least 1")
    if config.LOG_FORMAT not in ("text", "json"):
        raise ValueError(f"LOG_FORMAT must be 'text' or 'json', got {config.LOG_FORMAT!r}")
    if isinstance(config, ProductionConfig) and config.LOG_FORMAT != "json":
        raise ValueError("LOG_FORMAT must be 'json' in production")

    return config


#############################################
# Experiment settings
#############################################


class DatasetConfig(BaseModel):
    """Generator call or inline samples"""

    model_config = ConfigDict(extra="forbid")

    kind: Optional[str] = Field(default=None, description="Generator or fixture name")
    d: Optional[int] = Field(default=None, ge=1, description="Data dimension")
    N: Optional[int] = Field(default=None, ge=1, description="Sample count for random kinds")
    seed: Optional[int] = Field(default=None, description="Generator seed; defaults to the run seed")
    samples: Optional[List[Tuple[List[float], int]]] = Field(
        default=None, description="Inline ((x...), y) pairs; overrides kind"
    )

    @field_validator("samples")
    @classmethod
    def labels_are_signs(cls, v):
        if v is not None:
            if not v:
                raise ValueError("inline samples must not be empty")
            for _, label in v:
                if label not in (-1, 1):
                    raise ValueError(f"labels must be -1 or +1, got {label}")
        return v


class BlockConfig(BaseModel):
    """One predictor block declaration"""

    model_config = ConfigDict(extra="forbid")

    family: Literal[
        "linear",
        "power_lifted_linear",
        "product_linear",
        "squared_bias",
        "log_wrap",
        "power_log_wrap",
    ]
    p: Optional[int] = Field(default=None, ge=1, description="Power for power_lifted_linear")
    depth: Optional[int] = Field(default=None, ge=1, description="Depth for product_linear")
    eps: Optional[float] = Field(default=None, gt=0, description="Exponent offset for power_log_wrap")

    def declaration(self) -> Dict:
        return self.model_dump(exclude_none=True)


class GridConfig(BaseModel):
    """Scale grids; unset entries fall back to per-experiment defaults"""

    model_config = ConfigDict(extra="forbid")

    rho_min: Optional[float] = Field(default=None, gt=0)
    rho_max: Optional[float] = Field(default=None, gt=0)
    rho_points: Optional[int] = Field(default=None, ge=1)
    rho: Optional[List[float]] = Field(default=None, description="Explicit ρ grid")
    c: Optional[List[float]] = Field(default=None, description="Regularization grid")
    gammas: Optional[List[float]] = Field(default=None, description="Finite-γ grid")
    T: Optional[int] = Field(default=None, ge=1, description="Gradient-descent steps")
    lr: Optional[float] = Field(default=None, gt=0, description="Gradient-descent step size")
    checkpoints: int = Field(default=120, ge=1)


class SolverConfig(BaseModel):
    """Subset of solver knobs exposed to config files"""

    model_config = ConfigDict(extra="forbid")

    restarts: Optional[int] = Field(default=None, ge=1)
    sweep_restarts: Optional[int] = Field(default=None, ge=0)
    max_iter: Optional[int] = Field(default=None, ge=1)
    pgtol: Optional[float] = Field(default=None, gt=0)
    step_schedule: Optional[Literal["armijo", "invsqrt"]] = None
    step0: Optional[float] = Field(default=None, gt=0)
    margin_eps: Optional[float] = Field(default=None, gt=0)
    polish: Optional[bool] = None

    def overrides(self) -> Dict:
        return self.model_dump(exclude_none=True)


class ExperimentConfig(BaseModel):
    """Everything that determines one experiment run"""

    model_config = ConfigDict(extra="forbid")

    experiment: Literal[EXPERIMENTS]
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    predictor: Optional[List[BlockConfig]] = None
    norm: Optional[Literal["L2", "L1", "Linf"]] = None
    grids: GridConfig = Field(default_factory=GridConfig)
    solver_opts: SolverConfig = Field(default_factory=SolverConfig)
    seed: Optional[int] = None
    grid_res: Optional[float] = Field(default=None, gt=0)
    output_dir: Optional[str] = None

    def fingerprint(self) -> str:
        """Hash of the serialized config minus the output location, written into every CSV header"""
        payload = self.model_dump_json(exclude={"output_dir"})
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _diagnostics(err: ValidationError) -> List[str]:
    lines = []
    for item in err.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return lines


def parse_experiment_config(data: Dict) -> ExperimentConfig:
    """Validate a mapping, turning pydantic errors into ConfigError diagnostics"""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        diagnostics = _diagnostics(e)
        raise ConfigError("invalid experiment config", diagnostics) from e


def load_experiment_config(path: Optional[Path], experiment: Optional[str] = None) -> ExperimentConfig:
    """
    Read a YAML experiment file

    Args:
        path: YAML file, or None for defaults only
        experiment: Experiment name from the command line; overrides the file

    Returns:
        Validated ExperimentConfig
    """
    data: Dict = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}", [str(e)]) from e
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
            problem = getattr(e, "problem", None) or str(e)
            raise ConfigError(f"cannot parse {path}", [f"{where}{problem}"]) from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"cannot parse {path}", ["top level must be a mapping"])
        data = loaded
    if experiment is not None:
        data = {**data, "experiment": experiment}
    return parse_experiment_config(data)


def apply_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    rho_max: Optional[float] = None,
    restarts: Optional[int] = None,
    grid_res: Optional[float] = None,
) -> ExperimentConfig:
    """Command-line flags win over file values"""
    data = config.model_dump()
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["output_dir"] = str(out)
    if rho_max is not None:
        data["grids"]["rho_max"] = rho_max
    if restarts is not None:
        data["solver_opts"]["restarts"] = restarts
    if grid_res is not None:
        data["grid_res"] = grid_res
    return parse_experiment_config(data)


def geometric_grid(lo: float, hi: float, points: int) -> List[float]:
    """Strictly increasing geometric grid from lo to hi"""
    if points == 1:
        return [float(hi)]
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got {lo}, {hi}")
    return [float(v) for v in np.geomspace(lo, hi, points)]
