"""
Shared plumbing for experiments: resolved settings, check records and results
"""
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from margin_paths.config import Config, ExperimentConfig, geometric_grid
from margin_paths.datasets import generate_dataset
from margin_paths.errors import ConfigError
from margin_paths.predictor import Dataset, PredictorSpec, build_spec
from margin_paths.solvers.records import SolverOptions

logger = logging.getLogger("marginpaths.experiments")

Table = Tuple[List[str], List[List]]


@dataclass
class Check:
    """One invariant evaluated by an experiment"""

    statement: str
    name: str
    passed: bool
    gating: bool = True
    detail: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> Dict:
        return {
            "id": self.statement,
            "check": self.name,
            "status": self.status,
            "gating": self.gating,
            "detail": self.detail,
        }


@dataclass
class ExperimentResult:
    experiment: str
    statements: Tuple[str, ...]
    checks: List[Check] = field(default_factory=list)
    results: Optional[Table] = None
    tables: Dict[str, Table] = field(default_factory=dict)
    documents: Dict[str, Dict] = field(default_factory=dict)
    metrics: Dict = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def check(self, statement: str, name: str, passed: bool, gating: bool = True, detail: str = ""):
        entry = Check(statement, name, bool(passed), gating, detail)
        self.checks.append(entry)
        if not entry.passed:
            log = logger.warning if gating else logger.info
            log("INVARIANT_FAIL: id=%s check=%s detail=%s", statement, name, detail)
        return entry.passed

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)


class ExperimentContext:
    """Resolves config values against per-experiment defaults"""

    def __init__(self, config: ExperimentConfig, settings: Config):
        self.config = config
        self.settings = settings
        self.provenance: Dict[str, List[str]] = {
            "dataset": [],
            "predictor": [],
            "norm": [],
            "solver_fingerprint": [],
        }

    def _note(self, key: str, value: str):
        if value not in self.provenance[key]:
            self.provenance[key].append(value)

    @property
    def seed(self) -> int:
        return self.config.seed if self.config.seed is not None else self.settings.DEFAULT_SEED

    @property
    def threads(self) -> int:
        return self.settings.THREADS

    def dataset_overridden(self) -> bool:
        ds = self.config.dataset
        return ds.samples is not None or ds.kind is not None

    def dataset(self, kind: str, d: Optional[int] = None, N: Optional[int] = None) -> Dataset:
        cfg = self.config.dataset
        if cfg.samples is not None:
            ds = Dataset.from_samples(cfg.samples, seed="inline", name="inline")
        else:
            chosen = cfg.kind or kind
            dim = cfg.d if cfg.d is not None else (d if chosen == kind else None)
            count = cfg.N if cfg.N is not None else (N if chosen == kind else None)
            seed = cfg.seed if cfg.seed is not None else self.seed
            ds = generate_dataset(chosen, dim, count, seed)
        return self.note_dataset(ds)

    def note_dataset(self, ds: Dataset) -> Dataset:
        """Record a dataset built outside dataset() in the provenance header"""
        self._note("dataset", ds.name)
        return ds

    def note_spec(self, spec: PredictorSpec) -> PredictorSpec:
        self._note("predictor", json.dumps(spec.describe(), sort_keys=True))
        return spec

    def spec(self, default_blocks: Sequence[Dict], data_dim: int) -> PredictorSpec:
        if self.config.predictor is not None:
            declarations = [b.declaration() for b in self.config.predictor]
        else:
            declarations = list(default_blocks)
        return self.note_spec(build_spec(declarations, data_dim))

    def norm(self, default: str = "L2") -> str:
        tag = self.config.norm or default
        self._note("norm", tag)
        return tag

    def options(self, norm_tag: str = "L2", **defaults) -> SolverOptions:
        opts = SolverOptions(norm_tag=norm_tag, seed=self.seed, threads=self.threads)
        opts = replace(opts, **defaults)
        opts = replace(opts, **self.config.solver_opts.overrides())
        self._note("solver_fingerprint", opts.fingerprint())
        return opts

    def rho_grid(self, lo: float, hi: float, points: int) -> List[float]:
        grids = self.config.grids
        if grids.rho is not None:
            return [float(r) for r in grids.rho]
        hi = grids.rho_max if grids.rho_max is not None else hi
        lo = grids.rho_min if grids.rho_min is not None else lo
        points = grids.rho_points if grids.rho_points is not None else points
        try:
            return geometric_grid(lo, hi, points)
        except ValueError as e:
            raise ConfigError("invalid rho grid", [f"grids: {e}"]) from e

    def grid_res(self, default: float) -> float:
        return self.config.grid_res if self.config.grid_res is not None else default

    def provenance_header(self) -> Dict[str, str]:
        return {
            "experiment": self.config.experiment,
            "dataset": "+".join(self.provenance["dataset"]),
            "predictor": "+".join(self.provenance["predictor"]),
            "norm": "+".join(self.provenance["norm"]),
            "seed": str(self.seed),
            "config_hash": self.config.fingerprint(),
            "solver_fingerprint": "+".join(self.provenance["solver_fingerprint"]),
        }
