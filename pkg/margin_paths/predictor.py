"""
Prediction-function families

Each family maps a parameter block θ_k and a signed sample z_n = y_n x_n to a
scalar f_n^{(k)}(θ_k). A PredictorSpec is an ordered sum of blocks; for
homogeneous families the block degrees must strictly increase.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from margin_paths.errors import DomainError, UnsupportedFamily

logger = logging.getLogger("marginpaths.predictor")

NORM_TAGS = ("L2", "L1", "Linf")


#############################################
# Data
#############################################


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled samples with cached signed vectors z_n = y_n x_n"""

    X: np.ndarray  # (N, d)
    y: np.ndarray  # (N,) entries in {-1, +1}
    seed: Union[int, str] = "explicit"
    name: str = "inline"
    Z: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("X must be a non-empty (N, d) array")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("labels must be -1 or +1")
        Z = y[:, None] * X
        for arr in (X, y, Z):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "Z", Z)

    @classmethod
    def from_samples(
        cls, samples: Sequence[Tuple[Sequence[float], int]], seed="explicit", name="inline"
    ) -> "Dataset":
        X = [list(np.atleast_1d(np.asarray(x, dtype=float))) for x, _ in samples]
        y = [label for _, label in samples]
        return cls(X=np.array(X), y=np.array(y), seed=seed, name=name)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def samples(self) -> List[Tuple[np.ndarray, int]]:
        return [(self.X[i], int(self.y[i])) for i in range(self.n_samples)]


#############################################
# Families
#############################################


class Family:
    """Base class for a block's prediction-function family"""

    name = "family"
    homogeneous = True
    smooth = True
    log_family = False

    @property
    def degree(self) -> Optional[Fraction]:
        return None

    def block_dim(self, data_dim: int) -> int:
        return data_dim

    def values(self, theta: np.ndarray, ds: Dataset) -> np.ndarray:
        """f_n(θ) for all n; θ may carry leading batch axes"""
        raise NotImplementedError

    def jacobian(self, theta: np.ndarray, ds: Dataset) -> np.ndarray:
        """(N, block_dim) matrix of per-sample gradients"""
        raise NotImplementedError

    def describe(self) -> Dict:
        return {"family": self.name}


@dataclass(frozen=True)
class Linear(Family):
    name = "linear"

    @property
    def degree(self) -> Fraction:
        return Fraction(1)

    def values(self, theta, ds):
        return theta @ ds.Z.T

    def jacobian(self, theta, ds):
        return np.array(ds.Z)


@dataclass(frozen=True)
class PowerLiftedLinear(Family):
    """y ⟨θ^{⊙p}, x⟩ with an exact integer power"""

    p: int = 2
    name = "power_lifted_linear"

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"power must be an integer >= 1, got {self.p}")

    @property
    def degree(self) -> Fraction:
        return Fraction(int(self.p))

    def values(self, theta, ds):
        return np.power(theta, int(self.p)) @ ds.Z.T

    def jacobian(self, theta, ds):
        p = int(self.p)
        return p * np.power(theta, p - 1)[None, :] * ds.Z

    def describe(self):
        return {"family": self.name, "p": int(self.p)}


@dataclass(frozen=True)
class ProductLinear(Family):
    """y · s_1 ⋯ s_{D−1} · vᵀx over the block (s_1, …, s_{D−1}, v)"""

    depth: int = 2
    name = "product_linear"

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 2:
            raise ValueError(f"depth must be an integer >= 2, got {self.depth}")

    @property
    def degree(self) -> Fraction:
        return Fraction(int(self.depth))

    def block_dim(self, data_dim):
        return int(self.depth) - 1 + data_dim

    def values(self, theta, ds):
        k = int(self.depth) - 1
        scale = np.prod(theta[..., :k], axis=-1)
        return scale[..., None] * (theta[..., k:] @ ds.Z.T)

    def jacobian(self, theta, ds):
        k = int(self.depth) - 1
        s, v = theta[:k], theta[k:]
        inner = ds.Z @ v
        jac = np.empty((ds.n_samples, theta.shape[0]))
        for j in range(k):
            jac[:, j] = np.prod(np.delete(s, j)) * inner
        jac[:, k:] = np.prod(s) * ds.Z
        return jac

    def describe(self):
        return {"family": self.name, "depth": int(self.depth)}


@dataclass(frozen=True)
class SquaredBias(Family):
    """Scalar block b contributing y_n b²"""

    name = "squared_bias"

    @property
    def degree(self) -> Fraction:
        return Fraction(2)

    def block_dim(self, data_dim):
        return 1

    def values(self, theta, ds):
        return np.square(theta[..., :1]) * ds.y

    def jacobian(self, theta, ds):
        return (2.0 * theta[0] * ds.y)[:, None]


@dataclass(frozen=True)
class LogWrap(Family):
    """log(θᵀz_n) on the cone θᵀz_n > 0"""

    name = "log_wrap"
    homogeneous = False
    smooth = False
    log_family = True

    def _inner(self, theta, ds):
        u = theta @ ds.Z.T
        if np.any(~(u > 0)):
            raise DomainError("log-family argument θᵀz_n <= 0")
        return u

    def transform(self, u):
        return np.log(u)

    def transform_prime(self, u):
        return 1.0 / u

    def values(self, theta, ds):
        return self.transform(self._inner(theta, ds))

    def jacobian(self, theta, ds):
        u = self._inner(theta, ds)
        return self.transform_prime(u)[:, None] * ds.Z


@dataclass(frozen=True)
class PowerLogWrap(LogWrap):
    """sign(l)|l|^{1+ε} with l = log(θᵀz_n)"""

    eps: float = 1.0
    name = "power_log_wrap"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    def transform(self, u):
        logu = np.log(u)
        return np.sign(logu) * np.power(np.abs(logu), 1.0 + self.eps)

    def transform_prime(self, u):
        logu = np.log(u)
        return (1.0 + self.eps) * np.power(np.abs(logu), self.eps) / u

    def describe(self):
        return {"family": self.name, "eps": float(self.eps)}


FAMILIES = {
    "linear": lambda decl: Linear(),
    "power_lifted_linear": lambda decl: PowerLiftedLinear(p=int(decl.get("p", 2))),
    "product_linear": lambda decl: ProductLinear(depth=int(decl.get("depth", 2))),
    "squared_bias": lambda decl: SquaredBias(),
    "log_wrap": lambda decl: LogWrap(),
    "power_log_wrap": lambda decl: PowerLogWrap(eps=float(decl.get("eps", 1.0))),
}


#############################################
# Specs and parameter points
#############################################


@dataclass(frozen=True)
class Block:
    family: Family
    dim: int


@dataclass(frozen=True)
class PredictorSpec:
    """Ordered sum of blocks over a data dimension"""

    blocks: Tuple[Block, ...]
    data_dim: int

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise ValueError("spec needs at least one block")
        for blk in blocks:
            expected = blk.family.block_dim(self.data_dim)
            if blk.dim != expected:
                raise ValueError(
                    f"{blk.family.name} block has dim {blk.dim}, expected {expected}"
                )
        if any(b.family.log_family for b in blocks) and len(blocks) > 1:
            raise UnsupportedFamily("log families are supported as single-block specs only")
        degrees = [b.family.degree for b in blocks]
        if len(blocks) > 1 and any(d2 <= d1 for d1, d2 in zip(degrees, degrees[1:])):
            raise ValueError(f"block degrees must strictly increase, got {degrees}")

    @classmethod
    def of(cls, families: Sequence[Family], data_dim: int) -> "PredictorSpec":
        return cls(tuple(Block(f, f.block_dim(data_dim)) for f in families), data_dim)

    @property
    def total_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def offsets(self) -> Tuple[Tuple[int, int], ...]:
        out, start = [], 0
        for b in self.blocks:
            out.append((start, start + b.dim))
            start += b.dim
        return tuple(out)

    @property
    def degrees(self) -> Tuple[Optional[Fraction], ...]:
        return tuple(b.family.degree for b in self.blocks)

    @property
    def smooth(self) -> bool:
        return all(b.family.smooth for b in self.blocks)

    @property
    def homogeneous(self) -> bool:
        return all(b.family.homogeneous for b in self.blocks)

    @property
    def is_log(self) -> bool:
        return any(b.family.log_family for b in self.blocks)

    def describe(self) -> List[Dict]:
        return [b.family.describe() for b in self.blocks]


def build_spec(declarations: Sequence[Dict], data_dim: int) -> PredictorSpec:
    """Build a spec from [{"family": "linear"}, {"family": "product_linear", "depth": 2}, ...]"""
    families = []
    for decl in declarations:
        name = decl.get("family")
        if name not in FAMILIES:
            raise UnsupportedFamily(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
        families.append(FAMILIES[name](decl))
    return PredictorSpec.of(families, data_dim)


def squared_bias_spec(data_dim: int) -> PredictorSpec:
    """y(θ₁ᵀx + b²): a linear block followed by the squared-bias scalar"""
    return PredictorSpec.of([Linear(), SquaredBias()], data_dim)


def single_block(spec: PredictorSpec, k: int) -> PredictorSpec:
    return PredictorSpec((spec.blocks[k],), spec.data_dim)


@dataclass(frozen=True, eq=False)
class ParamPoint:
    """Parameter vector with its block partition and norm tag"""

    theta: np.ndarray
    offsets: Tuple[Tuple[int, int], ...]
    norm_tag: str = "L2"

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        object.__setattr__(self, "theta", theta)
        if self.norm_tag not in NORM_TAGS:
            raise ValueError(f"norm_tag must be one of {NORM_TAGS}")
        cursor = 0
        for start, stop in self.offsets:
            if start != cursor or stop <= start:
                raise ValueError(f"block offsets {self.offsets} do not partition theta")
            cursor = stop
        if cursor != theta.shape[0]:
            raise ValueError(f"offsets cover {cursor} entries, theta has {theta.shape[0]}")

    @classmethod
    def for_spec(cls, spec: PredictorSpec, theta, norm_tag: str = "L2") -> "ParamPoint":
        return cls(theta=theta, offsets=spec.offsets, norm_tag=norm_tag)

    def block(self, k: int) -> np.ndarray:
        start, stop = self.offsets[k]
        return self.theta[start:stop]

    def norm(self) -> float:
        return vector_norm(self.theta, self.norm_tag)


def vector_norm(theta: np.ndarray, norm_tag: str = "L2") -> float:
    order = {"L2": 2, "L1": 1, "Linf": np.inf}[norm_tag]
    return float(np.linalg.norm(theta, ord=order))


def as_theta(theta) -> np.ndarray:
    if isinstance(theta, ParamPoint):
        return theta.theta
    return np.asarray(theta, dtype=float)


#############################################
# Evaluation
#############################################


def values(spec: PredictorSpec, theta, ds: Dataset) -> np.ndarray:
    """All f_n(θ); a leading batch axis on θ gives a (batch, N) result"""
    theta = as_theta(theta)
    total = np.zeros(theta.shape[:-1] + (ds.n_samples,))
    for blk, (start, stop) in zip(spec.blocks, spec.offsets):
        total = total + blk.family.values(theta[..., start:stop], ds)
    return total


def jacobian(spec: PredictorSpec, theta, ds: Dataset) -> np.ndarray:
    """(N, total_dim) matrix whose row n is ∇_θ f_n(θ)"""
    theta = as_theta(theta)
    jac = np.empty((ds.n_samples, spec.total_dim))
    for blk, (start, stop) in zip(spec.blocks, spec.offsets):
        jac[:, start:stop] = blk.family.jacobian(theta[start:stop], ds)
    return jac


def in_domain(spec: PredictorSpec, theta, ds: Dataset) -> bool:
    if not spec.is_log:
        return True
    return bool(np.all(as_theta(theta) @ ds.Z.T > 0))


def _check_index(ds: Dataset, n: int):
    if not 0 <= n < ds.n_samples:
        raise IndexError(f"sample index {n} out of range for N={ds.n_samples}")


def evaluate(spec: PredictorSpec, theta, ds: Dataset, n: int) -> float:
    """f_n(θ)"""
    _check_index(ds, n)
    return float(values(spec, theta, ds)[n])


def grad(spec: PredictorSpec, theta, ds: Dataset, n: int) -> np.ndarray:
    """∇_θ f_n(θ), analytic and blockwise"""
    _check_index(ds, n)
    return jacobian(spec, theta, ds)[n]


@dataclass
class HomogeneityReport:
    residual: float
    worst_block: int
    passed: bool


def check_homogeneity(
    spec: PredictorSpec, theta, rho: float, ds: Dataset, n: int, tol: float = 1e-9
) -> HomogeneityReport:
    """
    Compare f_n^{(k)}(ρθ_k) with ρ^{α_k} f_n^{(k)}(θ_k) per block

    Args:
        rho: Positive scale
        tol: Relative tolerance, applied as tol·(1 + |f_n^{(k)}(θ_k)|)

    Returns:
        HomogeneityReport with the largest absolute residual
    """
    if spec.is_log or not spec.homogeneous:
        raise UnsupportedFamily("homogeneity check needs homogeneous families")
    if rho <= 0:
        raise ValueError("rho must be positive")
    _check_index(ds, n)
    theta = as_theta(theta)
    worst, worst_block, passed = 0.0, 0, True
    for k, (blk, (start, stop)) in enumerate(zip(spec.blocks, spec.offsets)):
        part = theta[start:stop]
        base = blk.family.values(part, ds)[n]
        scaled = blk.family.values(rho * part, ds)[n]
        residual = abs(scaled - float(rho) ** float(blk.family.degree) * base)
        if residual > tol * (1.0 + abs(base)):
            passed = False
        if residual > worst:
            worst, worst_block = residual, k
    return HomogeneityReport(residual=float(worst), worst_block=worst_block, passed=passed)


@dataclass
class FiniteDifferenceReport:
    worst_coordinate: int
    residual: float
    relative_residual: float
    passed: bool


def grad_fd_check(
    spec: PredictorSpec,
    theta,
    ds: Dataset,
    n: int,
    h: float = 1e-5,
    tol: float = 1e-6,
    relative: bool = False,
) -> FiniteDifferenceReport:
    """Compare grad against central differences coordinate by coordinate"""
    if h <= 0:
        raise ValueError("h must be positive")
    theta = np.array(as_theta(theta), dtype=float)
    analytic = grad(spec, theta, ds, n)
    numeric = np.empty_like(analytic)
    for i in range(theta.shape[0]):
        step = np.zeros_like(theta)
        step[i] = h
        numeric[i] = (evaluate(spec, theta + step, ds, n) - evaluate(spec, theta - step, ds, n)) / (
            2.0 * h
        )
    diff = np.abs(analytic - numeric)
    worst = int(np.argmax(diff))
    scale = max(1.0, float(np.max(np.abs(analytic))))
    rel = float(diff[worst]) / scale
    passed = (rel if relative else float(diff[worst])) <= tol
    return FiniteDifferenceReport(
        worst_coordinate=worst, residual=float(diff[worst]), relative_residual=rel, passed=passed
    )
