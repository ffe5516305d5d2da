"""
One-class SVM boundary model

Gamma(q) = sum_i alpha_i k(q, q_i) - rho is positive inside the learnt range
of motion, zero on its boundary and negative outside. Coefficients follow the
normalized dual (sum alpha = 1, alpha_i <= 1/(nu m)).
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from .config import get_settings
from .dataset import RomDataset
from .errors import DimensionMismatchError, RejectedInputError, SchemaError
from .kernel import decision_gradients, decision_values
from .kinematics import DOF_NAMES
from .logger import logger
from .solver import solve

MODEL_VERSION = "1.0"

# relative to the upper bound C; smaller coefficients are dropped from the expansion
SV_THRESHOLD = 1e-12


class Region(str, Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class KernelParams:
    sigma: float  # degrees

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise RejectedInputError(f"sigma must be a positive finite number, got {self.sigma}")

    @property
    def gamma(self) -> float:
        """Equivalent 1 / (2 sigma^2) parametrization"""
        return 1.0 / (2.0 * self.sigma ** 2)


@dataclass(frozen=True)
class TrainConfig:
    nu: float
    kernel: KernelParams
    tolerance: float = field(default_factory=lambda: get_settings().qp_tolerance)
    max_iterations: int = field(default_factory=lambda: get_settings().max_iterations)
    cache_rows: int = field(default_factory=lambda: get_settings().kernel_cache_rows)

    def __post_init__(self):
        if not (0.0 < self.nu <= 1.0):
            raise RejectedInputError(f"nu must lie in (0, 1], got {self.nu}")
        if not self.tolerance > 0:
            raise RejectedInputError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise RejectedInputError(f"max_iterations must be >= 1, got {self.max_iterations}")

    @classmethod
    def of(cls, nu: float, sigma: float, **kwargs) -> "TrainConfig":
        return cls(nu=nu, kernel=KernelParams(sigma), **kwargs)


@dataclass(frozen=True)
class GammaValue:
    value: float

    @property
    def sign(self) -> int:
        return int(np.sign(self.value))

    def region(self, band: float = 0.0) -> Region:
        if self.value > band:
            return Region.INSIDE
        if self.value < -band:
            return Region.OUTSIDE
        return Region.BOUNDARY


@dataclass(frozen=True)
class TrainingInfo:
    m: int
    sv_fraction: float
    iterations: int = 0
    max_kkt_violation: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "m": self.m,
            "sv_fraction": self.sv_fraction,
            "iterations": self.iterations,
            "max_kkt_violation": self.max_kkt_violation,
        }


@dataclass(frozen=True)
class OcsvmModel:
    support_vectors: np.ndarray  # (n_sv, N) degrees
    alphas: np.ndarray
    rho: float
    kernel: KernelParams
    nu: float
    training: TrainingInfo
    dofs: Tuple[int, ...] = ()

    @property
    def dimension(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def n_support(self) -> int:
        return len(self.alphas)

    @property
    def upper_bound(self) -> float:
        return 1.0 / (self.nu * self.training.m)

    @property
    def dof_names(self) -> Tuple[str, ...]:
        return tuple(DOF_NAMES[d] if d < len(DOF_NAMES) else f"q{d + 1}" for d in self.dofs)

    def _queries(self, Q) -> Tuple[np.ndarray, bool]:
        Q = np.asarray(Q, dtype=float)
        single = Q.ndim == 1
        Q = np.atleast_2d(Q)
        if Q.shape[1] != self.dimension:
            raise DimensionMismatchError(self.dimension, Q.shape[1], "query")
        return Q, single

    def decision_function(self, Q) -> Union[float, np.ndarray]:
        """Gamma at one point (N,) or a batch (k, N)"""
        Q, single = self._queries(Q)
        values = decision_values(Q, self.support_vectors, self.alphas, self.rho, self.kernel.sigma)
        return float(values[0]) if single else values

    def gradient(self, Q) -> np.ndarray:
        Q, single = self._queries(Q)
        grads = decision_gradients(Q, self.support_vectors, self.alphas, self.kernel.sigma)
        return grads[0] if single else grads


def rbf_kernel(a: Sequence[float], b: Sequence[float], k: KernelParams) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(a.size, b.size)
    d = a - b
    return math.exp(-float(d @ d) / (2.0 * k.sigma ** 2))


def train(data: Union[RomDataset, np.ndarray], cfg: TrainConfig) -> OcsvmModel:
    """
    Train the boundary on every sample of data.

    Raises DegenerateDataError for fewer than two distinct samples and
    ConvergenceError when the iteration cap is hit.
    """
    if isinstance(data, RomDataset):
        X, dofs = data.samples, tuple(data.dofs)
    else:
        X = np.atleast_2d(np.asarray(data, dtype=float))
        dofs = tuple(range(X.shape[1]))
    if not np.all(np.isfinite(X)):
        raise RejectedInputError("training data contains non-finite values")

    m, dimension = X.shape
    logger.log_training_start(m, dimension, cfg.nu, cfg.kernel.sigma)

    result = solve(X, cfg.nu, cfg.kernel.sigma, cfg.tolerance, cfg.max_iterations, cfg.cache_rows)

    keep = result.alpha > SV_THRESHOLD * result.upper_bound
    n_sv = int(keep.sum())
    logger.log_training_complete(n_sv, m, result.iterations, result.max_violation)

    return OcsvmModel(
        support_vectors=X[keep].copy(),
        alphas=result.alpha[keep].copy(),
        rho=result.rho,
        kernel=cfg.kernel,
        nu=cfg.nu,
        training=TrainingInfo(
            m=m,
            sv_fraction=n_sv / m,
            iterations=result.iterations,
            max_kkt_violation=result.max_violation,
        ),
        dofs=dofs,
    )


def gamma(model: OcsvmModel, q: Sequence[float]) -> GammaValue:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise DimensionMismatchError(model.dimension, q.size, "query")
    return GammaValue(model.decision_function(q))


def classify(model: OcsvmModel, q: Sequence[float], band: float = 0.0) -> Region:
    return gamma(model, q).region(band)


def gamma_gradient(model: OcsvmModel, q: Sequence[float]) -> np.ndarray:
    """Analytic gradient, per degree"""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise DimensionMismatchError(model.dimension, q.size, "query")
    return model.gradient(q)


def model_to_dict(model: OcsvmModel) -> Dict:
    return {
        "version": MODEL_VERSION,
        "dimension": model.dimension,
        "sigma": model.kernel.sigma,
        "nu": model.nu,
        "rho": model.rho,
        "support_vectors": model.support_vectors.tolist(),
        "alphas": model.alphas.tolist(),
        "training": model.training.to_dict(),
        "dofs": list(model.dofs),
        "dof_names": list(model.dof_names),
    }


def serialize(model: OcsvmModel) -> bytes:
    return json.dumps(model_to_dict(model), indent=2).encode('utf-8')


def deserialize(payload: Union[bytes, str]) -> OcsvmModel:
    try:
        data = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise SchemaError(f"model payload is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise SchemaError("model payload must be a JSON object")

    version = data.get("version")
    if version != MODEL_VERSION:
        raise SchemaError(f"unsupported model version {version!r}, expected {MODEL_VERSION!r}")

    try:
        dimension = int(data["dimension"])
        sv = np.asarray(data["support_vectors"], dtype=float).reshape(-1, dimension)
        alphas = np.asarray(data["alphas"], dtype=float)
        training = data["training"]
        model = OcsvmModel(
            support_vectors=sv,
            alphas=alphas,
            rho=float(data["rho"]),
            kernel=KernelParams(float(data["sigma"])),
            nu=float(data["nu"]),
            training=TrainingInfo(
                m=int(training["m"]),
                sv_fraction=float(training["sv_fraction"]),
                iterations=int(training.get("iterations", 0)),
                max_kkt_violation=float(training.get("max_kkt_violation", 0.0)),
            ),
            dofs=tuple(int(d) for d in data.get("dofs", range(dimension))),
        )
    except (KeyError, TypeError, ValueError, RejectedInputError) as e:
        raise SchemaError(f"malformed model payload: {e}")

    if len(alphas) != len(sv) or len(alphas) == 0:
        raise SchemaError(f"model has {len(sv)} support vectors but {len(alphas)} alphas")
    if len(model.dofs) != dimension:
        raise SchemaError(f"model lists {len(model.dofs)} dofs for dimension {dimension}")
    return model


def save_model(model: OcsvmModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(serialize(model))
    return path


def load_model(path: Union[str, Path]) -> OcsvmModel:
    return deserialize(Path(path).read_bytes())


def sv_bounding_box(model: OcsvmModel, padding: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    return model.support_vectors.min(axis=0) - padding, model.support_vectors.max(axis=0) + padding
