"""
Acceptance constraints for a trained boundary

1. test inclusion: no held-out RoM sample may fall outside (Gamma < 0)
2. M-ESV: few support vectors may lie in the interior of the data
3. negative exclusion: points just past each DoF's range must fall outside

Checks return a ConstraintResult instead of raising.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .dataset import RomDataset, dof_ranges
from .errors import DimensionMismatchError, RejectedInputError
from .ocsvm import OcsvmModel

# an inseparable neighbourhood costs at least 1 in total slack
SEPARATION_THRESHOLD = 0.5


@dataclass
class ConstraintResult:
    name: str
    passed: bool
    message: str
    offending: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    details: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "message": self.message,
            "offending": self.offending.tolist(),
            "details": self.details,
        }


@dataclass(frozen=True)
class EdgeResult:
    edge: bool
    low_confidence: bool = False
    dropped: int = 0  # neighbours ignored under the misclassification allowance

    @property
    def interior(self) -> bool:
        return not self.edge


@dataclass(frozen=True)
class MEsvConfig:
    """
    Neighbourhood radius (degrees), misclassified neighbours tolerated per SV,
    interior-SV limit (None: ceil(interior_fraction * SV count)) and the
    neighbour count below which an SV is reported as a low-confidence edge.
    """

    radius: float
    max_misclassified: int = 1
    max_interior: Optional[int] = None
    min_neighbors: int = 5
    interior_fraction: float = 0.2

    def __post_init__(self):
        if not self.radius > 0:
            raise RejectedInputError(f"M-ESV radius must be positive, got {self.radius}")
        if self.max_misclassified < 0 or self.min_neighbors < 0:
            raise RejectedInputError("M-ESV thresholds must be >= 0")
        if self.max_interior is not None and self.max_interior < 0:
            raise RejectedInputError("max_interior must be >= 0")
        if not 0 <= self.interior_fraction <= 1:
            raise RejectedInputError("interior_fraction must lie in [0, 1]")

    @classmethod
    def from_data(cls, data: RomDataset, radius_factor: float = 4.0, **kwargs) -> "MEsvConfig":
        """Radius scaled to the median nearest-neighbour distance of the data"""
        return cls(radius=radius_factor * nearest_neighbor_scale(data), **kwargs)

    def interior_limit(self, n_support: int) -> int:
        if self.max_interior is not None:
            return self.max_interior
        return int(math.ceil(self.interior_fraction * n_support))

    def to_dict(self) -> Dict:
        return {
            "radius": self.radius,
            "max_misclassified": self.max_misclassified,
            "max_interior": self.max_interior,
            "min_neighbors": self.min_neighbors,
            "interior_fraction": self.interior_fraction,
        }


def nearest_neighbor_scale(data: RomDataset) -> float:
    X = data.samples
    if len(X) < 2:
        raise RejectedInputError("nearest-neighbour scale needs at least 2 samples")
    distances, _ = cKDTree(X).query(X, k=2)
    nn = distances[:, 1]
    positive = nn[nn > 0]
    if len(positive) == 0:
        raise RejectedInputError("all samples coincide")
    scale = float(np.median(nn))
    return scale if scale > 0 else float(np.median(positive))


def _soft_separation(offsets: np.ndarray) -> np.ndarray:
    """
    Slack per offset of the LP  min sum(s)  s.t.  d_j . w + s_j >= 1,  s >= 0.
    All slacks vanish iff a hyperplane through the origin has every offset
    strictly on one side.
    """
    k, n = offsets.shape
    scaled = offsets / np.max(np.linalg.norm(offsets, axis=1))
    c = np.concatenate([np.zeros(n), np.ones(k)])
    A_ub = -np.hstack([scaled, np.eye(k)])
    b_ub = -np.ones(k)
    bounds = [(None, None)] * n + [(0, None)] * k
    result = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if result.status != 0:
        raise RuntimeError(f"separation LP failed: {result.message}")
    return result.x[n:]


def edge_sv_test(sv: Sequence[float], neighbors: Sequence[Sequence[float]], max_misclassified: int = 0,
                 min_neighbors: int = 1) -> EdgeResult:
    """Edge iff some hyperplane through sv has all but max_misclassified neighbours on one side"""
    sv = np.asarray(sv, dtype=float)
    neighbors = np.atleast_2d(np.asarray(neighbors, dtype=float))
    if neighbors.size == 0:
        raise RejectedInputError("edge_sv_test needs at least one neighbour")
    if neighbors.shape[1] != sv.shape[0]:
        raise DimensionMismatchError(sv.shape[0], neighbors.shape[1], "neighbour")

    offsets = neighbors - sv
    if np.any(np.all(offsets == 0.0, axis=1)):
        raise RejectedInputError("neighbours must differ from the support vector")

    if len(offsets) < min_neighbors:
        return EdgeResult(edge=True, low_confidence=True)

    dropped = 0
    while True:
        slack = _soft_separation(offsets)
        if slack.sum() < SEPARATION_THRESHOLD:
            return EdgeResult(edge=True, dropped=dropped)
        if dropped >= max_misclassified or len(offsets) == 1:
            return EdgeResult(edge=False, dropped=dropped)
        offsets = np.delete(offsets, int(np.argmax(slack)), axis=0)
        dropped += 1


def constraint_test_inclusion(model: OcsvmModel, test: RomDataset, band: float = 0.0) -> ConstraintResult:
    """Pass iff Gamma >= -band on every test sample"""
    if len(test) == 0:
        raise RejectedInputError("test inclusion needs a nonempty test set")
    if test.dimension != model.dimension:
        raise DimensionMismatchError(model.dimension, test.dimension, "test dataset")

    values = model.decision_function(test.samples)
    excluded = values < -band
    count = int(excluded.sum())
    return ConstraintResult(
        name="test_inclusion",
        passed=count == 0,
        message="all test samples inside" if count == 0 else f"{count} of {len(test)} test samples outside",
        offending=test.samples[excluded],
        details={"excluded_count": count, "min_gamma": float(values.min())},
    )


def m_esv_check(model: OcsvmModel, data: RomDataset, cfg: MEsvConfig) -> ConstraintResult:
    """Count support vectors whose Euclidean-ball neighbourhood surrounds them"""
    if data.dimension != model.dimension:
        raise DimensionMismatchError(model.dimension, data.dimension, "training dataset")

    limit = cfg.interior_limit(model.n_support)
    if model.n_support == 1:
        return ConstraintResult("m_esv", True, "single support vector",
                                details={"interior_count": 0, "low_confidence_count": 0, "limit": limit})

    X = data.samples
    tree = cKDTree(X)
    interior: List[int] = []
    low_confidence = 0
    for s, sv in enumerate(model.support_vectors):
        idx = tree.query_ball_point(sv, cfg.radius)
        neighbors = X[idx]
        neighbors = neighbors[np.any(neighbors != sv, axis=1)]
        if len(neighbors) == 0:
            low_confidence += 1
            continue
        result = edge_sv_test(sv, neighbors, cfg.max_misclassified, cfg.min_neighbors)
        low_confidence += int(result.low_confidence)
        if result.interior:
            interior.append(s)

    count = len(interior)
    passed = count <= limit
    return ConstraintResult(
        name="m_esv",
        passed=passed,
        message=f"{count} interior SVs of {model.n_support} (limit {limit})",
        offending=model.support_vectors[interior],
        details={"interior_count": count, "low_confidence_count": low_confidence, "limit": limit},
    )


def make_negative_samples(data: RomDataset, offset: float = 5.0) -> np.ndarray:
    """
    2N points, two per DoF: just below its minimum and just above its maximum,
    every other component at the data mean.
    """
    if not offset > 0:
        raise RejectedInputError(f"negative-sample offset must be positive, got {offset}")
    ranges = dof_ranges(data)
    n = data.dimension
    negatives = np.tile(ranges.mean, (2 * n, 1))
    for i in range(n):
        negatives[2 * i, i] = ranges.minimum[i] - offset
        negatives[2 * i + 1, i] = ranges.maximum[i] + offset
    return negatives


def constraint_negative_exclusion(model: OcsvmModel, negatives: np.ndarray) -> ConstraintResult:
    """Pass iff Gamma < 0 at every negative sample"""
    negatives = np.atleast_2d(np.asarray(negatives, dtype=float))
    if negatives.size == 0:
        raise RejectedInputError("negative exclusion needs at least one negative sample")

    values = model.decision_function(negatives)
    admitted = values >= 0.0
    count = int(admitted.sum())
    return ConstraintResult(
        name="negative_exclusion",
        passed=count == 0,
        message="all negatives outside" if count == 0 else f"{count} of {len(negatives)} negatives admitted",
        offending=negatives[admitted],
        details={"admitted_count": count, "max_gamma": float(values.max())},
    )
