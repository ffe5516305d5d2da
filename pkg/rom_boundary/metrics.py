"""
RoM volume metrics

Pairwise boundary areas on a cell-center lattice, their weighted sum over
DoF pairs and the Impairment Index (impaired volume / healthy volume).
DoF indices are 0-based here; reports print them 1-based (q1..q7).
"""

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import BoundaryNotEnclosedError, DimensionMismatchError, RejectedInputError, SchemaError
from .kinematics import DOF_NAMES
from .logger import logger
from .ocsvm import OcsvmModel, sv_bounding_box

METRICS_VERSION = "1.0"
MIN_RESOLUTION = 64


@dataclass(frozen=True)
class PairArea:
    i: int
    j: int
    area: float  # deg^2
    uncertainty: float
    resolution: int
    lower: Tuple[float, float]
    upper: Tuple[float, float]

    def __post_init__(self):
        if self.i == self.j:
            raise RejectedInputError(f"a DoF pair needs two distinct DoFs, got ({self.i}, {self.j})")
        if self.area < 0:
            raise RejectedInputError("area must be nonnegative")

    @property
    def key(self) -> Tuple[int, int]:
        return (min(self.i, self.j), max(self.i, self.j))

    def scaled(self, factor: float) -> "PairArea":
        return PairArea(self.i, self.j, self.area * factor, self.uncertainty * factor,
                        self.resolution, self.lower, self.upper)

    def to_dict(self) -> Dict:
        return {
            "i": self.i + 1,
            "j": self.j + 1,
            "area": self.area,
            "uncertainty": self.uncertainty,
            "resolution": self.resolution,
            "bbox": [list(self.lower), list(self.upper)],
        }


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric nonnegative weights C[i, j] over DoF pairs"""

    C: np.ndarray

    def __post_init__(self):
        C = self.C
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise RejectedInputError(f"weight matrix must be square, got shape {C.shape}")
        if not np.all(np.isfinite(C)) or np.any(C < 0):
            raise RejectedInputError("weights must be finite and nonnegative")
        if not np.array_equal(C, C.T):
            raise RejectedInputError("weight matrix must be symmetric")

    @classmethod
    def uniform(cls, dofs: Iterable[int] = (0, 1, 2, 3), size: int = len(DOF_NAMES)) -> "WeightMatrix":
        """Unit weight on every unordered pair of the given DoFs"""
        C = np.zeros((size, size))
        for i, j in combinations(sorted(set(dofs)), 2):
            C[i, j] = C[j, i] = 1.0
        return cls(C)

    @classmethod
    def from_pairs(cls, entries: Iterable[Tuple[int, int, float]], size: int = len(DOF_NAMES)) -> "WeightMatrix":
        C = np.zeros((size, size))
        for i, j, c in entries:
            if not (0 <= i < size and 0 <= j < size) or i == j:
                raise RejectedInputError(f"invalid DoF pair ({i}, {j})")
            C[i, j] = C[j, i] = float(c)
        return cls(C)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "WeightMatrix":
        """JSON {"weights": [[i, j, c], ...]} with 1-based DoF numbers"""
        try:
            with open(path, 'r') as f:
                data = json.load(f)
            entries = [(int(i) - 1, int(j) - 1, float(c)) for i, j, c in data["weights"]]
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}: invalid JSON: {e}")
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}: weights must be a list of [i, j, c] triples ({e})", column="weights")
        return cls.from_pairs(entries)

    def weight(self, i: int, j: int) -> float:
        return float(self.C[i, j])

    def pairs(self) -> List[Tuple[int, int]]:
        """Unordered pairs carrying a positive weight"""
        n = self.C.shape[0]
        return [(i, j) for i in range(n) for j in range(i + 1, n) if self.C[i, j] > 0]

    def to_dict(self) -> Dict:
        return {"weights": [[i + 1, j + 1, self.weight(i, j)] for i, j in self.pairs()]}


@dataclass(frozen=True)
class ImpairmentResult:
    v_impaired: float
    v_healthy: float
    index: float

    @classmethod
    def from_volumes(cls, v_impaired: float, v_healthy: float) -> "ImpairmentResult":
        return cls(v_impaired, v_healthy, impairment_index(v_impaired, v_healthy))

    def to_dict(self) -> Dict:
        return {"V_impaired": self.v_impaired, "V_healthy": self.v_healthy, "II": self.index}


@dataclass(frozen=True)
class IsolineGrid:
    """Gamma sampled at cell centers of a res x res lattice over a 2-D box"""

    xs: np.ndarray
    ys: np.ndarray
    gamma: np.ndarray  # (len(xs), len(ys)), gamma[a, b] at (xs[a], ys[b])
    dofs: Tuple[int, int]

    @property
    def cell_area(self) -> float:
        return float((self.xs[1] - self.xs[0]) * (self.ys[1] - self.ys[0]))

    def border_enclosed(self) -> bool:
        g = self.gamma
        border = np.concatenate([g[0, :], g[-1, :], g[:, 0], g[:, -1]])
        return bool(np.all(border < 0))

    def to_frame(self) -> pd.DataFrame:
        X, Y = np.meshgrid(self.xs, self.ys, indexing='ij')
        names = [DOF_NAMES[d] if d < len(DOF_NAMES) else f"q{d + 1}" for d in self.dofs]
        return pd.DataFrame({names[0]: X.ravel(), names[1]: Y.ravel(), "gamma": self.gamma.ravel()})

    def save_csv(self, path: Union[str, Path]) -> Path:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return Path(path)


def _require_pair_model(model: OcsvmModel):
    if model.dimension != 2:
        raise DimensionMismatchError(2, model.dimension, "pairwise model")


def isoline_grid(model: OcsvmModel, resolution: int = 512, padding: float = 30.0,
                 bounds: Optional[Tuple[Sequence[float], Sequence[float]]] = None) -> IsolineGrid:
    """Gamma lattice over the padded SV bounding box (or explicit bounds)"""
    _require_pair_model(model)
    if resolution < 2:
        raise RejectedInputError(f"resolution must be >= 2, got {resolution}")
    lo, hi = sv_bounding_box(model, padding) if bounds is None else (np.asarray(bounds[0]), np.asarray(bounds[1]))

    step = (hi - lo) / resolution
    xs = lo[0] + (np.arange(resolution) + 0.5) * step[0]
    ys = lo[1] + (np.arange(resolution) + 0.5) * step[1]
    X, Y = np.meshgrid(xs, ys, indexing='ij')
    values = model.decision_function(np.column_stack([X.ravel(), Y.ravel()]))

    dofs = tuple(model.dofs) if len(model.dofs) == 2 else (0, 1)
    return IsolineGrid(xs=xs, ys=ys, gamma=values.reshape(resolution, resolution), dofs=dofs)


def _perimeter_cells(inside: np.ndarray) -> int:
    """Cells whose label differs from at least one 4-neighbour"""
    edge = np.zeros_like(inside)
    vertical = inside[1:, :] != inside[:-1, :]
    horizontal = inside[:, 1:] != inside[:, :-1]
    edge[1:, :] |= vertical
    edge[:-1, :] |= vertical
    edge[:, 1:] |= horizontal
    edge[:, :-1] |= horizontal
    return int(np.count_nonzero(edge))


def pair_area(model: OcsvmModel, resolution: int = 512, padding: float = 30.0) -> PairArea:
    """
    Area of {Gamma > 0} for a 2-D model by cell counting.

    The box must enclose the positive region; when the border still has
    Gamma >= 0 the padding is doubled once before giving up.
    """
    _require_pair_model(model)
    if resolution < MIN_RESOLUTION:
        raise RejectedInputError(f"area resolution must be >= {MIN_RESOLUTION}, got {resolution}")

    grid = isoline_grid(model, resolution, padding)
    if not grid.border_enclosed():
        logger.warning(f"Gamma >= 0 on the integration border with padding {padding}; retrying with {2 * padding}")
        padding *= 2
        grid = isoline_grid(model, resolution, padding)
        if not grid.border_enclosed():
            raise BoundaryNotEnclosedError(
                f"positive region of the {grid.dofs} model reaches the integration border (padding {padding})"
            )

    inside = grid.gamma > 0
    cell = grid.cell_area
    lo, hi = sv_bounding_box(model, padding)
    return PairArea(
        i=int(grid.dofs[0]),
        j=int(grid.dofs[1]),
        area=float(np.count_nonzero(inside)) * cell,
        uncertainty=_perimeter_cells(inside) * cell,
        resolution=resolution,
        lower=(float(lo[0]), float(lo[1])),
        upper=(float(hi[0]), float(hi[1])),
    )


def weighted_volume(areas: Sequence[PairArea], C: WeightMatrix) -> float:
    """Sum over unordered pairs of C_ij * area_ij"""
    by_pair: Dict[Tuple[int, int], PairArea] = {}
    size = C.C.shape[0]
    for area in areas:
        if max(area.key) >= size:
            raise RejectedInputError(f"pair {area.key} lies outside the {size}x{size} weight matrix")
        if area.key in by_pair:
            raise RejectedInputError(f"pair {area.key} given more than once")
        by_pair[area.key] = area

    missing = [pair for pair in C.pairs() if pair not in by_pair]
    if missing:
        names = ", ".join(f"(q{i + 1}, q{j + 1})" for i, j in missing)
        raise RejectedInputError(f"no area for weighted pair(s) {names}")

    return float(sum(C.weight(i, j) * by_pair[(i, j)].area for i, j in C.pairs()))


def impairment_index(v_impaired: float, v_healthy: float) -> float:
    if not v_healthy > 0:
        raise RejectedInputError(f"healthy volume must be positive, got {v_healthy}")
    if v_impaired < 0:
        raise RejectedInputError(f"impaired volume must be nonnegative, got {v_impaired}")
    return v_impaired / v_healthy


@dataclass(frozen=True)
class MonteCarloVolume:
    volume: float
    standard_error: float
    samples: int

    def to_dict(self) -> Dict:
        return {"volume": self.volume, "standard_error": self.standard_error, "samples": self.samples}


def monte_carlo_volume(model: OcsvmModel, n: int = 200_000, padding: float = 30.0, seed: int = 0) -> MonteCarloVolume:
    """N-D volume of {Gamma > 0} by uniform sampling over the padded SV box"""
    if n < 1:
        raise RejectedInputError(f"sample count must be positive, got {n}")
    lo, hi = sv_bounding_box(model, padding)
    box = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    points = rng.uniform(lo, hi, size=(n, model.dimension))
    p = float(np.mean(model.decision_function(points) > 0))
    return MonteCarloVolume(volume=p * box, standard_error=box * np.sqrt(p * (1 - p) / n), samples=n)


def metrics_report(areas: Sequence[PairArea], C: WeightMatrix, volume: Optional[float] = None,
                   impairment: Optional[ImpairmentResult] = None) -> Dict:
    report = {
        "version": METRICS_VERSION,
        "pairs": [a.to_dict() for a in areas],
        "weights": C.to_dict()["weights"],
    }
    if volume is not None:
        report["V"] = volume
    if impairment is not None:
        report.update(impairment.to_dict())
    return report
