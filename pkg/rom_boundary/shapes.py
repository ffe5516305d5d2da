"""
Synthetic 2-D range-of-motion shapes with closed-form areas, used as
ground truth for boundary learning.
"""

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Type

import numpy as np

from .dataset import Provenance, RomDataset
from .errors import RejectedInputError

MIN_SAMPLES = 50


@dataclass(frozen=True)
class Disk:
    radius: float = 50.0
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise RejectedInputError(f"disk radius must be positive, got {self.radius}")

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.sum(d * d, axis=1) <= self.radius ** 2


@dataclass(frozen=True)
class Ellipse:
    a: float = 60.0
    b: float = 30.0
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise RejectedInputError(f"ellipse semi-axes must be positive, got ({self.a}, {self.b})")

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        half = np.array([self.a, self.b])
        return c - half, c + half

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return (d[:, 0] / self.a) ** 2 + (d[:, 1] / self.b) ** 2 <= 1.0


@dataclass(frozen=True)
class AnnulusSector:
    r_inner: float = 20.0
    r_outer: float = 60.0
    theta_start: float = 0.0  # degrees, counter-clockwise
    theta_end: float = 270.0
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0 <= self.r_inner < self.r_outer:
            raise RejectedInputError(f"need 0 <= r_inner < r_outer, got ({self.r_inner}, {self.r_outer})")
        if not 0 < self.theta_end - self.theta_start <= 360:
            raise RejectedInputError("sector span must lie in (0, 360] degrees")

    @property
    def area(self) -> float:
        span = math.radians(self.theta_end - self.theta_start)
        return 0.5 * span * (self.r_outer ** 2 - self.r_inner ** 2)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        return c - self.r_outer, c + self.r_outer

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        r2 = np.sum(d * d, axis=1)
        theta = np.mod(np.degrees(np.arctan2(d[:, 1], d[:, 0])) - self.theta_start, 360.0)
        return (r2 >= self.r_inner ** 2) & (r2 <= self.r_outer ** 2) & (theta <= self.theta_end - self.theta_start)


def lens_area(R: float, r: float, d: float) -> float:
    """Intersection area of two circles with radii R, r and center distance d"""
    if d >= R + r:
        return 0.0
    if d <= abs(R - r):
        return math.pi * min(R, r) ** 2
    a1 = r * r * math.acos((d * d + r * r - R * R) / (2 * d * r))
    a2 = R * R * math.acos((d * d + R * R - r * r) / (2 * d * R))
    a3 = 0.5 * math.sqrt((-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R))
    return a1 + a2 - a3


@dataclass(frozen=True)
class Crescent:
    """Disk of `radius` minus a disk of `cut_radius` centered `offset` to its right"""

    radius: float = 50.0
    cut_radius: float = 40.0
    offset: float = 30.0
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.radius > 0 and self.cut_radius > 0):
            raise RejectedInputError("crescent radii must be positive")
        if not abs(self.radius - self.cut_radius) < self.offset < self.radius + self.cut_radius:
            raise RejectedInputError("crescent needs |radius - cut_radius| < offset < radius + cut_radius")

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2 - lens_area(self.radius, self.cut_radius, self.offset)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        outer = np.sum(d * d, axis=1) <= self.radius ** 2
        cut = (d[:, 0] - self.offset) ** 2 + d[:, 1] ** 2 < self.cut_radius ** 2
        return outer & ~cut


SHAPES: Dict[str, Type] = {
    "disk": Disk,
    "ellipse": Ellipse,
    "annulus-sector": AnnulusSector,
    "crescent": Crescent,
}


def make_shape(name: str, **params):
    try:
        cls = SHAPES[name]
    except KeyError:
        raise RejectedInputError(f"unknown shape {name!r} (choose from {', '.join(SHAPES)})")
    try:
        return cls(**params)
    except TypeError as e:
        raise RejectedInputError(f"bad parameters for {name}: {e}")


def synth_shape(shape: str, n: int, seed: int = 0, dofs: Sequence[int] = (0, 1),
                provenance: Provenance = Provenance.CLINICAL, **params) -> Tuple[RomDataset, float]:
    """n uniform samples from the shape by seeded rejection sampling, plus its area"""
    if n < MIN_SAMPLES:
        raise RejectedInputError(f"synth_shape needs n >= {MIN_SAMPLES}, got {n}")
    region = make_shape(shape, **params)
    lo, hi = region.bounds()
    rng = np.random.default_rng(seed)

    accepted = []
    count = 0
    while count < n:
        batch = rng.uniform(lo, hi, size=(2 * n, 2))
        batch = batch[region.contains(batch)]
        accepted.append(batch)
        count += len(batch)
    samples = np.concatenate(accepted)[:n]

    data = RomDataset.from_array(samples, provenance=provenance, dofs=dofs, subject=f"synthetic-{shape}")
    return data, region.area
