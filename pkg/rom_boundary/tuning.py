"""
Constrained sequential grid search over (nu, sigma)

Every cell trains a model and runs the three acceptance constraints. The
accepted region is then refined (bounding box of accepted cells plus one
cell, doubled resolution) until the selected boundary stops changing on a
fixed evaluation lattice or the round limit is reached.
"""

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import get_settings
from .constraints import (
    ConstraintResult,
    MEsvConfig,
    constraint_negative_exclusion,
    constraint_test_inclusion,
    m_esv_check,
    make_negative_samples,
)
from .dataset import RomDataset
from .errors import DimensionMismatchError, NoFeasibleHyperparametersError, RejectedInputError, RomError
from .logger import logger
from .ocsvm import OcsvmModel, TrainConfig, train

REPORT_VERSION = "1.0"
MAX_REFINEMENT_ROUNDS = 4
LATTICE_BUDGET = 64 ** 3

ProgressCallback = Callable[[int, str], None]


@dataclass(frozen=True)
class GridConfig:
    nu_range: Tuple[float, float] = (0.001, 0.5)
    nu_count: int = 5
    sigma_range: Tuple[float, float] = (1e-3, 1e3)
    sigma_count: int = 7
    rounds: int = MAX_REFINEMENT_ROUNDS  # refinement rounds after the initial grid
    change_threshold: float = 0.01
    max_axis_count: int = 17
    lattice_points: int = 64
    lattice_padding: float = 20.0

    def __post_init__(self):
        nu_lo, nu_hi = self.nu_range
        sigma_lo, sigma_hi = self.sigma_range
        if not 0 < nu_lo <= nu_hi <= 1:
            raise RejectedInputError(f"nu range must satisfy 0 < lo <= hi <= 1, got {self.nu_range}")
        if not 0 < sigma_lo <= sigma_hi:
            raise RejectedInputError(f"sigma range must satisfy 0 < lo <= hi, got {self.sigma_range}")
        if self.nu_count < 2 or self.sigma_count < 2:
            raise RejectedInputError("grid axes need at least 2 points each")
        if not 0 <= self.rounds <= MAX_REFINEMENT_ROUNDS:
            raise RejectedInputError(f"refinement rounds must lie in [0, {MAX_REFINEMENT_ROUNDS}]")
        if not 0 <= self.change_threshold <= 1:
            raise RejectedInputError("change threshold is a fraction in [0, 1]")
        if self.max_axis_count < 2 or self.lattice_points < 2:
            raise RejectedInputError("axis and lattice counts must be >= 2")

    def nu_axis(self) -> np.ndarray:
        return np.geomspace(*self.nu_range, self.nu_count)

    def sigma_axis(self) -> np.ndarray:
        return np.geomspace(*self.sigma_range, self.sigma_count)

    def to_dict(self) -> Dict:
        return {
            "nu_range": list(self.nu_range),
            "nu_count": self.nu_count,
            "sigma_range": list(self.sigma_range),
            "sigma_count": self.sigma_count,
            "rounds": self.rounds,
            "change_threshold": self.change_threshold,
            "max_axis_count": self.max_axis_count,
            "lattice_points": self.lattice_points,
            "lattice_padding": self.lattice_padding,
        }


@dataclass
class CellResult:
    nu: float
    sigma: float
    round_index: int
    inclusion: Optional[ConstraintResult] = None
    m_esv: Optional[ConstraintResult] = None
    negatives: Optional[ConstraintResult] = None
    area: Optional[float] = None  # enclosed lattice volume, deg^N
    n_support: int = 0
    error: Optional[str] = None
    model: Optional[OcsvmModel] = field(default=None, repr=False)

    @property
    def accepted(self) -> bool:
        return self.error is None and all(c.passed for c in (self.inclusion, self.m_esv, self.negatives))

    def failures(self) -> List[str]:
        if self.error is not None:
            return ["training_error"]
        return [c.name for c in (self.inclusion, self.m_esv, self.negatives) if not c.passed]

    def flags(self) -> str:
        if self.error is not None:
            return "error"
        return "".join("P" if c.passed else "F" for c in (self.inclusion, self.m_esv, self.negatives))

    def to_dict(self) -> Dict:
        result = {
            "nu": self.nu,
            "sigma": self.sigma,
            "round": self.round_index,
            "accepted": self.accepted,
            "area": self.area,
            "n_support": self.n_support,
            "error": self.error,
        }
        if self.error is None:
            result.update({
                "test_inclusion": {"passed": self.inclusion.passed, **self.inclusion.details},
                "m_esv": {"passed": self.m_esv.passed, **self.m_esv.details},
                "negative_exclusion": {"passed": self.negatives.passed, **self.negatives.details},
            })
        return result


@dataclass
class TuningReport:
    grid: GridConfig
    mesv: MEsvConfig
    offset: float
    cells: List[CellResult]
    rounds: List[Dict]
    selected: Optional[CellResult] = None

    @property
    def accepted(self) -> List[CellResult]:
        return [c for c in self.cells if c.accepted]

    @property
    def feasible(self) -> bool:
        return self.selected is not None

    def failure_histogram(self) -> Dict[str, int]:
        histogram = {"test_inclusion": 0, "m_esv": 0, "negative_exclusion": 0, "training_error": 0}
        for cell in self.cells:
            for name in cell.failures():
                histogram[name] += 1
        return histogram

    def raise_if_infeasible(self):
        if not self.feasible:
            raise NoFeasibleHyperparametersError(self.failure_histogram())

    def to_dict(self) -> Dict:
        selected = None
        if self.selected is not None:
            selected = {"nu": self.selected.nu, "sigma": self.selected.sigma, "area": self.selected.area}
        return {
            "version": REPORT_VERSION,
            "grid": self.grid.to_dict(),
            "mesv": self.mesv.to_dict(),
            "offset": self.offset,
            "rounds": self.rounds,
            "cells": [c.to_dict() for c in self.cells],
            "accepted": [[c.nu, c.sigma] for c in self.accepted],
            "selected": selected,
            "feasible": self.feasible,
            "failure_histogram": self.failure_histogram(),
        }

    def save_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)
        return path

    def save_csv(self, path: Union[str, Path]) -> Path:
        """Pass/fail matrix, rows nu, columns sigma (1 accepted, 0 rejected, empty unevaluated)"""
        df = pd.DataFrame([{"nu": c.nu, "sigma": c.sigma, "accepted": int(c.accepted)} for c in self.cells])
        matrix = df.pivot_table(index="nu", columns="sigma", values="accepted", aggfunc="max")
        matrix.to_csv(path, float_format="%.17g")
        return Path(path)


def lattice_axis_count(dimension: int, points: int = 64) -> int:
    """Per-axis count, reduced in high dimension to keep at most 64^3 lattice points"""
    if dimension <= 3:
        return points
    return max(2, min(points, int(math.floor(LATTICE_BUDGET ** (1.0 / dimension)))))


def evaluation_lattice(data: RomDataset, points: int = 64, padding: float = 20.0) -> Tuple[np.ndarray, float]:
    """Cell centers over the padded data bounding box and the volume of one cell"""
    lo = data.samples.min(axis=0) - padding
    hi = data.samples.max(axis=0) + padding
    count = lattice_axis_count(data.dimension, points)
    step = (hi - lo) / count
    axes = [lo[k] + (np.arange(count) + 0.5) * step[k] for k in range(data.dimension)]
    mesh = np.meshgrid(*axes, indexing='ij')
    lattice = np.ascontiguousarray(np.stack([g.ravel() for g in mesh], axis=1))
    return lattice, float(np.prod(step))


def boundary_change(a: OcsvmModel, b: OcsvmModel, lattice: np.ndarray) -> float:
    """Fraction of lattice points labelled differently (inside = Gamma > 0)"""
    return float(np.mean((a.decision_function(lattice) > 0) != (b.decision_function(lattice) > 0)))


def _refine_axis(axis: np.ndarray, accepted_idx: np.ndarray, max_count: int) -> np.ndarray:
    lo = max(int(accepted_idx.min()) - 1, 0)
    hi = min(int(accepted_idx.max()) + 1, len(axis) - 1)
    count = min(2 * (hi - lo) + 1, max_count)
    return np.geomspace(axis[lo], axis[hi], count)


def _canonical(nu: float, sigma: float) -> Tuple[float, float]:
    """Grid coordinates rounded so refined axes hit cached cells"""
    return float(f"{nu:.12g}"), float(f"{sigma:.12g}")


def _select(cells: List[CellResult]) -> Optional[CellResult]:
    """Smallest enclosed area; ties go to larger nu, then smaller sigma"""
    accepted = [c for c in cells if c.accepted]
    if not accepted:
        return None
    return min(accepted, key=lambda c: (c.area, -c.nu, c.sigma))


class _CellEvaluator:
    def __init__(self, train_data: RomDataset, test_data: RomDataset, mesv: MEsvConfig,
                 negatives: np.ndarray, lattice: np.ndarray, cell_volume: float):
        self.train_data = train_data
        self.test_data = test_data
        self.mesv = mesv
        self.negatives = negatives
        self.lattice = lattice
        self.cell_volume = cell_volume

    def __call__(self, job: Tuple[float, float, int]) -> CellResult:
        nu, sigma, round_index = job
        cell = CellResult(nu=nu, sigma=sigma, round_index=round_index)
        try:
            model = train(self.train_data, TrainConfig.of(nu, sigma))
        except RomError as e:
            cell.error = str(e)
            logger.log_cell_evaluated(nu, sigma, False, "error")
            return cell

        cell.model = model
        cell.n_support = model.n_support
        cell.inclusion = constraint_test_inclusion(model, self.test_data)
        cell.m_esv = m_esv_check(model, self.train_data, self.mesv)
        cell.negatives = constraint_negative_exclusion(model, self.negatives)
        inside = model.decision_function(self.lattice) > 0
        cell.area = float(np.count_nonzero(inside)) * self.cell_volume
        if not cell.accepted:
            cell.model = None
        logger.log_cell_evaluated(nu, sigma, cell.accepted, cell.flags())
        return cell


def grid_search(train_data: RomDataset, test_data: RomDataset, grid: GridConfig,
                mesv: Optional[MEsvConfig] = None, offset: float = 5.0, workers: Optional[int] = None,
                progress_callback: Optional[ProgressCallback] = None) -> TuningReport:
    """
    Evaluate the grid, refine around the accepted region and select the
    tightest accepted boundary. An empty accepted set is reported, not raised;
    call TuningReport.raise_if_infeasible() to turn it into an error.
    """
    if len(train_data) < 2:
        raise RejectedInputError("grid search needs at least 2 training samples")
    if len(test_data) == 0:
        raise RejectedInputError("grid search needs a nonempty test set")
    if train_data.dimension != test_data.dimension:
        raise DimensionMismatchError(train_data.dimension, test_data.dimension, "test dataset")

    mesv = mesv or MEsvConfig.from_data(train_data)
    workers = workers or get_settings().workers
    negatives = make_negative_samples(train_data, offset)
    lattice, cell_volume = evaluation_lattice(train_data, grid.lattice_points, grid.lattice_padding)
    evaluate = _CellEvaluator(train_data, test_data, mesv, negatives, lattice, cell_volume)

    logger.info(
        f"Grid search on {len(train_data)} training / {len(test_data)} test samples, "
        f"M-ESV radius {mesv.radius:.3g}, {workers} workers"
    )

    nu_axis, sigma_axis = grid.nu_axis(), grid.sigma_axis()
    cache: Dict[Tuple[float, float], CellResult] = {}
    rounds: List[Dict] = []
    selected: Optional[CellResult] = None
    total_rounds = grid.rounds + 1

    with ThreadPoolExecutor(max_workers=workers) as executor:
        for round_index in range(total_rounds):
            keys = list(dict.fromkeys(_canonical(nu, sigma) for nu, sigma in itertools.product(nu_axis, sigma_axis)))
            jobs = [(nu, sigma, round_index) for nu, sigma in keys if (nu, sigma) not in cache]

            for done, cell in enumerate(executor.map(evaluate, jobs), start=1):
                cache[(cell.nu, cell.sigma)] = cell
                if progress_callback:
                    percent = int(100 * (round_index + done / max(len(jobs), 1)) / total_rounds)
                    progress_callback(percent, f"round {round_index}: cell {done}/{len(jobs)}")

            round_cells = [cache[k] for k in keys]
            previous = selected
            selected = _select(list(cache.values()))
            change = None
            if previous is not None and selected is not None:
                change = 0.0 if previous is selected else boundary_change(previous.model, selected.model, lattice)

            accepted_here = [c for c in round_cells if c.accepted]
            rounds.append({
                "round": round_index,
                "nu_axis": nu_axis.tolist(),
                "sigma_axis": sigma_axis.tolist(),
                "evaluated": len(jobs),
                "accepted": len(accepted_here),
                "boundary_change": change,
            })
            logger.log_tuning_round(round_index, len(jobs), len(accepted_here), change)

            if not accepted_here:
                break
            if change is not None and change < grid.change_threshold:
                break
            if round_index + 1 < total_rounds:
                nu_idx = np.array([int(np.argmin(np.abs(nu_axis - c.nu))) for c in accepted_here])
                sigma_idx = np.array([int(np.argmin(np.abs(sigma_axis - c.sigma))) for c in accepted_here])
                nu_axis = _refine_axis(nu_axis, nu_idx, grid.max_axis_count)
                sigma_axis = _refine_axis(sigma_axis, sigma_idx, grid.max_axis_count)

    cells = sorted(cache.values(), key=lambda c: (c.round_index, c.nu, c.sigma))
    report = TuningReport(grid=grid, mesv=mesv, offset=offset, cells=cells, rounds=rounds, selected=selected)

    if report.feasible:
        logger.info(f"Selected nu={selected.nu:.4g}, sigma={selected.sigma:.4g} "
                    f"({len(report.accepted)} accepted of {len(cells)} cells)")
    else:
        logger.warning(f"No feasible hyperparameters: {report.failure_histogram()}")
    if progress_callback:
        progress_callback(100, "grid search complete")
    return report
