import json
import math

import numpy as np
import pandas as pd
import pytest

from rom_boundary.constraints import ConstraintResult, MEsvConfig
from rom_boundary.dataset import Provenance, RomDataset
from rom_boundary.errors import DimensionMismatchError, NoFeasibleHyperparametersError, RejectedInputError
from rom_boundary.metrics import pair_area
from rom_boundary.ocsvm import TrainConfig, train
from rom_boundary.shapes import synth_shape
from rom_boundary.tuning import (
    CellResult,
    GridConfig,
    _canonical,
    _refine_axis,
    _select,
    boundary_change,
    evaluation_lattice,
    grid_search,
    lattice_axis_count,
)

COARSE = GridConfig(nu_range=(0.005, 0.2), nu_count=5, sigma_range=(1.0, 1000.0), sigma_count=7, rounds=1)


def passed(name: str) -> ConstraintResult:
    return ConstraintResult(name=name, passed=True, message="")


def failed(name: str) -> ConstraintResult:
    return ConstraintResult(name=name, passed=False, message="")


def accepted_cell(nu: float, sigma: float, area: float) -> CellResult:
    return CellResult(nu=nu, sigma=sigma, round_index=0, inclusion=passed("test_inclusion"),
                      m_esv=passed("m_esv"), negatives=passed("negative_exclusion"), area=area)


@pytest.fixture(scope="module")
def disk_report(disk, disk_test):
    data, _ = disk
    progress = []
    report = grid_search(data, disk_test, COARSE, workers=4,
                         progress_callback=lambda percent, message: progress.append(percent))
    return report, progress


# configuration

def test_grid_config_validation():
    with pytest.raises(RejectedInputError):
        GridConfig(nu_range=(0.0, 0.5))
    with pytest.raises(RejectedInputError):
        GridConfig(nu_range=(0.5, 0.1))
    with pytest.raises(RejectedInputError):
        GridConfig(sigma_range=(-1.0, 10.0))
    with pytest.raises(RejectedInputError):
        GridConfig(nu_count=1)
    with pytest.raises(RejectedInputError):
        GridConfig(rounds=5)


def test_default_axes_are_geometric():
    grid = GridConfig()
    assert np.allclose(grid.sigma_axis(), [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3])
    nu = grid.nu_axis()
    assert nu[0] == pytest.approx(0.001) and nu[-1] == pytest.approx(0.5)
    assert np.allclose(nu[1:] / nu[:-1], nu[1] / nu[0])


# lattice and helpers

def test_lattice_axis_count_keeps_budget():
    assert lattice_axis_count(2) == 64
    assert lattice_axis_count(3) == 64
    assert lattice_axis_count(4) == 22
    assert lattice_axis_count(7) == 5
    for n in range(4, 8):
        assert lattice_axis_count(n) ** n <= 64 ** 3


def test_evaluation_lattice_uses_cell_centers():
    data = RomDataset.from_array([[0.0, 0.0], [10.0, 10.0]])
    lattice, volume = evaluation_lattice(data, points=4, padding=0.0)
    assert lattice.shape == (16, 2)
    assert volume == pytest.approx(6.25)
    assert np.allclose(np.unique(lattice[:, 0]), [1.25, 3.75, 6.25, 8.75])


def test_boundary_change_of_identical_models_is_zero(disk, disk_model):
    data, _ = disk
    lattice, _ = evaluation_lattice(data)
    assert boundary_change(disk_model, disk_model, lattice) == 0.0


def test_refine_axis_takes_bbox_plus_one_at_double_resolution():
    axis = np.geomspace(1.0, 1000.0, 7)
    refined = _refine_axis(axis, np.array([2, 3]), max_count=17)
    assert len(refined) == 7
    assert refined[0] == pytest.approx(axis[1])
    assert refined[-1] == pytest.approx(axis[4])

    clipped = _refine_axis(axis, np.array([0, 6]), max_count=9)
    assert len(clipped) == 9
    assert clipped[0] == pytest.approx(axis[0]) and clipped[-1] == pytest.approx(axis[6])


def test_canonical_keys_absorb_float_noise():
    assert _canonical(0.30000000000000004, 10.000000000000002) == (0.3, 10.0)


def test_selection_prefers_smallest_area_then_larger_nu_then_smaller_sigma():
    cells = [
        accepted_cell(0.01, 10.0, 8000.0),
        accepted_cell(0.01, 30.0, 7500.0),
        accepted_cell(0.05, 30.0, 7500.0),
        accepted_cell(0.05, 20.0, 7500.0),
    ]
    assert (_select(cells).nu, _select(cells).sigma) == (0.05, 20.0)

    rejected = CellResult(nu=0.2, sigma=5.0, round_index=0, inclusion=failed("test_inclusion"),
                          m_esv=passed("m_esv"), negatives=passed("negative_exclusion"), area=10.0)
    assert _select([rejected]) is None
    assert _select(cells + [rejected]).area == 7500.0


def test_cell_failures_and_flags():
    cell = CellResult(nu=0.1, sigma=1.0, round_index=0, inclusion=passed("test_inclusion"),
                      m_esv=failed("m_esv"), negatives=failed("negative_exclusion"))
    assert not cell.accepted
    assert cell.failures() == ["m_esv", "negative_exclusion"]
    assert cell.flags() == "PFF"

    broken = CellResult(nu=0.1, sigma=1.0, round_index=0, error="did not converge")
    assert broken.failures() == ["training_error"]
    assert broken.to_dict()["error"] == "did not converge"


# grid search

def test_grid_search_input_checks(disk):
    data, _ = disk
    with pytest.raises(RejectedInputError):
        grid_search(data, RomDataset.from_array(np.empty((0, 2))), COARSE)
    with pytest.raises(DimensionMismatchError):
        grid_search(data, RomDataset.from_array(np.zeros((3, 3))), COARSE)


@pytest.mark.slow
def test_disk_grid_has_accepted_region(disk_report):
    report, _ = disk_report
    assert report.feasible
    assert report.selected in report.accepted
    assert all(cell.accepted for cell in report.accepted)
    # a disk is fit by any smooth scale; only the overfit end is ruled out
    assert report.selected.sigma >= 3.0


@pytest.mark.slow
def test_selected_boundary_recovers_disk_area(disk, disk_report):
    _, true_area = disk
    report, _ = disk_report
    assert report.selected.area == pytest.approx(true_area, rel=0.10)
    area = pair_area(report.selected.model)
    assert area.area == pytest.approx(true_area, rel=0.10)


@pytest.mark.slow
def test_small_sigma_overfits(disk_report):
    report, _ = disk_report
    overfit = [c for c in report.cells if c.sigma == 1.0 and c.error is None]
    assert overfit
    assert all("m_esv" in c.failures() for c in overfit)


def test_enclosed_area_shrinks_with_sigma(disk):
    data, _ = disk
    sigmas = (80.0, 40.0, 20.0, 10.0, 5.0)
    areas = [pair_area(train(data, TrainConfig.of(0.02, s)), resolution=256).area for s in sigmas]
    inversions = sum(later > earlier for earlier, later in zip(areas, areas[1:]))
    assert inversions <= 1, areas
    assert areas[-1] < areas[0]


@pytest.mark.slow
def test_refinement_stays_inside_first_grid(disk_report):
    report, _ = disk_report
    assert 1 <= len(report.rounds) <= 2
    first = report.rounds[0]
    assert first["evaluated"] == 35
    assert first["boundary_change"] is None
    if len(report.rounds) == 2:
        second = report.rounds[1]
        assert min(second["sigma_axis"]) >= min(first["sigma_axis"]) * (1 - 1e-9)
        assert max(second["sigma_axis"]) <= max(first["sigma_axis"]) * (1 + 1e-9)
        assert second["boundary_change"] is not None


@pytest.mark.slow
def test_progress_reaches_completion(disk_report):
    _, progress = disk_report
    assert progress[-1] == 100
    assert progress == sorted(progress)


@pytest.mark.slow
def test_report_files(disk_report, tmp_path):
    report, _ = disk_report
    data = json.loads(report.save_json(tmp_path / "report.json").read_text())
    assert data["version"] == "1.0"
    assert data["feasible"] is True
    assert data["selected"]["sigma"] == report.selected.sigma
    assert len(data["cells"]) == len(report.cells)
    assert sum(data["failure_histogram"].values()) >= len(report.cells) - len(report.accepted)
    assert [report.selected.nu, report.selected.sigma] in data["accepted"]

    matrix = pd.read_csv(report.save_csv(tmp_path / "matrix.csv"), index_col=0)
    assert matrix.shape[0] == len({c.nu for c in report.cells})
    assert set(np.unique(matrix.to_numpy()[~np.isnan(matrix.to_numpy())])) <= {0.0, 1.0}


@pytest.mark.slow
def test_large_sigma_underfits_elongated_shape(ellipse):
    data, _ = ellipse
    test, _ = synth_shape("ellipse", 200, seed=31, a=56.0, b=28.0, provenance=Provenance.TEST)
    grid = GridConfig(nu_range=(0.005, 0.2), nu_count=3, sigma_range=(10.0, 1000.0), sigma_count=3, rounds=0)
    report = grid_search(data, test, grid, workers=2)

    underfit = [c for c in report.cells if c.sigma == 1000.0 and c.error is None]
    assert underfit
    assert all("negative_exclusion" in c.failures() for c in underfit)


@pytest.mark.slow
def test_ellipse_pipeline_recovers_area(ellipse):
    data, true_area = ellipse
    test, _ = synth_shape("ellipse", 200, seed=32, a=58.0, b=29.0, provenance=Provenance.TEST)
    report = grid_search(data, test, COARSE, workers=4)
    assert report.feasible
    assert pair_area(report.selected.model).area == pytest.approx(true_area, rel=0.10)


def test_single_sigma_grid_is_infeasible(disk, disk_test):
    data, _ = disk
    grid = GridConfig(nu_range=(0.01, 0.1), nu_count=2, sigma_range=(1.0, 1.0), sigma_count=2, rounds=0)
    report = grid_search(data, disk_test, grid, mesv=MEsvConfig.from_data(data), workers=2)

    assert not report.feasible
    assert len(report.cells) == 2
    histogram = report.failure_histogram()
    assert histogram["m_esv"] == 2
    with pytest.raises(NoFeasibleHyperparametersError) as info:
        report.raise_if_infeasible()
    assert info.value.histogram == histogram


def test_grid_search_is_deterministic_across_worker_counts(disk, disk_test):
    data, _ = disk
    grid = GridConfig(nu_range=(0.005, 0.05), nu_count=2, sigma_range=(10.0, 40.0), sigma_count=2, rounds=0)
    one = grid_search(data, disk_test, grid, workers=1)
    many = grid_search(data, disk_test, grid, workers=4)
    assert [c.to_dict() for c in one.cells] == [c.to_dict() for c in many.cells]
    assert math.isclose(one.cells[0].area, many.cells[0].area)
