import numpy as np
import pytest
from scipy.spatial import ConvexHull

from rom_boundary.constraints import (
    MEsvConfig,
    constraint_negative_exclusion,
    constraint_test_inclusion,
    edge_sv_test,
    m_esv_check,
    make_negative_samples,
    nearest_neighbor_scale,
)
from rom_boundary.dataset import Provenance, RomDataset
from rom_boundary.errors import DimensionMismatchError, RejectedInputError
from rom_boundary.ocsvm import KernelParams, OcsvmModel, TrainConfig, TrainingInfo, train
from rom_boundary.shapes import synth_shape


@pytest.fixture(scope="module")
def inner_test_set():
    data, _ = synth_shape("disk", 200, seed=21, radius=40.0, provenance=Provenance.TEST)
    return data


# edge support vector test

def test_edge_sv_matches_convex_hull_membership():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(8, 31))
        points = rng.uniform(-1.0, 1.0, size=(n, 2))
        vertices = set(ConvexHull(points).vertices.tolist())
        for k in range(n):
            others = np.delete(points, k, axis=0)
            result = edge_sv_test(points[k], others, max_misclassified=0, min_neighbors=1)
            assert result.edge == (k in vertices)


def test_interior_hull_point_of_fifty():
    rng = np.random.default_rng(50)
    points = rng.uniform(-10.0, 10.0, size=(50, 2))
    hull = ConvexHull(points).vertices
    vertex = int(hull[0])
    assert edge_sv_test(points[vertex], np.delete(points, vertex, axis=0)).edge

    center = int(np.argmin(np.linalg.norm(points - points.mean(axis=0), axis=1)))
    assert edge_sv_test(points[center], np.delete(points, center, axis=0)).interior


def test_misclassification_allowance_drops_one_neighbour():
    sv = np.zeros(2)
    neighbors = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, -1.0], [2.0, 0.5], [-1.0, 0.0]])

    strict = edge_sv_test(sv, neighbors, max_misclassified=0)
    assert strict.interior
    assert strict.dropped == 0

    lenient = edge_sv_test(sv, neighbors, max_misclassified=1)
    assert lenient.edge
    assert lenient.dropped == 1


def test_surrounded_point_stays_interior_with_allowance():
    angles = np.linspace(0.0, 2 * np.pi, 12, endpoint=False)
    ring = np.column_stack([np.cos(angles), np.sin(angles)])
    assert edge_sv_test(np.zeros(2), ring, max_misclassified=2).interior


def test_sparse_neighbourhood_is_low_confidence_edge():
    result = edge_sv_test(np.zeros(2), [[1.0, 0.0], [-1.0, 0.0]], min_neighbors=5)
    assert result.edge
    assert result.low_confidence


def test_edge_sv_input_validation():
    with pytest.raises(RejectedInputError):
        edge_sv_test(np.zeros(2), np.empty((0, 2)))
    with pytest.raises(RejectedInputError):
        edge_sv_test(np.zeros(2), [[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(DimensionMismatchError):
        edge_sv_test(np.zeros(2), [[1.0, 0.0, 0.0]])


def test_edge_sv_in_three_dimensions():
    corners = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    assert edge_sv_test(np.zeros(3), corners).interior
    assert edge_sv_test(np.array([0.0, 0.0, 2.0]), corners).edge


# M-ESV

def test_mesv_config_defaults(disk):
    data, _ = disk
    cfg = MEsvConfig.from_data(data)
    assert cfg.radius == pytest.approx(4.0 * nearest_neighbor_scale(data))
    assert cfg.max_misclassified == 1
    assert cfg.min_neighbors == 5
    assert cfg.interior_limit(10) == 2
    assert cfg.interior_limit(11) == 3
    assert MEsvConfig(radius=1.0, max_interior=0).interior_limit(100) == 0


def test_mesv_config_validation():
    with pytest.raises(RejectedInputError):
        MEsvConfig(radius=0.0)
    with pytest.raises(RejectedInputError):
        MEsvConfig(radius=1.0, max_misclassified=-1)
    with pytest.raises(RejectedInputError):
        MEsvConfig(radius=1.0, interior_fraction=1.5)


def test_smooth_boundary_passes_mesv(disk, disk_model):
    data, _ = disk
    result = m_esv_check(disk_model, data, MEsvConfig.from_data(data))
    assert result.passed, result.message
    assert result.details["interior_count"] <= result.details["limit"]


def test_overfit_boundary_fails_mesv(disk):
    data, _ = disk
    model = train(data, TrainConfig.of(0.02, 1.0))
    result = m_esv_check(model, data, MEsvConfig.from_data(data))
    assert not result.passed
    assert len(result.offending) == result.details["interior_count"]
    assert result.details["interior_count"] > result.details["limit"]


def test_concave_crescent_separates_smooth_from_overfit():
    data, _ = synth_shape("crescent", 500, seed=4)
    cfg = MEsvConfig.from_data(data)

    smooth = m_esv_check(train(data, TrainConfig.of(0.02, 20.0)), data, cfg)
    assert smooth.passed, smooth.message

    overfit = m_esv_check(train(data, TrainConfig.of(0.02, 5.0)), data, cfg)
    assert not overfit.passed
    assert overfit.details["interior_count"] > overfit.details["limit"]


def test_single_support_vector_passes_trivially(disk):
    data, _ = disk
    model = OcsvmModel(
        support_vectors=np.zeros((1, 2)),
        alphas=np.ones(1),
        rho=0.5,
        kernel=KernelParams(30.0),
        nu=1.0,
        training=TrainingInfo(m=1, sv_fraction=1.0),
    )
    assert m_esv_check(model, data, MEsvConfig(radius=10.0, max_interior=0)).passed


# test inclusion

def test_inclusion_passes_on_held_out_interior(disk_model, inner_test_set):
    result = constraint_test_inclusion(disk_model, inner_test_set)
    assert result.passed
    assert result.details["excluded_count"] == 0
    assert result.details["min_gamma"] >= 0.0


def test_inclusion_reports_points_outside(disk_model):
    far = RomDataset.from_array([[0.0, 0.0], [90.0, 0.0], [0.0, 95.0]], provenance=Provenance.TEST)
    result = constraint_test_inclusion(disk_model, far)
    assert not result.passed
    assert result.details["excluded_count"] == 2
    assert result.offending.shape == (2, 2)


def test_inclusion_input_checks(disk_model):
    with pytest.raises(RejectedInputError):
        constraint_test_inclusion(disk_model, RomDataset.from_array(np.empty((0, 2))))
    with pytest.raises(DimensionMismatchError):
        constraint_test_inclusion(disk_model, RomDataset.from_array(np.zeros((3, 3))))


# negative exclusion

def test_negative_samples_layout():
    data = RomDataset.from_array([[0.0, 0.0], [10.0, 20.0]])
    negatives = make_negative_samples(data, offset=5.0)
    expected = np.array([[-5.0, 10.0], [15.0, 10.0], [5.0, -5.0], [5.0, 25.0]])
    assert np.array_equal(negatives, expected)


def test_negative_offset_must_be_positive(disk):
    data, _ = disk
    with pytest.raises(RejectedInputError):
        make_negative_samples(data, offset=0.0)


def test_tight_boundary_excludes_negatives(disk, disk_model):
    data, _ = disk
    result = constraint_negative_exclusion(disk_model, make_negative_samples(data))
    assert result.passed
    assert result.details["max_gamma"] < 0


def test_underfit_boundary_admits_negatives(ellipse):
    data, _ = ellipse
    model = train(data, TrainConfig.of(0.02, 1e3))
    result = constraint_negative_exclusion(model, make_negative_samples(data))
    assert not result.passed
    assert result.details["admitted_count"] >= 1


def test_negative_exclusion_needs_points(disk_model):
    with pytest.raises(RejectedInputError):
        constraint_negative_exclusion(disk_model, np.empty((0, 2)))
