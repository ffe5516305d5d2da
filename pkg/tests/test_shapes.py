import math

import numpy as np
import pytest

from rom_boundary.dataset import Provenance
from rom_boundary.errors import RejectedInputError
from rom_boundary.shapes import SHAPES, AnnulusSector, Crescent, Disk, Ellipse, lens_area, make_shape, synth_shape


def test_closed_form_areas():
    assert Disk().area == pytest.approx(7853.98, abs=0.01)
    assert Ellipse().area == pytest.approx(5654.87, abs=0.01)
    assert AnnulusSector().area == pytest.approx(0.75 * math.pi * (60.0 ** 2 - 20.0 ** 2))


def test_lens_area_limits():
    assert lens_area(10.0, 5.0, 20.0) == 0.0
    assert lens_area(10.0, 5.0, 2.0) == pytest.approx(math.pi * 25.0)
    # two unit circles one radius apart
    assert lens_area(1.0, 1.0, 1.0) == pytest.approx(2 * math.pi / 3 - math.sqrt(3) / 2)


@pytest.mark.parametrize("name", sorted(SHAPES))
def test_area_matches_monte_carlo(name):
    shape = make_shape(name)
    lo, hi = shape.bounds()
    points = np.random.default_rng(9).uniform(lo, hi, size=(400_000, 2))
    estimate = np.mean(shape.contains(points)) * np.prod(hi - lo)
    assert estimate == pytest.approx(shape.area, rel=0.01)


def test_containment():
    assert Disk().contains(np.array([[0.0, 0.0], [50.0, 0.0], [50.1, 0.0]])).tolist() == [True, True, False]
    assert Ellipse().contains(np.array([[59.0, 0.0], [0.0, 31.0]])).tolist() == [True, False]
    sector = AnnulusSector()
    assert sector.contains(np.array([[0.0, 40.0], [-10.0, -40.0], [10.0, 0.0], [30.0, -30.0]])).tolist() == \
        [True, True, False, False]
    crescent = Crescent()
    assert crescent.contains(np.array([[-45.0, 0.0], [30.0, 0.0]])).tolist() == [True, False]


def test_samples_lie_inside_and_are_reproducible():
    data, area = synth_shape("crescent", 300, seed=4)
    again, _ = synth_shape("crescent", 300, seed=4)
    other, _ = synth_shape("crescent", 300, seed=5)

    assert len(data) == 300
    assert area == pytest.approx(Crescent().area)
    assert Crescent().contains(data.samples).all()
    assert np.array_equal(data.samples, again.samples)
    assert not np.array_equal(data.samples, other.samples)


def test_synthetic_dataset_metadata():
    data, _ = synth_shape("ellipse", 60, seed=0, dofs=(1, 3), provenance=Provenance.TEST, a=20.0, b=10.0)
    assert data.dofs == (1, 3)
    assert set(data.provenance) == {Provenance.TEST}
    assert np.all(np.abs(data.samples[:, 0]) <= 20.0)
    assert np.all(np.abs(data.samples[:, 1]) <= 10.0)


def test_bad_requests():
    with pytest.raises(RejectedInputError):
        synth_shape("disk", 49)
    with pytest.raises(RejectedInputError):
        synth_shape("triangle", 100)
    with pytest.raises(RejectedInputError):
        make_shape("disk", radius=-1.0)
    with pytest.raises(RejectedInputError):
        make_shape("disk", width=3.0)
    with pytest.raises(RejectedInputError):
        Crescent(radius=50.0, cut_radius=40.0, offset=5.0)
