import os
import tempfile

# keep test logs out of the package directory; must run before rom_boundary is imported
os.environ.setdefault("ROM_LOG_DIR", tempfile.mkdtemp(prefix="rom_boundary_logs_"))
os.environ.setdefault("ROM_LOG_LEVEL", "WARNING")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from rom_boundary.dataset import Provenance  # noqa: E402
from rom_boundary.ocsvm import TrainConfig, train  # noqa: E402
from rom_boundary.shapes import synth_shape  # noqa: E402


@pytest.fixture(scope="session")
def disk():
    """500 samples of a radius-50 disk and its area"""
    return synth_shape("disk", 500, seed=1)


@pytest.fixture(scope="session")
def disk_test():
    """Held-out samples well inside the disk"""
    data, _ = synth_shape("disk", 300, seed=2, radius=48.0, provenance=Provenance.TEST)
    return data


@pytest.fixture(scope="session")
def ellipse():
    return synth_shape("ellipse", 400, seed=3)


@pytest.fixture(scope="session")
def disk_model(disk):
    data, _ = disk
    return train(data, TrainConfig.of(0.02, 20.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
