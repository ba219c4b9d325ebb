import numpy as np
import pytest

from screenmesh import synthetic
from screenmesh.camera import CameraModel

# acceptance results collected by test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ortho():
    return CameraModel()


@pytest.fixture(scope="session")
def sphere256():
    return synthetic.render(synthetic.sphere(256, 100.0))


@pytest.fixture(scope="session")
def sphere64():
    return synthetic.render(synthetic.sphere(64, 24.0))


def radial_mask(shape, radius, center=None):
    H, W = shape
    cy, cx = (H / 2.0, W / 2.0) if center is None else center
    vv, uu = np.mgrid[0:H, 0:W]
    return np.hypot(uu + 0.5 - cx, vv + 0.5 - cy) < radius
