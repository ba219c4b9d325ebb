import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from screenmesh.camera import CameraModel, parse_intrinsics, read_intrinsics_file


def test_orthographic_ray_is_ez():
    cam = CameraModel.orthographic()
    np.testing.assert_array_equal(cam.ray(np.array([[3.0, 7.0], [0.0, 0.0]])), [[0, 0, 1], [0, 0, 1]])


def test_perspective_identity_ray():
    cam = CameraModel.perspective(1, 1, 0, 0, mean_distance=1.0)
    np.testing.assert_allclose(cam.ray(np.array([0.0, 0.0])), [0, 0, 1])


def test_perspective_scaled_ray():
    cam = CameraModel.perspective(2, 2, 0, 0, mean_distance=1.0)
    np.testing.assert_allclose(cam.ray(np.array([4.0, 0.0])), [2, 0, 1])


@given(st.floats(-500, 500), st.floats(-500, 500))
def test_ray_homogeneous_consistent(u, v):
    cam = CameraModel.perspective(800, 760, 320, 240, mean_distance=400.0)
    p = cam.intrinsics @ cam.ray(np.array([u, v]))
    np.testing.assert_allclose(p / p[2], [u, v, 1], atol=1e-9)


def test_pixel_to_physical():
    assert CameraModel.orthographic(0.1).pixel_to_physical(10) == pytest.approx(1.0)
    assert CameraModel.orthographic(1.0).pixel_to_physical(7.5) == 7.5
    persp = CameraModel.perspective(1000, 1000, 0, 0, mean_distance=500.0)
    assert persp.pixel_pitch == pytest.approx(0.5)
    assert persp.pixel_to_physical(10) == pytest.approx(5.0)
    assert persp.physical_to_pixel(5.0) == pytest.approx(10.0)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_pixel_to_physical_linear(a, b):
    cam = CameraModel.orthographic(0.37)
    assert cam.pixel_to_physical(a + b) == pytest.approx(cam.pixel_to_physical(a) + cam.pixel_to_physical(b))


def test_invalid_cameras():
    with pytest.raises(ValueError):
        CameraModel.orthographic(0.0)
    with pytest.raises(ValueError):
        CameraModel.perspective(1, 1, 0, 0, mean_distance=-1.0)
    with pytest.raises(ValueError):
        CameraModel("perspective", np.zeros((3, 3)), 1.0)


def test_intrinsics_parsing(tmp_path):
    C = parse_intrinsics([500, 510, 320, 240])
    np.testing.assert_array_equal(C, [[500, 0, 320], [0, 510, 240], [0, 0, 1]])
    np.testing.assert_array_equal(parse_intrinsics(C.ravel()), C)
    path = tmp_path / "K.txt"
    path.write_text("500 0 320\n0 510 240\n0 0 1\n")
    np.testing.assert_array_equal(read_intrinsics_file(path), C)
    with pytest.raises(ValueError):
        parse_intrinsics([1, 2, 3])
