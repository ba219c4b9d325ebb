import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from screenmesh.image_io import (
    DepthMap,
    NormalMap,
    _write_png16,
    decode_png16,
    encode_png16,
    gaussian_blur_normals,
    load_depth_map,
    load_normal_map,
    read_pfm,
    save_depth_map,
    save_normal_map,
    write_pfm,
)


def _png(tmp_path, codes, name="n.png"):
    path = tmp_path / name
    _write_png16(path, np.asarray(codes, dtype=np.uint16))
    return path


def test_decode_tilted_pixel(tmp_path):
    nm = load_normal_map(_png(tmp_path, [[[65535, 32767, 65535]]]))
    raw = np.array([1.0, 2 * 32767 / 65535 - 1, 1.0])
    assert raw[1] == pytest.approx(-1.526e-5, rel=1e-3)
    np.testing.assert_allclose(nm.normals[0, 0], raw / np.linalg.norm(raw), atol=1e-12)
    np.testing.assert_allclose(nm.normals[0, 0], [0.7071, -1.08e-5, 0.7071], atol=1e-4)
    assert nm.mask[0, 0]


def test_decode_midcode_rgba_foreground(tmp_path):
    nm = load_normal_map(_png(tmp_path, [[[32767, 32767, 65535, 65535]]]))
    assert nm.mask[0, 0]
    np.testing.assert_allclose(nm.normals[0, 0], [0, 0, 1], atol=1e-4)


def test_alpha_zero_is_background(tmp_path):
    nm = load_normal_map(_png(tmp_path, [[[32767, 32767, 65535, 0], [32767, 32767, 65535, 65535]]]))
    assert not nm.mask[0, 0] and nm.mask[0, 1]
    assert np.all(nm.normals[0, 0] == 0)


def test_zero_length_is_reported_not_fatal():
    n = np.zeros((2, 2, 3))
    n[..., 2] = 1.0
    n[0, 0] = 0.0
    nm = NormalMap.from_arrays(n)
    assert nm.report.zero_length == 1
    assert nm.n_foreground == 3


def test_grazing_and_backfacing_removed():
    n = np.array([[[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 0.0, 1.0]]])
    nm = NormalMap.from_arrays(n)
    assert nm.mask.tolist() == [[False, False, True]]
    assert nm.report.grazing == 2


def test_rejects_8bit_png(tmp_path):
    import png

    path = tmp_path / "n8.png"
    with open(path, "wb") as fh:
        png.Writer(1, 1, greyscale=False, bitdepth=8).write(fh, [[128, 128, 255]])
    with pytest.raises(ValueError):
        load_normal_map(path)


def test_png_roundtrip_is_identity_on_quantised(tmp_path):
    rng = np.random.default_rng(0)
    n = rng.normal(size=(8, 9, 3))
    n[..., 2] = np.abs(n[..., 2]) + 0.5
    nm = NormalMap.from_arrays(n)
    save_normal_map(nm, tmp_path / "a.png")
    a = load_normal_map(tmp_path / "a.png")
    save_normal_map(a, tmp_path / "b.png")
    b = load_normal_map(tmp_path / "b.png")
    assert np.array_equal(a.mask, b.mask)
    codes_a = encode_png16(a.normals)
    codes_b = encode_png16(b.normals)
    assert np.array_equal(codes_a, codes_b)


@given(arrays(np.uint16, (5, 3)))
def test_decode_encode_identity(codes):
    assert np.array_equal(encode_png16(decode_png16(codes)), codes)


def test_pfm_normals_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    n = rng.normal(size=(5, 7, 3))
    n[..., 2] = np.abs(n[..., 2]) + 0.1
    nm = NormalMap.from_arrays(n)
    save_normal_map(nm, tmp_path / "n.pfm")
    back = load_normal_map(tmp_path / "n.pfm")
    assert np.array_equal(back.mask, nm.mask)
    np.testing.assert_allclose(back.normals, nm.normals, atol=1e-6)


def test_depth_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    d = rng.normal(size=(6, 4)).astype(np.float32).astype(np.float64)
    m = rng.random((6, 4)) > 0.3
    save_depth_map(DepthMap(d, m), tmp_path / "d.pfm")
    back = load_depth_map(tmp_path / "d.pfm")
    assert np.array_equal(back.mask, m)
    assert np.array_equal(back.depth[m], d[m])


def test_all_background_depth_is_nan(tmp_path):
    save_depth_map(DepthMap(np.ones((3, 3)), np.zeros((3, 3), bool)), tmp_path / "d.pfm")
    assert np.all(np.isnan(read_pfm(tmp_path / "d.pfm")))


def test_single_pixel_depth_payload(tmp_path):
    path = tmp_path / "d.pfm"
    save_depth_map(DepthMap(np.array([[2.5]]), np.array([[True]])), path)
    raw = path.read_bytes()
    assert raw.startswith(b"Pf\n1 1\n-1")
    assert np.frombuffer(raw[-4:], "<f4")[0] == 2.5


def test_pfm_row_order(tmp_path):
    img = np.arange(6, dtype=np.float64).reshape(2, 3)
    write_pfm(tmp_path / "x.pfm", img)
    assert np.array_equal(read_pfm(tmp_path / "x.pfm"), img)
    payload = np.frombuffer((tmp_path / "x.pfm").read_bytes()[-24:], "<f4")
    # bottom scanline first
    assert payload.tolist() == [3, 4, 5, 0, 1, 2]


def test_blur_constant_unchanged():
    n = np.zeros((10, 12, 3))
    n[..., 2] = 1.0
    out = gaussian_blur_normals(NormalMap.from_arrays(n))
    np.testing.assert_allclose(out.normals, n, atol=1e-12)


def test_blur_isolated_pixel_unchanged():
    n = np.zeros((5, 5, 3))
    n[2, 2] = [0.3, 0.4, np.sqrt(0.75)]
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    out = gaussian_blur_normals(NormalMap.from_arrays(n, m))
    np.testing.assert_allclose(out.normals[2, 2], n[2, 2], atol=1e-12)
    assert np.array_equal(out.mask, m)


def test_blur_two_pixels_average():
    s = 1 / np.sqrt(2)
    n = np.array([[[s, 0, s], [-s, 0, s]]])
    out = gaussian_blur_normals(NormalMap.from_arrays(n), sigma=50.0)
    np.testing.assert_allclose(out.normals[0], [[0, 0, 1], [0, 0, 1]], atol=1e-3)


def _random_map(seed, shape=(16, 16), symmetric=False):
    rng = np.random.default_rng(seed)
    n = rng.normal(size=shape + (3,))
    n[..., 2] = np.abs(n[..., 2]) + 0.5
    m = rng.random(shape) > 0.2
    if symmetric:
        m = m & m[:, ::-1]
    return NormalMap.from_arrays(n, m)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_blur_preserves_mask_and_unit_length(seed):
    nm = _random_map(seed)
    out = gaussian_blur_normals(nm)
    assert np.array_equal(out.mask, nm.mask)
    np.testing.assert_allclose(np.linalg.norm(out.normals[out.mask], axis=1), 1.0, atol=1e-6)
    assert np.all(out.normals[~out.mask] == 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_blur_commutes_with_mirror(seed):
    nm = _random_map(seed, symmetric=True)
    a = gaussian_blur_normals(nm.fliplr())
    b = gaussian_blur_normals(nm).fliplr()
    np.testing.assert_allclose(a.normals, b.normals, atol=1e-6)
