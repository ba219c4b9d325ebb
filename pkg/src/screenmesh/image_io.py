"""Normal maps, depth maps and their on-disk formats.

Normals are stored as ``(H, W, 3)`` float64 arrays in screen order: row index
``v`` grows downwards, column index ``u`` grows to the right. The pixel in row
``r`` and column ``c`` has its centre at screen position ``(c + 0.5, r + 0.5)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import png
from scipy import ndimage

logger = logging.getLogger(__name__)

#: Pixels whose decoded ``n_z`` does not exceed this value are dropped from the mask.
MIN_NZ = 1e-3
#: Default blur width in pixels.
DEFAULT_SIGMA = float(np.sqrt(2.0))

_PNG_MAX = 65535


@dataclass
class LoadReport:
    """Counts of foreground pixels rejected while decoding a normal map."""

    zero_length: int = 0
    grazing: int = 0
    non_finite: int = 0

    @property
    def rejected(self) -> int:
        return self.zero_length + self.grazing + self.non_finite


@dataclass
class NormalMap:
    """Per-pixel unit normals with a foreground mask.

    Use :meth:`from_arrays` to build one from raw data; it renormalises the
    normals, removes grazing and zero-length pixels from the mask and zeroes
    the background.
    """

    normals: np.ndarray
    mask: np.ndarray
    report: LoadReport = field(default_factory=LoadReport, compare=False)

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def n_foreground(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_arrays(cls, normals, mask=None, min_nz: float = MIN_NZ) -> "NormalMap":
        n = np.array(normals, dtype=np.float64)
        if n.ndim != 3 or n.shape[2] != 3:
            raise ValueError(f"normals must have shape (H, W, 3), got {n.shape}")
        if mask is None:
            m = np.ones(n.shape[:2], dtype=bool)
        else:
            m = np.array(mask, dtype=bool)
            if m.shape != n.shape[:2]:
                raise ValueError("mask shape does not match the normal map")

        report = LoadReport()
        finite = np.all(np.isfinite(n), axis=2)
        report.non_finite = int(np.count_nonzero(m & ~finite))
        m &= finite
        n[~finite] = 0.0

        length = np.linalg.norm(n, axis=2)
        zero = m & (length == 0.0)
        report.zero_length = int(zero.sum())
        m &= ~zero
        with np.errstate(invalid="ignore", divide="ignore"):
            n = np.where(m[..., None], n / length[..., None], 0.0)

        grazing = m & (n[..., 2] <= min_nz)
        report.grazing = int(grazing.sum())
        m &= ~grazing
        n[~m] = 0.0
        if report.rejected:
            logger.info("normal map: %d foreground pixels rejected (%s)", report.rejected, report)
        return cls(n, m, report)

    def fliplr(self) -> "NormalMap":
        """Mirror left-right; the x component of every normal changes sign."""
        n = self.normals[:, ::-1].copy()
        n[..., 0] *= -1.0
        n[~self.mask[:, ::-1]] = 0.0
        return NormalMap(n, self.mask[:, ::-1].copy())


@dataclass
class DepthMap:
    depth: np.ndarray
    mask: np.ndarray

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape


# --------------------------------------------------------------------------
# 16-bit PNG


def decode_png16(codes: np.ndarray) -> np.ndarray:
    """Map 16-bit codes to ``[-1, 1]`` with ``2 v / 65535 - 1`` (no renormalisation)."""
    return 2.0 * np.asarray(codes, dtype=np.float64) / _PNG_MAX - 1.0


def encode_png16(values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`decode_png16`, rounding to the nearest code."""
    v = np.rint((np.asarray(values, dtype=np.float64) + 1.0) * 0.5 * _PNG_MAX)
    return np.clip(v, 0, _PNG_MAX).astype(np.uint16)


def _read_png16(path) -> np.ndarray:
    width, height, rows, info = png.Reader(filename=str(path)).asDirect()
    if info["bitdepth"] != 16:
        raise ValueError(f"{path}: unsupported bit depth {info['bitdepth']}, expected 16")
    planes = info["planes"]
    if planes not in (3, 4) or info.get("greyscale", False):
        raise ValueError(f"{path}: expected RGB or RGBA, got {planes} planes")
    data = np.vstack([np.asarray(row, dtype=np.uint16) for row in rows])
    return data.reshape(height, width, planes)


def _write_png16(path, codes: np.ndarray) -> None:
    h, w, planes = codes.shape
    writer = png.Writer(w, h, greyscale=False, alpha=planes == 4, bitdepth=16)
    with open(path, "wb") as fh:
        writer.write(fh, codes.reshape(h, w * planes).astype(np.uint16))


# --------------------------------------------------------------------------
# PFM


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into an ``(H, W)`` or ``(H, W, 3)`` float32 array, top row first."""
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise ValueError(f"{path}: not a PFM file")
        dims = fh.readline().split()
        while not dims:
            dims = fh.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype, count=width * height * channels)
    shape = (height, width, channels) if channels == 3 else (height, width)
    # scanlines are stored bottom to top
    return np.flipud(data.reshape(shape)).astype(np.float32)


def write_pfm(path, image: np.ndarray) -> None:
    """Write a little-endian PFM (scale -1.0)."""
    img = np.asarray(image, dtype=np.float32)
    if img.ndim == 2:
        header = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"cannot store array of shape {img.shape} as PFM")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.flipud(img).astype("<f4").tobytes())


# --------------------------------------------------------------------------
# public loaders


def _encoding_for(path, encoding):
    if encoding is not None:
        return encoding
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        return "png16"
    if suffix == ".pfm":
        return "pfm"
    raise ValueError(f"cannot infer normal map encoding from {path!r}")


def load_normal_map(path, encoding: str | None = None) -> NormalMap:
    """Load a normal map from a 16-bit PNG or a 3-channel PFM.

    PNG codes are decoded with ``n = 2 v / 65535 - 1`` and renormalised; the
    alpha channel, if present, defines the foreground (``alpha > 32767``).
    For PFM files, pixels with an all-zero or non-finite normal are background.
    """
    encoding = _encoding_for(path, encoding)
    if encoding == "png16":
        codes = _read_png16(path)
        normals = decode_png16(codes[..., :3])
        if codes.shape[2] == 4:
            mask = codes[..., 3] > 32767
        else:
            mask = np.ones(codes.shape[:2], dtype=bool)
    elif encoding == "pfm":
        data = read_pfm(path)
        if data.ndim != 3:
            raise ValueError(f"{path}: normal maps need 3 channels")
        normals = data.astype(np.float64)
        mask = np.any(normals != 0.0, axis=2) & np.all(np.isfinite(normals), axis=2)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    return NormalMap.from_arrays(normals, mask)


def save_normal_map(nm: NormalMap, path, encoding: str | None = None) -> None:
    encoding = _encoding_for(path, encoding)
    if encoding == "png16":
        codes = np.empty(nm.shape + (4,), dtype=np.uint16)
        codes[..., :3] = encode_png16(nm.normals)
        codes[..., 3] = np.where(nm.mask, _PNG_MAX, 0)
        _write_png16(path, codes)
    elif encoding == "pfm":
        write_pfm(path, np.where(nm.mask[..., None], nm.normals, 0.0))
    else:
        raise ValueError(f"unknown encoding {encoding!r}")


def save_depth_map(depth: DepthMap, path) -> None:
    """Write depth as a 1-channel little-endian PFM; background becomes NaN."""
    write_pfm(path, np.where(depth.mask, depth.depth, np.nan))


def load_depth_map(path) -> DepthMap:
    data = read_pfm(path)
    if data.ndim != 2:
        raise ValueError(f"{path}: depth maps need 1 channel")
    mask = np.isfinite(data)
    return DepthMap(np.where(mask, data, 0.0).astype(np.float64), mask)


def gaussian_blur_normals(nm: NormalMap, sigma: float = DEFAULT_SIGMA) -> NormalMap:
    """Mask-aware Gaussian low-pass of a normal map.

    Each component is filtered over foreground taps only, with the weights
    renormalised to the taps that were used, then the result is renormalised
    to unit length. The mask is returned unchanged.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    m = nm.mask.astype(np.float64)
    weight = ndimage.gaussian_filter(m, sigma, mode="constant", cval=0.0, truncate=4.0)
    out = np.empty_like(nm.normals)
    for c in range(3):
        out[..., c] = ndimage.gaussian_filter(
            nm.normals[..., c] * m, sigma, mode="constant", cval=0.0, truncate=4.0
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        out /= weight[..., None]
        out /= np.linalg.norm(out, axis=2, keepdims=True)
    out[~nm.mask] = 0.0
    bad = nm.mask & ~np.all(np.isfinite(out), axis=2)
    if bad.any():
        # antipodal cancellation; keep the original normal there
        out[bad] = nm.normals[bad]
    return NormalMap(out, nm.mask.copy(), nm.report)
