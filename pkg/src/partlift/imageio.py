"""Binary PPM (P6) / PGM (P5) reading and writing, plus the projections that
turn feature maps and masks into 8-bit images.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import PartliftError


class ImageFormatError(PartliftError, ValueError):
    """A PPM/PGM file could not be parsed."""


def _header(magic, w, h, maxval=255):
    return f"{magic}\n{w} {h}\n{maxval}\n".encode("ascii")


def write_ppm(path, rgb):
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError(f"PPM needs an (h, w, 3) uint8 array, got {rgb.shape} {rgb.dtype}")
    h, w, _ = rgb.shape
    Path(path).write_bytes(_header("P6", w, h) + np.ascontiguousarray(rgb).tobytes())


def write_pgm(path, gray):
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise ValueError(f"PGM needs an (h, w) uint8 array, got {gray.shape} {gray.dtype}")
    h, w = gray.shape
    Path(path).write_bytes(_header("P5", w, h) + np.ascontiguousarray(gray).tobytes())


def _tokens(data):
    """Yield (token, end offset) for the header, skipping '#' comments."""
    i = 0
    n = len(data)
    while True:
        while i < n and (chr(data[i]).isspace() or data[i] == ord("#")):
            if data[i] == ord("#"):
                while i < n and data[i] not in (10, 13):
                    i += 1
            else:
                i += 1
        start = i
        while i < n and not chr(data[i]).isspace() and data[i] != ord("#"):
            i += 1
        if start == i:
            raise ImageFormatError("truncated header")
        yield data[start:i], i


def read_pnm(path):
    """Read a binary PGM or PPM; returns uint8 (8-bit) or uint16 (16-bit) data."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"{path}: {exc.strerror or exc}") from None
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
        if magic not in (b"P5", b"P6"):
            raise ImageFormatError(f"{path}: unsupported magic {magic!r} (need P5 or P6)")
        fields = [next(toks) for _ in range(3)]
        w, h, maxval = (int(tok) for tok, _ in fields)
    except (StopIteration, ValueError):
        raise ImageFormatError(f"{path}: malformed header") from None
    # a single whitespace byte separates the header from the raster
    offset = fields[-1][1] + 1
    if not 0 < maxval < 65536 or w < 1 or h < 1:
        raise ImageFormatError(f"{path}: bad dimensions or maxval")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    count = w * h * channels
    raster = data[offset:]
    if len(raster) < count * dtype.itemsize:
        raise ImageFormatError(f"{path}: raster truncated ({len(raster)} of {count * dtype.itemsize} bytes)")
    arr = np.frombuffer(raster, dtype=dtype, count=count)
    arr = arr.astype(np.uint8 if maxval < 256 else np.uint16)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return arr.reshape(shape), maxval


def load_unit_image(path):
    """Load an image as float RGB in [0, 1]; grayscale is replicated."""
    arr, maxval = read_pnm(path)
    img = arr.astype(np.float64) / maxval
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    return img


def load_mask(path):
    """Boolean mask: nonzero pixels are True."""
    arr, _ = read_pnm(path)
    if arr.ndim == 3:
        arr = arr.max(axis=2)
    return arr != 0


def to_uint8(x):
    return np.round(np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def feature_rgb(feature, mode="first3"):
    """Project an (h, w, C) feature map to RGB in [0, 1].

    ``first3`` rescales channels 0-2 jointly to [0, 1] over the frame (missing
    channels stay black); ``norm`` maps the per-pixel L2 norm to gray.
    """
    f = np.asarray(feature, dtype=np.float64)
    if mode == "first3":
        rgb = np.zeros(f.shape[:2] + (3,))
        k = min(3, f.shape[2])
        rgb[..., :k] = f[..., :k]
        sel = f[..., :k]
    elif mode == "norm":
        n = np.sqrt(np.sum(f * f, axis=-1))
        rgb = np.repeat(n[..., None], 3, axis=2)
        sel = n
    else:
        raise ValueError(f"unknown feature visualization {mode!r}")
    lo, hi = float(sel.min()), float(sel.max())
    if hi > lo:
        rgb = (rgb - lo) / (hi - lo)
    else:
        rgb = np.zeros_like(rgb)
    if mode == "first3" and f.shape[2] < 3:
        rgb[..., f.shape[2]:] = 0.0
    return rgb
