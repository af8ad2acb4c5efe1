"""Netpbm raster I/O (P5 graymap, P4 bitmap) with an optional PNG reader.

Row-major, top-left origin.  In P4 files a set bit is black, i.e. ink.
"""
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


def _tokens(data, count, pos=2):
    """Read ``count`` whitespace-separated header integers, skipping comments."""
    values = []
    n = len(data)
    while len(values) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise InvalidInputError("truncated or malformed netpbm header")
        values.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    return values, pos + 1


def read_pgm(path):
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise InvalidInputError(f"{path}: not a binary graymap (P5)")
    (w, h, maxval), pos = _tokens(data, 3)
    if w <= 0 or h <= 0:
        raise InvalidInputError(f"{path}: empty image")
    if maxval < 256:
        arr = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    else:
        arr = np.frombuffer(data, dtype=">u2", count=w * h, offset=pos)
    arr = arr.reshape(h, w)
    if maxval != 255:
        arr = np.round(arr.astype(float) * 255.0 / maxval)
    return arr.astype(np.uint8)


def write_pgm(path, img):
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_pbm(path):
    data = Path(path).read_bytes()
    if data[:2] != b"P4":
        raise InvalidInputError(f"{path}: not a binary bitmap (P4)")
    (w, h), pos = _tokens(data, 2)
    if w <= 0 or h <= 0:
        raise InvalidInputError(f"{path}: empty image")
    stride = (w + 7) // 8
    raw = np.frombuffer(data, dtype=np.uint8, count=stride * h, offset=pos)
    bits = np.unpackbits(raw.reshape(h, stride), axis=1)[:, :w]
    return bits.astype(bool)


def write_pbm(path, img):
    img = np.asarray(img, dtype=bool)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P4\n%d %d\n" % (w, h))
        fh.write(np.packbits(img, axis=1).tobytes())


def read_png(path):
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8).copy()


def read_image(path):
    """Load any supported raster. P4 yields a bool mask, others a gray array."""
    path = Path(path)
    head = path.read_bytes()[:2]
    if head == b"P4":
        return read_pbm(path)
    if head == b"P5":
        return read_pgm(path)
    if path.suffix.lower() == ".png":
        return read_png(path)
    raise InvalidInputError(f"{path}: unsupported raster format")


def to_gray(mask):
    """Render an ink mask as a black-on-white graymap."""
    return np.where(np.asarray(mask, dtype=bool), 0, 255).astype(np.uint8)
