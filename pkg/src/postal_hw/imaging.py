"""Raster front end: binarization, speck filtering, thinning, components.

Images are plain numpy arrays indexed ``[row, col]`` with a top-left origin.
Gray images are ``uint8`` (0 = black ink, 255 = paper); binary images are
``bool`` with ``True`` marking ink.  Public coordinates are ``(x, y)`` with
``x = col`` and ``y = row``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError

EIGHT = np.ones((3, 3), dtype=bool)
FOUR = ndimage.generate_binary_structure(2, 1)

# neighbour order P2..P9 of the classic thinning literature: N, NE, E, SE, S, SW, W, NW
_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


@dataclass(frozen=True)
class ConnectedComponent:
    pixels: np.ndarray          # (n, 2) integer array of (x, y)
    bbox: tuple                 # (x0, y0, x1, y1), inclusive
    area: int
    centroid: tuple             # (x, y)
    eccentricity: float

    @property
    def width(self):
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def height(self):
        return self.bbox[3] - self.bbox[1] + 1


def _check(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D image, got shape {img.shape}")
    return img


def otsu_threshold(img):
    """Return the gray level t maximizing between-class variance of {<=t} vs {>t}.

    The comparison is done in exact integer arithmetic so that ties resolve
    to the smallest level deterministically.
    """
    img = _check(img)
    hist = np.bincount(np.asarray(img, dtype=np.uint8).ravel(), minlength=256)
    n = int(hist.sum())
    total = int(np.dot(np.arange(256), hist))
    best_t, best_num, best_den = 0, -1, 1
    count = 0
    s = 0
    for t in range(256):
        count += int(hist[t])
        s += t * int(hist[t])
        den = count * (n - count)
        if den == 0:
            num, den = 0, 1
        else:
            num = (n * s - total * count) ** 2
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def binarize(img, method="otsu", threshold=128):
    """Map a gray image to an ink mask.

    ``method="fixed"`` marks pixels strictly darker than ``threshold``;
    ``method="otsu"`` marks pixels at or below the Otsu level.
    """
    img = _check(img)
    if method == "fixed":
        return img < threshold
    if method == "otsu":
        return img <= otsu_threshold(img)
    raise InvalidInputError(f"unknown binarization method {method!r}")


def neighbour_count(img):
    """Number of 8-neighbours in the foreground for every pixel."""
    img = np.asarray(img, dtype=bool)
    return ndimage.convolve(img.astype(np.uint8), EIGHT.astype(np.uint8),
                            mode="constant") - img


def denoise(img):
    """Drop isolated ink pixels and fill one-pixel holes (4-connected background)."""
    img = np.asarray(img, dtype=bool)
    counts = neighbour_count(img)
    out = img & (counts > 0)
    four = ndimage.convolve((~img).astype(np.uint8), FOUR.astype(np.uint8),
                            mode="constant", cval=1)
    # a background pixel whose 4-neighbours are all ink: only itself is background
    holes = ~img & (four == 1)
    # holes touching the frame are open to the outside
    holes[0, :] = holes[-1, :] = False
    holes[:, 0] = holes[:, -1] = False
    return out | holes


def _codes(img):
    padded = np.pad(img, 1)
    h, w = img.shape
    code = np.zeros(img.shape, dtype=np.uint8)
    for bit, (dy, dx) in enumerate(_OFFSETS):
        code |= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w].astype(np.uint8) << bit
    return code


def _is_simple(bits):
    fg = [i for i in range(8) if bits[i]]
    if not fg:
        return False
    pos = {i: _OFFSETS[i] for i in range(8)}

    def components(members, diagonal):
        members = set(members)
        seen, count = set(), 0
        for m in members:
            if m in seen:
                continue
            count += 1
            stack = [m]
            seen.add(m)
            while stack:
                a = stack.pop()
                for b in members - seen:
                    dy = abs(pos[a][0] - pos[b][0])
                    dx = abs(pos[a][1] - pos[b][1])
                    if (dy + dx == 1) or (diagonal and dy == 1 and dx == 1):
                        seen.add(b)
                        stack.append(b)
        return seen, count

    _, n_fg = components(fg, diagonal=True)
    if n_fg != 1:
        return False
    # background components (4-connected) that touch a 4-neighbour of p
    bg = [i for i in range(8) if not bits[i]]
    touching = 0
    remaining = set(bg)
    while remaining:
        seed = remaining.pop()
        comp = {seed}
        stack = [seed]
        while stack:
            a = stack.pop()
            for b in list(remaining):
                dy = abs(pos[a][0] - pos[b][0])
                dx = abs(pos[a][1] - pos[b][1])
                if dy + dx == 1:
                    remaining.discard(b)
                    comp.add(b)
                    stack.append(b)
        if any(i % 2 == 0 for i in comp):
            touching += 1
    return touching == 1


def _build_tables():
    tables = np.zeros((2, 256), dtype=bool)
    simple = np.zeros(256, dtype=bool)
    for code in range(256):
        bits = [(code >> i) & 1 for i in range(8)]
        b = sum(bits)
        simple[code] = _is_simple(bits)
        if not (2 <= b <= 6 and simple[code]):
            continue
        p2, p3, p4, p5, p6, p7, p8, p9 = bits
        tables[0, code] = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
        tables[1, code] = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
    return tables, simple


_PEEL, _SIMPLE = _build_tables()


def _code_at(img, y, x):
    h, w = img.shape
    code = 0
    for bit, (dy, dx) in enumerate(_OFFSETS):
        yy, xx = y + dy, x + dx
        if 0 <= yy < h and 0 <= xx < w and img[yy, xx]:
            code |= 1 << bit
    return code


def skeletonize(img):
    """Thin an ink mask to a one-pixel-wide trace.

    Zhang-Suen style two-pass boundary peeling.  Each pass selects its
    candidates on a snapshot, as the parallel algorithm does, but removes them
    one at a time and only while they are still simple points of the current
    image, so component and hole counts are preserved.  A final pass removes
    any 2x2 ink block that survives.
    """
    sk = np.array(img, dtype=bool, copy=True)
    changed = True
    while changed:
        changed = False
        for sub in (0, 1):
            table = _PEEL[sub]
            cand = np.argwhere(sk & table[_codes(sk)])
            for y, x in cand:
                if _SIMPLE[_code_at(sk, y, x)]:
                    sk[y, x] = False
                    changed = True
    _break_blocks(sk)
    return sk


def _break_blocks(sk):
    while True:
        blocks = sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]
        removed = False
        for y, x in np.argwhere(blocks):
            if not (sk[y, x] and sk[y + 1, x] and sk[y, x + 1] and sk[y + 1, x + 1]):
                continue
            for yy, xx in ((y, x), (y, x + 1), (y + 1, x), (y + 1, x + 1)):
                code = _code_at(sk, yy, xx)
                if _SIMPLE[code] and bin(code).count("1") >= 2:
                    sk[yy, xx] = False
                    removed = True
                    break
        if not removed:
            return


def is_thin(img):
    img = np.asarray(img, dtype=bool)
    return not np.any(img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:])


def count_components(img):
    return int(ndimage.label(np.asarray(img, dtype=bool), structure=EIGHT)[1])


def count_holes(img):
    """Background 4-components that do not reach the image frame."""
    bg = np.pad(~np.asarray(img, dtype=bool), 1, constant_values=True)
    return int(ndimage.label(bg, structure=FOUR)[1]) - 1


def euler_number(img):
    return count_components(img) - count_holes(img)


def eccentricity(xs, ys):
    """Ratio of principal-axis standard deviations, pixels taken as unit squares."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    cov = np.cov(np.vstack([xs, ys]), bias=True) if xs.size > 1 else np.zeros((2, 2))
    cov = cov + np.eye(2) / 12.0
    lo, hi = np.linalg.eigvalsh(cov)
    return float(np.sqrt(hi / lo))


def connected_components(img):
    """8-connected components ordered right to left (bbox x0 descending)."""
    img = np.asarray(img, dtype=bool)
    labels, n = ndimage.label(img, structure=EIGHT)
    comps = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        ys, xs = np.nonzero(labels[sl] == idx)
        ys = ys + sl[0].start
        xs = xs + sl[1].start
        comps.append(ConnectedComponent(
            pixels=np.column_stack([xs, ys]),
            bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
            area=int(xs.size),
            centroid=(float(xs.mean()), float(ys.mean())),
            eccentricity=eccentricity(xs, ys),
        ))
    comps.sort(key=lambda c: (-c.bbox[0], c.bbox[1]))
    return comps


def remove_diacritics(img, ratio=0.15):
    """Erase small marks lying wholly above or below the main body's rows."""
    img = np.asarray(img, dtype=bool)
    comps = connected_components(img)
    if len(comps) < 2:
        return img.copy()
    main = max(comps, key=lambda c: (c.area, -c.bbox[0]))
    top, bottom = main.bbox[1], main.bbox[3]
    out = img.copy()
    for c in comps:
        if c is main or c.area >= ratio * main.area:
            continue
        if c.bbox[3] < top or c.bbox[1] > bottom:
            out[c.pixels[:, 1], c.pixels[:, 0]] = False
    return out


def crop(img, region):
    x0, y0, x1, y1 = region
    return np.asarray(img)[y0:y1 + 1, x0:x1 + 1]


def preprocess_word(img, ratio=0.15):
    """binarize (if gray) -> denoise -> diacritic removal -> skeleton."""
    img = np.asarray(img)
    if img.dtype != bool:
        img = binarize(img)
    return skeletonize(remove_diacritics(denoise(img), ratio))
