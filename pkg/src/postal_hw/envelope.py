"""Envelope layout: frame and stamp removal, address location, line/word cuts.

Regions are inclusive ``(x0, y0, x1, y1)`` boxes in pixel coordinates.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import imaging
from .errors import NotFoundError


class FieldLabel(str, enum.Enum):
    POSTAL_CODE = "PostalCode"
    CITY_NAME = "CityName"


@dataclass(frozen=True)
class Region:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"empty region {self.bbox}")

    @property
    def bbox(self):
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def width(self):
        return self.x1 - self.x0 + 1

    @property
    def height(self):
        return self.y1 - self.y0 + 1

    @property
    def area(self):
        return self.width * self.height

    def contains(self, other):
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and other.x1 <= self.x1 and other.y1 <= self.y1)

    def union(self, other):
        return Region(min(self.x0, other.x0), min(self.y0, other.y0),
                      max(self.x1, other.x1), max(self.y1, other.y1))


def iou(a, b):
    ix = min(a.x1, b.x1) - max(a.x0, b.x0) + 1
    iy = min(a.y1, b.y1) - max(a.y0, b.y0) + 1
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass
class LineBand:
    region: Region
    words: list = field(default_factory=list)       # Regions, right to left


@dataclass
class AddressBlock:
    region: Region
    lines: list = field(default_factory=list)       # LineBands, top to bottom


@dataclass(frozen=True)
class LayoutParams:
    border_max: int = 4
    margin_band: float = 0.08
    border_min_frac: float = 0.5
    density_max: float = 0.5
    stamp_band: float = 0.3         # stamps are looked for in the top 30%
    address_band: float = 0.7       # the address lies in the lower 70%
    cluster_gap: float = 2.0        # x median component height
    min_area: int = 4
    line_gap: float = 0.4           # x median band height
    word_gap: float = 0.5           # x median component width
    count_range: tuple = (3, 6)
    width_cv_max: float = 0.35
    ecc_split: float = 2.5
    field_lines: int = 2            # final lines holding postal code and city


def _ink_box(mask, offset=(0, 0)):
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return None
    return Region(int(xs.min()) + offset[0], int(ys.min()) + offset[1],
                  int(xs.max()) + offset[0], int(ys.max()) + offset[1])


def _runs(flags):
    """(start, stop) half-open index ranges where ``flags`` is True."""
    f = np.concatenate([[False], np.asarray(flags, dtype=bool), [False]])
    d = np.diff(f.astype(np.int8))
    return list(zip(np.nonzero(d == 1)[0].tolist(), np.nonzero(d == -1)[0].tolist()))


def _long_runs(img, min_len):
    """Mask of horizontal ink runs of at least ``min_len`` pixels."""
    out = np.zeros_like(img)
    for r in range(img.shape[0]):
        if img[r].sum() < min_len:
            continue
        for a, b in _runs(img[r]):
            if b - a >= min_len:
                out[r, a:b] = True
    return out


def _border_lines(img, p, axis_len, band):
    """Thin long runs lying within ``band`` rows of the top or bottom edge."""
    runs = _long_runs(img, int(np.ceil(p.border_min_frac * axis_len)))
    h = img.shape[0]
    keep = np.zeros_like(img)
    for a, b in _runs(runs.any(axis=1)):
        if b - a > p.border_max:
            continue
        if a < band or b > h - band:
            keep[a:b] = runs[a:b]
    return keep


def border_mask(img, p=LayoutParams()):
    img = np.asarray(img, dtype=bool)
    h, w = img.shape
    rows = _border_lines(img, p, w, int(np.ceil(p.margin_band * h)))
    cols = _border_lines(img.T, p, h, int(np.ceil(p.margin_band * w))).T
    return rows | cols


def suppress_border(img, p=LayoutParams()):
    """Remove printed frame lines: long, thin runs inside the margin band."""
    img = np.asarray(img, dtype=bool)
    return img & ~border_mask(img, p)


def suppress_stamps(img, p=LayoutParams()):
    """Remove dense components (stamps, logos) that start in the top band."""
    img = np.asarray(img, dtype=bool)
    out = img.copy()
    top = p.stamp_band * img.shape[0]
    labels, _ = ndimage.label(img, structure=imaging.EIGHT)
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None or sl[0].start >= top:
            continue
        mask = labels[sl] == idx
        if mask.mean() > p.density_max:
            out[sl][mask] = False
    return out


def _components(img, p):
    comps = imaging.connected_components(img)
    return [c for c in comps if c.area >= p.min_area]


def locate_address(img, p=LayoutParams()):
    """Box of the heaviest cluster of ink components in the lower band."""
    img = np.asarray(img, dtype=bool)
    top = (1.0 - p.address_band) * img.shape[0]
    comps = [c for c in _components(img, p) if c.centroid[1] >= top]
    if not comps:
        raise NotFoundError("no ink left to hold an address")
    gap = p.cluster_gap * float(np.median([c.height for c in comps]))
    boxes = np.array([c.bbox for c in comps], dtype=float)
    grown = boxes + np.array([-gap, -gap, gap, gap])
    # union-find over overlapping grown boxes
    parent = list(range(len(comps)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(comps)):
        hit = np.nonzero((grown[i, 0] <= grown[:, 2]) & (grown[:, 0] <= grown[i, 2])
                         & (grown[i, 1] <= grown[:, 3]) & (grown[:, 1] <= grown[i, 3]))[0]
        for j in hit:
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    mass = {}
    for i, c in enumerate(comps):
        mass[find(i)] = mass.get(find(i), 0) + c.area
    best = min(mass, key=lambda r: (-mass[r], r))
    members = [i for i in range(len(comps)) if find(i) == best]
    b = boxes[members]
    return Region(int(b[:, 0].min()), int(b[:, 1].min()), int(b[:, 2].max()), int(b[:, 3].max()))


def _split_profile(profile, min_gap):
    """Ink runs of a projection profile, merged across blank runs shorter than min_gap."""
    runs = _runs(np.asarray(profile) > 0)
    merged = []
    for a, b in runs:
        if merged and a - merged[-1][1] < min_gap:
            merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    return merged


def segment_lines(img, region, p=LayoutParams()):
    """Horizontal projection cuts of the address region into line bands."""
    img = np.asarray(img, dtype=bool)
    sub = imaging.crop(img, region.bbox)
    runs = _runs(sub.sum(axis=1) > 0)
    if not runs:
        return AddressBlock(region, [])
    gap = p.line_gap * float(np.median([b - a for a, b in runs]))
    lines = []
    for a, b in _split_profile(sub.sum(axis=1), gap):
        box = _ink_box(sub[a:b], (region.x0, region.y0 + a))
        lines.append(LineBand(box))
    return AddressBlock(region, lines)


def median_component_width(img, region, p=LayoutParams()):
    comps = _components(imaging.crop(img, region.bbox), p)
    return float(np.median([c.width for c in comps])) if comps else 0.0


def segment_words(band, img, p=LayoutParams(), min_gap=None):
    """Vertical projection cuts of a line band into words, right to left.

    ``min_gap`` defaults to ``word_gap`` times the band's median component width.
    """
    img = np.asarray(img, dtype=bool)
    r = band.region
    sub = imaging.crop(img, r.bbox)
    if min_gap is None:
        min_gap = p.word_gap * median_component_width(img, r, p)
    words = []
    for a, b in _split_profile(sub.sum(axis=0), max(min_gap, 1.0)):
        words.append(_ink_box(sub[:, a:b], (r.x0 + a, r.y0)))
    words.sort(key=lambda w: -w.x1)
    return LineBand(r, words)


def field_label(region, img, p=LayoutParams()):
    comps = _components(imaging.crop(np.asarray(img, dtype=bool), region.bbox), p)
    lo, hi = p.count_range
    if not lo <= len(comps) <= hi:
        return FieldLabel.CITY_NAME
    widths = np.array([c.width for c in comps], dtype=float)
    cv = widths.std() / widths.mean()
    ecc = float(np.mean([c.eccentricity for c in comps]))
    if cv <= p.width_cv_max and ecc <= p.ecc_split:
        return FieldLabel.POSTAL_CODE
    return FieldLabel.CITY_NAME


def discriminate_field(words, img, p=LayoutParams()):
    """Postal code when a word's components are few, even in width and compact."""
    return [(w, field_label(w, img, p)) for w in words]


@dataclass
class EnvelopeLayout:
    address: Region
    block: AddressBlock
    fields: list            # [(Region, FieldLabel)] for the final lines

    def regions(self):
        """(kind, Region) for the address, its lines, words and labelled fields."""
        out = [("address", self.address)]
        for band in self.block.lines:
            out.append(("line", band.region))
            out.extend(("word", w) for w in band.words)
        for w, lab in self.fields:
            out.append(("code" if lab is FieldLabel.POSTAL_CODE else "city", w))
        return out

    def records(self):
        """``kind x0 y0 x1 y1`` report lines."""
        return [f"{k} {r.x0} {r.y0} {r.x1} {r.y1}" for k, r in self.regions()]


def analyze_envelope(img, p=LayoutParams()):
    """Full chain on a gray or binary envelope image."""
    img = np.asarray(img)
    if img.dtype != bool:
        img = imaging.binarize(img)
    clean = suppress_stamps(suppress_border(imaging.denoise(img), p), p)
    address = locate_address(clean, p)
    block = segment_lines(clean, address, p)
    gap = p.word_gap * median_component_width(clean, address, p)
    block.lines = [segment_words(band, clean, p, min_gap=gap) for band in block.lines]
    fields = []
    for band in block.lines[-p.field_lines:]:
        fields.extend(discriminate_field(band.words, clean, p))
    return EnvelopeLayout(address, block, fields), clean
