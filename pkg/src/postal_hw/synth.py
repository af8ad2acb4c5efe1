"""Synthetic ground truth: Beta-elliptic words, rasterization, envelopes.

Everything is driven by ``numpy.random.Generator`` instances seeded from
``SynthConfig.seed`` (or a per-item seed derived from it), so identical
inputs give bit-identical outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .beta_elliptic import (BetaEllipticModel, BetaParams, EllipseParams, Stroke, arc_length,
                            beta_eval, model_from_json, reconstruct)
from .errors import InvalidInputError, LayoutError
from .trajectory import OrderedTrace

CITY_NAMES = (
    "ariana", "beja", "bizerte", "gabes", "gafsa", "jendouba", "kairouan", "kasserine",
    "kebili", "mahdia", "medenine", "monastir", "nabeul", "sfax", "siliana", "sousse",
    "tataouine", "tozeur", "tunis", "zaghouan",
)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    stroke_width: int = 3
    resolution: int = 300
    noise_sigma: float = 0.0
    n_templates: int = 20
    n_instances: int = 25
    point_spacing: float = 2.0          # mean arc length between trace samples, px

    def __post_init__(self):
        if self.stroke_width < 1:
            raise InvalidInputError("stroke_width must be >= 1")
        if self.noise_sigma < 0:
            raise InvalidInputError("noise_sigma must be >= 0")
        if self.n_templates < 1 or self.n_instances < 1:
            raise InvalidInputError("template and instance counts must be >= 1")


@dataclass
class GroundTruth:
    trajectory: OrderedTrace
    model: BetaEllipticModel | None = None
    label: str = ""
    layout: list = field(default_factory=list)      # [(region, kind)], envelopes only
    seed: int | None = None


def derive_seed(*parts):
    """Stable 63-bit seed from a tuple of ints/strings."""
    ss = np.random.SeedSequence([abs(hash_text(str(p))) for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def hash_text(text):
    # FNV-1a: Python's hash() is salted per process
    h = 0xCBF29CE484222325
    for ch in text.encode():
        h = ((h ^ ch) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h & 0x7FFFFFFF


# --------------------------------------------------------------------------
# word models
# --------------------------------------------------------------------------

def _tangent_angle(phi, a, b, sign):
    return math.atan2(sign * b * math.cos(phi), -sign * a * math.sin(phi))


def _propose_model(rng, n_strokes):
    heading = math.pi + rng.normal(0, 0.35)
    pen = np.zeros(2)
    t = 0.0
    strokes = []
    sign = 1.0 if rng.random() < 0.5 else -1.0
    prev_dur = None
    for _ in range(n_strokes):
        a = rng.uniform(9.0, 20.0)
        b = a * rng.uniform(0.5, 1.0)
        span = rng.uniform(0.45, 1.15) * math.pi
        dev = (heading - math.pi + math.pi) % (2 * math.pi) - math.pi
        if abs(dev) > 0.5:
            # turn back towards the leftward writing direction
            sign = -1.0 if dev > 0 else 1.0
        elif rng.random() < 0.65:
            sign = -sign
        phi0 = rng.uniform(0, 2 * math.pi)
        theta = heading - _tangent_angle(phi0, a, b, sign)
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        centre = pen - rot @ np.array([a * math.cos(phi0), b * math.sin(phi0)])
        ep = EllipseParams(a, b, theta, float(centre[0]), float(centre[1]))
        phi1 = phi0 + sign * span
        probe = Stroke(BetaParams(0, 1, 2, 2), ep, (phi0, phi1))
        length = arc_length(probe)
        speed = rng.uniform(1.0, 1.6)
        dur = length / speed
        if prev_dur is not None:
            t -= rng.uniform(0.15, 0.35) * min(prev_dur, dur)
        p, q = rng.uniform(1.6, 3.2), rng.uniform(1.6, 3.2)
        unit = BetaParams(t, t + dur, p, q, 1.0)
        grid = np.linspace(unit.t0, unit.t1, 401)
        area = float(np.trapezoid(beta_eval(grid, unit), grid))
        bp = BetaParams(t, t + dur, p, q, length / area)
        strokes.append(Stroke(bp, ep.normalized(), _arc_in_normalized(ep, phi0, phi1)))
        end_local = np.array([a * math.cos(phi1), b * math.sin(phi1)])
        pen = centre + rot @ end_local
        heading = theta + _tangent_angle(phi1, a, b, sign) + rng.normal(0, 0.15)
        t += dur
        prev_dur = dur
    return BetaEllipticModel(strokes)


def _arc_in_normalized(ep, phi0, phi1):
    """Express an arc of ``ep`` in the eccentric angles of ``ep.normalized()``."""
    norm = ep.normalized()
    if norm.a == ep.a and norm.b == ep.b:
        # theta only shifted by a multiple of pi: angles shift by the same amount
        shift = ep.theta - norm.theta
        k = round(shift / math.pi)
        return (phi0 + k * math.pi, phi1 + k * math.pi)
    # axes swapped: phi' = phi - pi/2 up to multiples of pi
    shift = ep.theta + math.pi / 2 - norm.theta
    k = round(shift / math.pi)
    return (phi0 - math.pi / 2 + k * math.pi, phi1 - math.pi / 2 + k * math.pi)


def dense_trace(model, spacing=0.5):
    """Reconstructed path sampled finely enough for geometric checks."""
    total = sum(arc_length(s) for s in model.strokes)
    n = max(2, int(math.ceil(total / spacing)) * 3 + 1)
    return reconstruct(model, n).points


def _polyline_intersections(pts):
    """(i, j, point, angle) for crossings of non-adjacent polyline segments."""
    p = pts[:-1]
    r = np.diff(pts, axis=0)
    out = []
    n = len(p)
    for i in range(n):
        j0 = i + 2
        if j0 >= n:
            break
        q = p[j0:]
        s = r[j0:]
        denom = r[i, 0] * s[:, 1] - r[i, 1] * s[:, 0]
        qp = q - p[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom
            uu = (qp[:, 0] * r[i, 1] - qp[:, 1] * r[i, 0]) / denom
        hit = np.nonzero((denom != 0) & (tt >= 0) & (tt < 1) & (uu >= 0) & (uu < 1))[0]
        for h in hit:
            j = j0 + h
            cosang = abs(np.dot(r[i], r[j])) / (np.hypot(*r[i]) * np.hypot(*r[j]) + 1e-12)
            out.append((i, j, p[i] + tt[h] * r[i], math.acos(min(1.0, cosang))))
    return out


def check_legibility(pts, width, min_radius=None, min_cross_angle=math.radians(50), max_crossings=2):
    """Geometric well-posedness of a pen path once it is drawn with ``width``.

    Rejects paths that turn tighter than ``min_radius``, do not start at their
    rightmost extent, cross themselves at a shallow angle or too often, or
    come close to themselves anywhere except around a clean crossing.
    """
    pts = np.asarray(pts, dtype=float)
    if min_radius is None:
        min_radius = 2.0 * width
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] < 6 * width:
        return False
    # sub-sample to ~1 px for the checks
    target = np.arange(0.0, s[-1], 1.0)
    sub = np.column_stack([np.interp(target, s, pts[:, 0]), np.interp(target, s, pts[:, 1])])
    if pts[0, 0] < sub[:, 0].max() - 0.5 * width:
        return False
    # curvature from chords three samples apart
    if len(sub) > 8:
        a, b, c = sub[:-6], sub[3:-3], sub[6:]
        ab, bc, ca = (np.hypot(*(b - a).T), np.hypot(*(c - b).T), np.hypot(*(a - c).T))
        cross = np.abs((b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0])
        with np.errstate(divide="ignore", invalid="ignore"):
            radius = ab * bc * ca / (2 * cross)
        if np.nanmin(radius) < min_radius:
            return False
    crossings = _polyline_intersections(sub)
    if len(crossings) > max_crossings:
        return False
    if any(ang < min_cross_angle for *_, ang in crossings):
        return False
    # any close approach must be explained by a crossing
    d = np.hypot(sub[:, None, 0] - sub[None, :, 0], sub[:, None, 1] - sub[None, :, 1])
    idx = np.arange(len(sub))
    far = np.abs(idx[:, None] - idx[None, :]) > 4 * width
    close = np.argwhere((d < 2.5 * width) & far)
    for i, j in close:
        ok = False
        for ci, cj, _, ang in crossings:
            reach = 2.5 * width / math.sin(ang) + width
            if (abs(i - ci) <= reach and abs(j - cj) <= reach) or (abs(i - cj) <= reach and abs(j - ci) <= reach):
                ok = True
                break
        if not ok:
            return False
    return True


def random_word_model(rng, n_strokes=None, width=3, max_tries=500, open_chain=False):
    """Rejection-sample a legible word of 3-8 strokes written right to left."""
    for _ in range(max_tries):
        n = int(rng.integers(3, 9)) if n_strokes is None else n_strokes
        model = _propose_model(rng, n)
        pts = dense_trace(model)
        if not check_legibility(pts, width, max_crossings=0 if open_chain else 2):
            continue
        extent = pts.max(axis=0) - pts.min(axis=0)
        if extent[0] < 8 * width or extent[1] > 90 or extent[0] > 220:
            continue
        return model
    raise LayoutError("could not draw a legible word model")


def template_labels(n):
    """The first ``n`` vocabulary labels; beyond the built-in names, ``wordNN``."""
    return [CITY_NAMES[i] if i < len(CITY_NAMES) else f"word{i:02d}" for i in range(n)]


VOCAB_MIN_SEPARATION = 0.06    # min chamfer distance between words, in word diagonals


def shape_signature(model):
    """Dense pen path, centred and scaled to unit bounding-box diagonal."""
    p = dense_trace(model, 1.0)
    p = p - p.mean(axis=0)
    return p / np.hypot(*(p.max(axis=0) - p.min(axis=0)))


def chamfer(a, b):
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())


def make_vocabulary(labels, width=3, min_sep=VOCAB_MIN_SEPARATION, existing=None):
    """Word models for ``labels``, each distinct in shape from all earlier ones.

    Label i is drawn from seeds derived from ("template", label, attempt);
    a draw closer than ``min_sep`` to an accepted word is discarded.
    """
    out = dict(existing or {})
    sigs = [shape_signature(m) for m in out.values()]
    for label in labels:
        for attempt in range(1000):
            rng = np.random.default_rng(derive_seed("template", label, attempt))
            model = random_word_model(rng, width=width)
            sig = shape_signature(model)
            if all(chamfer(sig, other) >= min_sep for other in sigs):
                break
        else:
            raise LayoutError(f"no distinct word found for {label}")
        out[label] = model
        sigs.append(sig)
    return out


def template_models(n=len(CITY_NAMES)):
    """Vocabulary word models keyed by label (built-in fixtures first)."""
    out = {}
    pkg = resources.files("postal_hw") / "data" / "templates"
    labels = template_labels(n)
    for label in labels[:len(CITY_NAMES)]:
        out[label] = model_from_json((pkg / f"{label}.model.json").read_text())
    if len(labels) > len(out):
        out = make_vocabulary(labels[len(out):], existing=out)
    return out


# --------------------------------------------------------------------------
# words and rasters
# --------------------------------------------------------------------------

def gen_word(model, cfg, seed=None, label=""):
    """Sample the model's trajectory; add N(0, noise_sigma) jitter per point."""
    if not model.strokes:
        raise InvalidInputError("degenerate model: no strokes")
    total = sum(arc_length(s) for s in model.strokes)
    if not total > 0:
        raise InvalidInputError("degenerate model: zero arc length")
    n = max(2, int(math.ceil(total / cfg.point_spacing)) + 1)
    pts = reconstruct(model, n).points.copy()
    seed = cfg.seed if seed is None else seed
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        pts = pts + rng.normal(0.0, cfg.noise_sigma, pts.shape)
    return GroundTruth(OrderedTrace(pts, []), model, label, [], seed)


def raster_offset(points, width):
    """Translation applied by ``rasterize`` (points + offset = pixel coords)."""
    pad = 2 * width
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.array([float(pad), float(pad)])
    return pad - np.floor(pts.min(axis=0))


def _stamp_segment(img, p, q, r):
    h, w = img.shape
    x0 = max(int(math.floor(min(p[0], q[0]) - r)), 0)
    x1 = min(int(math.ceil(max(p[0], q[0]) + r)), w - 1)
    y0 = max(int(math.floor(min(p[1], q[1]) - r)), 0)
    y1 = min(int(math.ceil(max(p[1], q[1]) + r)), h - 1)
    if x1 < x0 or y1 < y0:
        return
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    d = q - p
    dd = float(d @ d)
    if dd == 0:
        dist2 = (xx - p[0]) ** 2 + (yy - p[1]) ** 2
    else:
        tt = np.clip(((xx - p[0]) * d[0] + (yy - p[1]) * d[1]) / dd, 0.0, 1.0)
        dist2 = (xx - p[0] - tt * d[0]) ** 2 + (yy - p[1] - tt * d[1]) ** 2
    img[y0:y1 + 1, x0:x1 + 1] |= dist2 <= r * r + 1e-9


def draw_polyline(img, pts, width):
    pts = np.asarray(pts, dtype=float)
    r = width / 2.0
    if len(pts) == 1:
        _stamp_segment(img, pts[0], pts[0], r)
    for p, q in zip(pts[:-1], pts[1:]):
        _stamp_segment(img, p, q, r)


def rasterize(tr, cfg):
    """Ink mask of the trace drawn with disks of diameter stroke_width.

    The canvas is padded by 2 * stroke_width around the ink; see
    ``raster_offset`` for the coordinate shift.
    """
    width = cfg.stroke_width
    pad = 2 * width
    pts = np.asarray(tr.points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros((2 * pad + 1, 2 * pad + 1), dtype=bool)
    off = raster_offset(pts, width)
    shifted = pts + off
    w = int(math.ceil(shifted[:, 0].max())) + pad + 1
    h = int(math.ceil(shifted[:, 1].max())) + pad + 1
    img = np.zeros((h, w), dtype=bool)
    for stroke in OrderedTrace(shifted, list(tr.breaks)).strokes():
        draw_polyline(img, stroke, width)
    return img


# --------------------------------------------------------------------------
# postal code digits
# --------------------------------------------------------------------------

def _arc(cx, cy, rx, ry, a0, a1, n=12):
    t = np.linspace(a0, a1, n)
    return [(cx + rx * math.cos(u), cy + ry * math.sin(u)) for u in t]


# unit box: x in [0, 1], y in [0, 1.4] (y down)
DIGIT_PATHS = {
    0: _arc(0.5, 0.7, 0.5, 0.7, 0, 2 * math.pi, 20),
    1: [(0.15, 0.45), (0.55, 0.0), (0.55, 1.4), (0.1, 1.4), (1.0, 1.4)],
    2: _arc(0.5, 0.4, 0.45, 0.4, math.pi, 2.2 * math.pi) + [(0.0, 1.4), (1.0, 1.4)],
    3: _arc(0.45, 0.35, 0.45, 0.35, -0.9 * math.pi, 0.5 * math.pi) + _arc(0.45, 1.05, 0.5, 0.35, -0.5 * math.pi, 0.9 * math.pi),
    4: [(0.7, 1.4), (0.7, 0.0), (0.0, 0.95), (1.0, 0.95)],
    5: [(1.0, 0.0), (0.15, 0.0), (0.05, 0.6)] + _arc(0.45, 0.95, 0.5, 0.45, -0.65 * math.pi, 0.85 * math.pi),
    6: _arc(0.5, 0.7, 0.5, 0.7, -0.35 * math.pi, -math.pi, 8) + _arc(0.5, 1.0, 0.45, 0.4, math.pi, 3 * math.pi, 16),
    7: [(0.0, 0.0), (1.0, 0.0), (0.35, 1.4)],
    8: _arc(0.5, 0.35, 0.38, 0.35, 0.5 * math.pi, 2.5 * math.pi, 16) + _arc(0.5, 1.05, 0.48, 0.35, -0.5 * math.pi, 1.5 * math.pi, 16),
    9: _arc(0.5, 0.4, 0.45, 0.4, 0, 2 * math.pi, 16) + [(0.95, 0.4), (0.8, 1.4)],
}


def digit_mask(digit, height, width, rng=None):
    """Ink mask of a stylised digit, ``height`` px tall."""
    scale = height / 1.4
    pts = np.array(DIGIT_PATHS[digit], dtype=float) * scale
    if rng is not None:
        pts = pts + rng.normal(0, 0.3, pts.shape)
    pad = width
    pts = pts + pad
    h = int(math.ceil(pts[:, 1].max())) + pad + 1
    w = int(math.ceil(pts[:, 0].max())) + pad + 1
    img = np.zeros((h, w), dtype=bool)
    draw_polyline(img, pts, width)
    return _trim(img)


def _trim(img):
    ys, xs = np.nonzero(img)
    if ys.size == 0:
        return img[:0, :0]
    return img[ys.min():ys.max() + 1, xs.min():xs.max() + 1]


def code_mask(digits, height, width, gap, rng=None):
    parts = [digit_mask(d, height, width, rng) for d in digits]
    h = max(p.shape[0] for p in parts)
    w = sum(p.shape[1] for p in parts) + gap * (len(parts) - 1)
    img = np.zeros((h, w), dtype=bool)
    x = 0
    for p in parts:
        y = (h - p.shape[0]) // 2
        img[y:y + p.shape[0], x:x + p.shape[1]] |= p
        x += p.shape[1] + gap
    return img


# --------------------------------------------------------------------------
# envelopes
# --------------------------------------------------------------------------

ENVELOPE_SHAPE = (560, 1000)        # rows, cols


def word_mask(gt, cfg):
    return _trim(rasterize(gt.trajectory, cfg))


def gen_envelope(addr_words, cfg, seed=None, shape=ENVELOPE_SHAPE, words_per_line=2):
    """Compose a synthetic envelope and its ground-truth layout.

    The last word is the city name; it shares the final line with a 4-digit
    postal code.  The other words fill the lines above, ``words_per_line``
    each, written right to left.  Layout kinds: ``border``, ``stamp``,
    ``address``, ``line``, and per word ``word``, ``city`` or ``code``.
    """
    if not addr_words:
        raise LayoutError("an envelope needs at least one address word")
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    h, w = shape
    width = cfg.stroke_width
    img = np.zeros(shape, dtype=bool)
    layout = []

    # printed frame inside the margin band
    inset = int(rng.integers(5, 13))
    thick = int(rng.integers(2, 4))
    x0, y0, x1, y1 = inset, inset, w - 1 - inset, h - 1 - inset
    img[y0:y0 + thick, x0:x1 + 1] = True
    img[y1 - thick + 1:y1 + 1, x0:x1 + 1] = True
    img[y0:y1 + 1, x0:x0 + thick] = True
    img[y0:y1 + 1, x1 - thick + 1:x1 + 1] = True
    layout.append(((x0, y0, x1, y1), "border"))

    # dense stamp at the top right, with perforation holes
    sw, sh = int(rng.integers(60, 90)), int(rng.integers(70, 100))
    sx1 = x1 - thick - int(rng.integers(12, 30))
    sy0 = y0 + thick + int(rng.integers(10, 20))
    sx0, sy1 = sx1 - sw + 1, sy0 + sh - 1
    stamp = rng.random((sh, sw)) < 0.85
    stamp[:2, :] = stamp[-2:, :] = True
    stamp[:, :2] = stamp[:, -2:] = True
    img[sy0:sy1 + 1, sx0:sx1 + 1] |= stamp
    layout.append(((sx0, sy0, sx1, sy1), "stamp"))

    # sometimes a filled sender logo at the top left
    if rng.random() < 0.5:
        rx, ry = int(rng.integers(15, 35)), int(rng.integers(12, 25))
        cx = x0 + thick + 20 + rx
        cy = y0 + thick + 15 + ry
        yy, xx = np.mgrid[cy - ry:cy + ry + 1, cx - rx:cx + rx + 1]
        img[cy - ry:cy + ry + 1, cx - rx:cx + rx + 1] |= ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1
        layout.append(((cx - rx, cy - ry, cx + rx, cy + ry), "logo"))

    # address lines; the last one holds the city word and the postal code
    masks = [word_mask(g, cfg) for g in addr_words]
    others = masks[:-1]
    lines = [others[i:i + words_per_line] for i in range(0, len(others), words_per_line)]
    digit_h = int(rng.integers(16, 21))
    code = code_mask([int(d) for d in rng.integers(0, 10, 4)], digit_h, width,
                     gap=int(rng.integers(2, 5)), rng=rng)
    last = [("city", masks[-1]), ("code", code)]
    if rng.random() < 0.5:
        last.reverse()
    rows = [[("word", m) for m in line] for line in lines] + [last]

    # spacing scales with the handwriting, as a writer's would
    word_w = float(np.median([m.shape[1] for m in masks]))
    word_gap = max(3 * width, int(round(rng.uniform(0.6, 0.8) * word_w)))
    row_h = [max(m.shape[0] for _, m in r) for r in rows]
    line_gap = max(3 * width, int(round(rng.uniform(0.5, 0.7) * float(np.median(row_h)))))
    row_w = [sum(m.shape[1] for _, m in r) + word_gap * (len(r) - 1) for r in rows]
    block_w, block_h = max(row_w), sum(row_h) + line_gap * (len(rows) - 1)
    top_min = int(0.3 * h) + 12
    bottom_max = y1 - thick - 12
    right_max = x1 - thick - 12
    left_min = x0 + thick + 12
    if block_h > bottom_max - top_min or block_w > right_max - left_min:
        raise LayoutError(f"address block {block_w}x{block_h} does not fit the envelope")
    by0 = int(rng.integers(top_min, bottom_max - block_h + 1))
    bx1 = int(rng.integers(left_min + block_w, right_max + 1))
    y = by0
    line_boxes, word_boxes = [], []
    for r, rh in zip(rows, row_h):
        x = bx1
        boxes = []
        for kind, m in r:
            mh, mw = m.shape
            yy = y + (rh - mh) // 2
            img[yy:yy + mh, x - mw + 1:x + 1] |= m
            boxes.append(((x - mw + 1, yy, x, yy + mh - 1), kind))
            x -= mw + word_gap
        line_boxes.append((_union([b for b, _ in boxes]), "line"))
        word_boxes.extend(boxes)
        y += rh + line_gap
    layout.append((_union([b for b, _ in word_boxes]), "address"))
    layout.extend(line_boxes + word_boxes)

    # scanner specks away from the ink and outside the ground-truth boxes
    specks = rng.random(shape) < 2e-4
    for (bx0, by0, bx1, by1), _ in line_boxes + word_boxes:
        specks[by0:by1 + 1, bx0:bx1 + 1] = False
    img |= specks & ~_dilate(img, 3)
    return img, GroundTruth(OrderedTrace(np.zeros((0, 2)), []), None, "envelope", layout, seed)


def _union(boxes):
    b = np.array(boxes)
    return (int(b[:, 0].min()), int(b[:, 1].min()), int(b[:, 2].max()), int(b[:, 3].max()))


def random_envelope(cfg, seed, vocabulary=None, shape=ENVELOPE_SHAPE):
    """Envelope with 1-2 handwritten lines above the city/code line.

    Words are noisy renderings of vocabulary models; when the block does not
    fit, lines are dropped until it does.
    """
    vocabulary = vocabulary or template_models()
    labels = sorted(vocabulary)
    rng = np.random.default_rng(derive_seed("envelope", seed))
    n_lines = int(rng.integers(1, 3))
    per_line = int(rng.integers(1, 4))
    picks = [labels[i] for i in rng.integers(0, len(labels), n_lines * per_line + 1)]
    words = [gen_word(vocabulary[lab], cfg, seed=derive_seed(seed, "word", i), label=lab)
             for i, lab in enumerate(picks)]
    while True:
        try:
            return gen_envelope(words, cfg, seed=derive_seed(seed, "layout"), shape=shape,
                                words_per_line=per_line)
        except LayoutError:
            if len(words) <= 1:
                raise
            words = words[per_line:] if len(words) > per_line else words[-1:]


def _dilate(img, r):
    from scipy import ndimage

    return ndimage.binary_dilation(img, iterations=r)
