import math
from importlib import resources

import numpy as np
import pytest

from postal_hw import beta_elliptic as be
from postal_hw import imaging
from postal_hw.errors import InvalidInputError, LayoutError
from postal_hw.synth import (CITY_NAMES, SynthConfig, code_mask, derive_seed, gen_envelope, gen_word,
                             make_vocabulary, random_envelope, random_word_model, rasterize,
                             template_labels, template_models)
from postal_hw.trajectory import OrderedTrace

BOX_KINDS = ("word", "city", "code")


def one_stroke():
    return be.BetaEllipticModel([be.Stroke(be.BetaParams(0, 1, 2, 2), be.EllipseParams(40, 20, 0.2), (0.0, 2.5))])


def test_config_validation():
    for bad in (dict(stroke_width=0), dict(noise_sigma=-0.1), dict(n_templates=0), dict(n_instances=0)):
        with pytest.raises(InvalidInputError):
            SynthConfig(**bad)


def test_seed_derivation_is_frozen():
    assert derive_seed(0, "beja", "test", 3) == 4649580409261512232
    assert derive_seed(0, "beja", "test", 3) != derive_seed(0, "beja", "train", 3)


def test_noiseless_word_is_the_reconstruction():
    model = one_stroke()
    cfg = SynthConfig()
    gt = gen_word(model, cfg, seed=5)
    n = math.ceil(be.arc_length(model.strokes[0]) / cfg.point_spacing) + 1
    assert np.array_equal(gt.trajectory.points, be.reconstruct(model, n).points)
    with pytest.raises(InvalidInputError):
        gen_word(be.BetaEllipticModel([]), cfg)


def test_word_determinism():
    model = template_models(1)["ariana"]
    cfg = SynthConfig(noise_sigma=0.5)
    a, b = gen_word(model, cfg, seed=11), gen_word(model, cfg, seed=11)
    assert np.array_equal(a.trajectory.points, b.trajectory.points)
    assert np.array_equal(rasterize(a.trajectory, cfg), rasterize(b.trajectory, cfg))
    assert not np.array_equal(a.trajectory.points, gen_word(model, cfg, seed=12).trajectory.points)


def test_jitter_displacement_has_rayleigh_mean():
    model = one_stroke()
    clean = gen_word(model, SynthConfig(point_spacing=0.005)).trajectory.points
    noisy = gen_word(model, SynthConfig(noise_sigma=0.5, point_spacing=0.005), seed=3).trajectory.points
    assert len(clean) >= 10_000
    disp = np.hypot(*(noisy - clean).T)
    assert disp.mean() == pytest.approx(0.5 * math.sqrt(math.pi / 2), abs=0.02)


def test_rasterize_examples():
    cfg = SynthConfig(stroke_width=3)
    bar = rasterize(OrderedTrace(np.array([[0.0, 0.0], [10.0, 0.0]]), []), cfg)
    cols = bar.sum(axis=0)
    assert set(cols[cols > 0][1:-1].tolist()) == {3}
    blank = rasterize(OrderedTrace(np.zeros((0, 2)), []), cfg)
    assert blank.shape == (13, 13) and not blank.any()
    ang = np.linspace(0, 2 * math.pi, 200)
    ring = rasterize(OrderedTrace(np.column_stack([20 * np.cos(ang), 20 * np.sin(ang)]), []), cfg)
    assert imaging.count_holes(ring) == 1 and imaging.count_components(ring) == 1
    ys, xs = np.nonzero(ring)
    # the pen centre lies 2 * width from the frame; its disk reaches one pixel closer
    h, w = ring.shape
    assert xs.min() == ys.min() == 5 and w - 1 - xs.max() == 5 and h - 1 - ys.max() == 5


def test_vocabulary_fixtures_regenerate_exactly():
    fresh = make_vocabulary(CITY_NAMES)
    pkg = resources.files("postal_hw") / "data" / "templates"
    for label in CITY_NAMES:
        assert be.model_to_json(fresh[label], {"label": label}) == (pkg / f"{label}.model.json").read_text()


def test_vocabulary_shape():
    models = template_models()
    assert list(models) == list(CITY_NAMES)
    assert all(3 <= len(m) <= 8 for m in models.values())
    assert template_labels(22)[-2:] == ["word20", "word21"]


def test_word_models_start_rightmost():
    for seed in range(5):
        m = random_word_model(np.random.default_rng(seed))
        pts = be.reconstruct(m, 400).points
        assert pts[0, 0] >= pts[:, 0].max() - 1.5


def test_code_mask_has_four_digits():
    code = code_mask([1, 2, 0, 8], 18, 3, gap=3, rng=np.random.default_rng(0))
    assert len(imaging.connected_components(code)) == 4


def _kinds(layout):
    return [k for _, k in layout]


def _disjoint(a, b):
    return a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1]


def test_minimal_envelope():
    cfg = SynthConfig(noise_sigma=0.5)
    word = gen_word(template_models(1)["ariana"], cfg, seed=1)
    img, gt = gen_envelope([word], cfg, seed=4)
    kinds = _kinds(gt.layout)
    assert kinds[:2] == ["border", "stamp"]
    assert kinds.count("address") == 1 and kinds.count("line") == 1
    assert sorted(k for k in kinds if k in BOX_KINDS) == ["city", "code"]
    (code,) = [b for b, k in gt.layout if k == "code"]
    assert len(imaging.connected_components(imaging.crop(img, code))) == 4
    with pytest.raises(LayoutError):
        gen_envelope([word], cfg, seed=4, shape=(120, 200))
    with pytest.raises(LayoutError):
        gen_envelope([], cfg)


def test_hundred_envelopes_are_distinct_and_valid():
    cfg = SynthConfig(noise_sigma=0.5)
    vocab = template_models()
    seen = set()
    for seed in range(100):
        img, gt = random_envelope(cfg, seed, vocab)
        h, w = img.shape
        boxes = [b for b, k in gt.layout if k in BOX_KINDS]
        lines = [b for b, k in gt.layout if k == "line"]
        (addr,) = [b for b, k in gt.layout if k == "address"]
        (stamp,) = [b for b, k in gt.layout if k == "stamp"]
        assert len(lines) >= 2
        for b, _ in gt.layout:
            assert 0 <= b[0] <= b[2] < w and 0 <= b[1] <= b[3] < h
        for group in (boxes, lines):
            assert all(_disjoint(a, b) for i, a in enumerate(group) for b in group[i + 1:])
        assert _disjoint(addr, stamp)
        assert addr[1] >= 0.3 * h
        (code,) = [b for b, k in gt.layout if k == "code"]
        assert len(imaging.connected_components(imaging.crop(img, code))) == 4
        seen.add(tuple(map(tuple, (b for b, _ in gt.layout))))
    assert len(seen) == 100


def test_envelope_determinism():
    cfg = SynthConfig(noise_sigma=0.5)
    a, ga = random_envelope(cfg, 7)
    b, gb = random_envelope(cfg, 7)
    assert np.array_equal(a, b) and ga.layout == gb.layout
