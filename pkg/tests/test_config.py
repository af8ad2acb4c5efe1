import pytest

from postal_hw import __version__
from postal_hw.config import KEYS, PipelineConfig, documented_keys
from postal_hw.errors import ConfigError


def test_defaults_and_views():
    cfg = PipelineConfig()
    assert cfg["seed"] == 0 and cfg["synth.n_templates"] == 20 and cfg["synth.n_instances"] == 25
    s = cfg.synth_config()
    assert (s.stroke_width, s.noise_sigma) == (3, 0.5)
    w = cfg.word_params()
    assert (w.diacritic_ratio, w.direction_window, w.lam) == (0.15, 5, 3.0)
    lp = cfg.layout_params()
    assert (lp.border_max, lp.margin_band, lp.density_max, lp.line_gap, lp.word_gap,
            lp.width_cv_max, lp.ecc_split) == (4, 0.08, 0.5, 0.4, 0.5, 0.35, 2.5)


def test_parse_comments_and_types():
    cfg = PipelineConfig.parse("# c\nseed = 7  # trailing\n\nfit.refine = no\nmatcher.midpoints = raw\n")
    assert cfg["seed"] == 7 and cfg["fit.refine"] is False and cfg["matcher.midpoints"] == "raw"
    again = PipelineConfig.parse(cfg.dump())
    assert again.values == cfg.values


@pytest.mark.parametrize("text", ["bogus = 1", "seed = x", "synth.n_instances = 0", "fit.refine = maybe",
                                  "matcher.midpoints = mid", "envelope.margin_band = 0.9", "seed 3"])
def test_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        PipelineConfig.parse(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.load(tmp_path / "none.cfg")


def test_hash_tracks_results_not_runtime():
    a, b = PipelineConfig(), PipelineConfig({"jobs": 4, "verbosity": 3})
    assert a.hash() == b.hash()
    assert a.hash() != PipelineConfig({"seed": 1}).hash()
    head = a.header("synth").splitlines()
    assert head == [f"version {__version__}", "command synth", "seed 0", f"config_hash {a.hash()}"]


def test_every_key_documented():
    doc = documented_keys()
    for key, spec in KEYS.items():
        assert doc.count(f"{key} = ") == 1 and spec.doc
