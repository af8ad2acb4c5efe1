"""Flat ``key = value`` pipeline configuration.

Every key has a default, a type and an admissible range; unknown keys and
out-of-range values raise ``ConfigError``.  Command-line flags override the
file.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .envelope import LayoutParams
from .errors import ConfigError
from .pipeline import WordParams
from .synth import SynthConfig


@dataclass(frozen=True)
class Key:
    default: object
    lo: object = None
    hi: object = None
    choices: tuple = ()
    doc: str = ""


KEYS = {
    "seed": Key(0, 0, 2**63 - 1, doc="master seed of every generator"),
    "jobs": Key(1, 1, 256, doc="worker processes for batch commands"),
    "verbosity": Key(1, 0, 3, doc="0 errors, 1 warnings, 2 info, 3 debug"),
    # synthetic corpus
    "synth.stroke_width": Key(3, 1, 20, doc="pen diameter, px"),
    "synth.resolution": Key(300, 50, 1200, doc="nominal scan resolution, ppi (recorded only)"),
    "synth.noise_sigma": Key(0.5, 0.0, 5.0, doc="per-point jitter of test instances, px"),
    "synth.n_templates": Key(20, 1, 500, doc="vocabulary size (labels)"),
    "synth.n_instances": Key(25, 1, 10000, doc="test instances per label"),
    "synth.n_train": Key(10, 1, 100, doc="training renderings per label for the template store"),
    "synth.point_spacing": Key(2.0, 0.25, 10.0, doc="mean pen-path sample spacing, px"),
    "synth.n_envelopes": Key(10, 0, 10000, doc="synthetic envelopes written by `synth`"),
    # word front end and recovery
    "imaging.diacritic_ratio": Key(0.15, 0.0, 1.0, doc="marks below this fraction of the main body are dropped"),
    "recovery.window": Key(5, 1, 50, doc="pixels averaged for junction directions"),
    "recovery.lambda": Key(3.0, 0.0, 50.0, doc="curvature gain of the resampling density"),
    "recovery.step": Key(1.0, 0.1, 10.0, doc="base resampling step, px"),
    "recovery.smooth_sigma": Key(4.5, 0.0, 20.0, doc="Gaussian smoothing of the trace before resampling, px"),
    # modelling
    "fit.min_depth": Key(0.0, 0.0, 1.0, doc="relative dip below which velocity minima are ignored"),
    "fit.refine": Key(True, doc="joint refinement of all Beta bumps"),
    "fit.refine_iter": Key(60, 1, 10000, doc="evaluation budget of the joint refinement"),
    # matching
    "matcher.symmetric": Key(False, doc="average both association directions"),
    "matcher.midpoints": Key("arc", choices=("arc", "raw"), doc="stroke middle points: fitted arcs or raw spans"),
    # envelope layout
    "envelope.border_max": Key(4, 1, 50, doc="max frame line thickness, px"),
    "envelope.margin_band": Key(0.08, 0.0, 0.5, doc="frame search band, fraction of the side"),
    "envelope.density_max": Key(0.5, 0.0, 1.0, doc="bbox ink density above which a top component is a stamp"),
    "envelope.line_gap": Key(0.4, 0.0, 5.0, doc="line split gap, x median band height"),
    "envelope.word_gap": Key(0.5, 0.0, 5.0, doc="word split gap, x median component width"),
    "envelope.width_cv_max": Key(0.35, 0.0, 5.0, doc="max width variation of postal-code digits"),
    "envelope.ecc_split": Key(2.5, 1.0, 100.0, doc="max mean digit eccentricity"),
    "envelope.cluster_gap": Key(2.0, 0.0, 20.0, doc="address clustering gap, x median component height"),
}


RUNTIME_KEYS = ("jobs", "verbosity")


def _coerce(key, raw):
    spec = KEYS[key]
    kind = type(spec.default)
    try:
        if kind is bool:
            low = str(raw).strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            val = low in ("true", "1", "yes")
        elif kind is int:
            val = int(str(raw).strip())
        elif kind is float:
            val = float(str(raw).strip())
        else:
            val = str(raw).strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None
    if spec.choices and val not in spec.choices:
        raise ConfigError(f"{key}: {val!r} not in {spec.choices}")
    if spec.lo is not None and not spec.lo <= val <= spec.hi:
        raise ConfigError(f"{key}: {val!r} outside [{spec.lo}, {spec.hi}]")
    return val


class PipelineConfig:
    def __init__(self, values=None):
        self.values = {k: v.default for k, v in KEYS.items()}
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key, value):
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        self.values[key] = _coerce(key, value)

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def parse(cls, text, source="<config>"):
        cfg = cls()
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{n}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            try:
                cfg.set(key, value)
            except ConfigError as exc:
                raise ConfigError(f"{source}:{n}: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.parse(text, str(path))

    def dump(self):
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(self.values.items()))

    def hash(self):
        """Digest of every key that can change results (not jobs or verbosity)."""
        text = "".join(line for line in self.dump().splitlines(keepends=True)
                       if line.split(" = ")[0] not in RUNTIME_KEYS)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def header(self, command):
        return (f"version {__version__}\ncommand {command}\nseed {self['seed']}\n"
                f"config_hash {self.hash()}\n")

    # views for the modules ------------------------------------------------

    def synth_config(self):
        return SynthConfig(seed=self["seed"], stroke_width=self["synth.stroke_width"],
                           resolution=self["synth.resolution"], noise_sigma=self["synth.noise_sigma"],
                           n_templates=self["synth.n_templates"], n_instances=self["synth.n_instances"],
                           point_spacing=self["synth.point_spacing"])

    def word_params(self):
        return WordParams(diacritic_ratio=self["imaging.diacritic_ratio"],
                          direction_window=self["recovery.window"], lam=self["recovery.lambda"],
                          step=self["recovery.step"], smooth_sigma=self["recovery.smooth_sigma"],
                          min_depth=self["fit.min_depth"], refine=self["fit.refine"],
                          refine_iter=self["fit.refine_iter"], midpoints=self["matcher.midpoints"])

    def layout_params(self):
        return LayoutParams(border_max=self["envelope.border_max"], margin_band=self["envelope.margin_band"],
                            density_max=self["envelope.density_max"], line_gap=self["envelope.line_gap"],
                            word_gap=self["envelope.word_gap"], width_cv_max=self["envelope.width_cv_max"],
                            ecc_split=self["envelope.ecc_split"], cluster_gap=self["envelope.cluster_gap"])


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def documented_keys():
    """``key = default  # doc [range]`` lines, as shipped in the README."""
    out = []
    for k, spec in KEYS.items():
        rng = f" [{spec.lo}, {spec.hi}]" if spec.lo is not None else (
            f" {{{', '.join(spec.choices)}}}" if spec.choices else "")
        out.append(f"{k} = {_fmt(spec.default)}  # {spec.doc}{rng}")
    return "\n".join(out)
