"""Word image -> skeleton -> ordered trace -> Beta-elliptic model -> trajectory graph."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import beta_elliptic as be
from . import imaging, trajectory
from .errors import FitFailure, InvalidInputError
from .matcher import TrajectoryGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WordParams:
    diacritic_ratio: float = 0.15
    direction_window: int = trajectory.DIRECTION_WINDOW
    lam: float = trajectory.LAMBDA
    step: float = 1.0
    smooth_sigma: float = 4.5       # coarser than the resampler default: jitter-robust stroke cuts
    min_depth: float = 0.0
    refine: bool = True
    refine_iter: int = 60
    midpoints: str = "arc"          # "arc" | "raw"
    strict_skeleton: bool = False


@dataclass
class WordResult:
    skeleton: np.ndarray
    trace: trajectory.OrderedTrace
    resampled: trajectory.ResampledTrace
    velocity: trajectory.VelocityProfile
    model: be.BetaEllipticModel | None
    spans: list
    snr: float | None
    graph: TrajectoryGraph | None = None


def preprocess(img, params=WordParams()):
    return imaging.preprocess_word(img, ratio=params.diacritic_ratio)


def trace_word(skeleton, params=WordParams()):
    from .skeleton_graph import build_graph

    g = build_graph(skeleton, strict=params.strict_skeleton)
    return trajectory.order_segments(g, window=params.direction_window)


def model_trace(tr, params=WordParams()):
    """(resampled, velocity, model, spans, snr) for an ordered trace."""
    rs = trajectory.resample(tr, lam=params.lam, step=params.step, sigma=params.smooth_sigma)
    vp = trajectory.estimate_velocity(rs)
    if len(vp.v) < 2:
        raise InvalidInputError("trace too short to model")
    spans = be.segment_strokes(vp, min_depth=params.min_depth)
    model, _ = be.fit_model(rs.points, vp, spans=spans, refine=params.refine,
                            refine_iter=params.refine_iter)
    if not model.strokes:
        raise FitFailure("no stroke could be fitted")
    fitted = be.superpose(vp.t, [s.beta for s in model.strokes])
    snr = be.snr_db(vp.v, fitted)
    return rs, vp, model, spans, snr


def word_graph(model, rs=None, vp=None, spans=None, params=WordParams()):
    if params.midpoints == "raw" and rs is not None:
        starts = be._point_index(vp, len(rs.points))
        raw = [(int(starts[a]), int(starts[b]) + 1) for a, b in spans]
        return TrajectoryGraph.from_model(model, rs.points, raw)
    return TrajectoryGraph.from_model(model)


def process_word(img, params=WordParams()):
    """Run the full chain on a gray or binary word image."""
    sk = preprocess(img, params)
    tr = trace_word(sk, params)
    if len(tr) < 2:
        raise InvalidInputError("no ink in word image")
    rs, vp, model, spans, snr = model_trace(tr, params)
    return WordResult(sk, tr, rs, vp, model, spans, snr, word_graph(model, rs, vp, spans, params))
